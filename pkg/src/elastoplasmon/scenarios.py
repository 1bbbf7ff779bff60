"""Constructive witnesses, the loss schedule, and resonance sweeps.

Witness fields certify the dissipation from both sides: a primal pair
(v, w) with  L_A v - L w = f  gives an upper bound I(v, w), a dual pair
(v, psi) with  L_A psi + delta L v = 0  gives a lower bound J(v, psi).
The generic constants of the asymptotic arguments are replaced by exactly
computed surface pairings and P-norms, and the auxiliary elliptic solves are
done exactly per mode in the radial geometry.

Verdicts are artifact conventions: ``resonant`` needs monotone growth of the
dissipation with fitted log-log slope above 0.5, ``non-resonant`` needs the
final two decades to stay within a factor 10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .harmonics import DerivativeTable, ensure_tables, shared_quadrature
from .lame import LameParams, Term
from .energy import EnergyReport, functional_I, pairing_P, source_pairing, dissipation_E
from .transmission import LayeredMedium, SourceSpec, kernel_basis, solve_modes
from .waves import plasmon_constants

__all__ = [
    "WitnessParams",
    "SweepResult",
    "Piece",
    "schedule_n_delta",
    "toroidal_radial_coeffs",
    "witness_fixed_c",
    "witness_nocore",
    "witness_core_resonant",
    "witness_radial_nonresonant",
    "sweep",
    "fixed_configuration",
    "scheduled_configuration",
]


@dataclass(frozen=True)
class Piece:
    """One annulus of a piecewise witness field."""

    terms: tuple[Term, ...]
    r_lo: float
    r_hi: float


@dataclass
class WitnessParams:
    """Radial matching data of one primal mode witness."""

    n: int
    e: tuple[float, ...]  # e1..e5 branch coefficients (core amplitude 1)
    e6: float  # conormal jump scalar across the source sphere
    tau: complex  # mode amplitude gamma / e6


@dataclass
class SweepResult:
    rows: list[EnergyReport]
    verdict: str
    growth_exponent: float
    meta: dict = field(default_factory=dict)


def schedule_n_delta(R: float, delta: float) -> int:
    """Smallest integer n with R^{-n} < delta, floored at 2."""
    if R <= 1:
        raise ValueError("schedule needs R > 1")
    if delta >= 1:
        return 2
    n = max(1, math.floor(math.log(1.0 / delta) / math.log(R)))
    while R ** (-n) >= delta:
        n += 1
    while n > 1 and R ** (-(n - 1)) < delta:
        n -= 1
    return max(2, n)


# ---------------------------------------------------------------------------
# scalar machinery of the divergence-free family
# ---------------------------------------------------------------------------

def toroidal_radial_coeffs(n: int, mu: float, r: float) -> tuple[float, float]:
    """Traction scalars of pure kernel fields K r^n Y and K r^{-n-1} Y.

    A family-1 kernel K has t1 = t3 = 0, so the traction of K f(r) Y_n on a
    sphere stays proportional to K Y_n with these factors.
    """
    return mu * (n - 1.0) * r ** (n - 1), -mu * (n + 2.0) * r ** (-n - 2)


def _fixed_c_radial_solve(n: int, c: float, r_e: float, q: float, mu: float) -> tuple[np.ndarray, float]:
    """Branch coefficients e1..e5 (core amplitude 1) and the jump scalar e6.

    Solves the five interface conditions of the piecewise pure witness:
    continuity at 1, r_e, q and A-weighted traction continuity at 1, r_e.
    """
    def se(r):
        return toroidal_radial_coeffs(n, mu, r)[0]

    def sd(r):
        return toroidal_radial_coeffs(n, mu, r)[1]

    A = np.zeros((5, 5))
    b = np.zeros(5)
    # continuity at r = 1: e1 + e2 = 1
    A[0, 0] = 1.0
    A[0, 1] = 1.0
    b[0] = 1.0
    # traction at r = 1: c (e1 se + e2 sd) = se
    A[1, 0] = c * se(1.0)
    A[1, 1] = c * sd(1.0)
    b[1] = se(1.0)
    # continuity at r_e
    A[2, 0] = r_e**n
    A[2, 1] = r_e ** (-n - 1)
    A[2, 2] = -(r_e**n)
    A[2, 3] = -(r_e ** (-n - 1))
    # traction at r_e: c (e1 se + e2 sd) = e3 se + e4 sd
    A[3, 0] = c * se(r_e)
    A[3, 1] = c * sd(r_e)
    A[3, 2] = -se(r_e)
    A[3, 3] = -sd(r_e)
    # continuity at q
    A[4, 2] = q**n
    A[4, 3] = q ** (-n - 1)
    A[4, 4] = -(q ** (-n - 1))
    e = np.linalg.solve(A, b)
    e6 = sd(q) * e[4] - (se(q) * e[2] + sd(q) * e[3])
    if abs(e6) < 1e-14:
        raise ArithmeticError(f"witness degenerate at degree {n}: jump scalar vanishes")
    return e, float(e6)


def fixed_c_closed_forms(n: int, c: float, r_e: float, q: float) -> tuple[float, ...]:
    """Published closed forms of e1..e5 (material-free)."""
    e1 = (n - 1 + c * (n + 2)) / (c * (2 * n + 1))
    e2 = (c - 1) * (n - 1) / (c * (2 * n + 1))
    re = r_e ** (2 * n + 1)
    e3 = (-((c - 1) ** 2) * (n**2 + n - 2) + (2 + c * (n - 1) + n) * (n - 1 + c * (n + 2)) * re) / (
        c * (2 * n + 1) ** 2 * re
    )
    e4 = -(c - 1) * (n - 1) * (c * (n + 2) + n - 1) * (re - 1) / (c * (2 * n + 1) ** 2)
    e5 = (
        -(c - 1) * (n - 1) * (n - 1 + c * (n + 2)) * (re - 1)
        + q ** (2 * n + 1) * (-((c - 1) ** 2) * (n**2 + n - 2) / re + (2 + c * (n - 1) + n) * (n - 1 + c * (n + 2)))
    ) / (c * (2 * n + 1) ** 2)
    return (e1, e2, e3, e4, e5)


def _mode_pieces(K: np.ndarray, n: int, coeffs: Sequence[complex], radii: Sequence[float]) -> list[Piece]:
    """Pure-kernel piecewise field from (entire, decaying) amplitude pairs.

    ``coeffs`` holds (a_i, b_i) per region; ``radii`` the interface radii.
    """
    bounds = [0.0] + list(radii) + [math.inf]
    out = []
    for i, (a, b) in enumerate(coeffs):
        terms = []
        if a != 0:
            terms.append(Term(a * K, n, n))
        if b != 0:
            terms.append(Term(b * K, n, -n - 1))
        out.append(Piece(tuple(terms), bounds[i], bounds[i + 1]))
    return out


def _merge_pieces(list_of_pieces: list[list[Piece]]) -> list[Piece]:
    if not list_of_pieces:
        return []
    bounds = sorted({p.r_lo for pieces in list_of_pieces for p in pieces} | {p.r_hi for pieces in list_of_pieces for p in pieces})
    merged = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        terms: list[Term] = []
        for pieces in list_of_pieces:
            for p in pieces:
                if p.r_lo <= lo and hi <= p.r_hi:
                    terms.extend(p.terms)
        merged.append(Piece(tuple(terms), lo, hi))
    return merged


def witness_fixed_c(medium: LayeredMedium, source: SourceSpec, tables: DerivativeTable) -> tuple[list[Piece], float, list[WitnessParams]]:
    """Primal witness for the cored fixed-multiplier configuration.

    The source must carry family-1 content only.  Returns the witness field
    (w = 0), the upper bound I, and the per-mode matching data.
    """
    if medium.core_radius is None:
        raise ValueError("fixed-multiplier witness needs a core")
    if not math.isclose(medium.core_radius, 1.0):
        raise ValueError("witness is built for core radius 1")
    params = medium.base
    r_e, q, c = medium.shell_radius, source.q, medium.c
    tables = ensure_tables(tables, max(n for (n, _, _) in source.coefficients) + 6)
    all_pieces: list[list[Piece]] = []
    data: list[WitnessParams] = []
    for (n, fam, k), gamma in sorted(source.coefficients.items()):
        if gamma == 0:
            continue
        if fam != 1:
            raise ValueError("fixed-multiplier witness needs a family-1 source")
        K = kernel_basis(params, n, tables)[1][k - 1]
        e, e6 = _fixed_c_radial_solve(n, c, r_e, q, params.mu)
        tau = gamma / e6
        coeffs = [(tau, 0.0), (tau * e[0], tau * e[1]), (tau * e[2], tau * e[3]), (0.0, tau * e[4])]
        all_pieces.append(_mode_pieces(K, n, coeffs, [1.0, r_e, q]))
        data.append(WitnessParams(n=n, e=tuple(e), e6=e6, tau=tau))
    pieces = _merge_pieces(all_pieces)
    I_upper = functional_I(pieces, None, medium.delta, params, tables)
    return pieces, I_upper, data


def _perfect_wave_pieces(K: np.ndarray, fam: int, n: int, R: float, params: LameParams,
                         tables: DerivativeTable) -> list[Piece]:
    from .waves import perfect_wave

    w = perfect_wave(K, fam, n, R, params, tables)
    return [Piece(w.interior.terms, 0.0, R), Piece(w.exterior.terms, R, math.inf)]


def _dominant_mode(source: SourceSpec) -> tuple[int, int, int, complex]:
    (n, fam, k), gamma = max(source.coefficients.items(), key=lambda kv: abs(kv[1]))
    return n, fam, k, gamma


def _real_branch_coefficient(gamma: complex) -> float:
    """Re/Im branch choice: the larger real projection of the coefficient."""
    return gamma.real if abs(gamma.real) >= abs(gamma.imag) else gamma.imag


def witness_nocore(medium: LayeredMedium, source: SourceSpec, delta: float,
                   tables: DerivativeTable) -> tuple[list[Piece], float, float]:
    """Dual witness for the core-free resonant configuration.

    Needs medium.c equal to a plasmon constant of the dominant source mode.
    Returns (psi pieces at the optimal amplitude, J lower bound, tau).
    """
    if medium.core_radius is not None:
        raise ValueError("no-core witness requires an empty core")
    params = medium.base
    n0, fam, k, gamma = _dominant_mode(source)
    tables = ensure_tables(tables, n0 + 6)
    zet = plasmon_constants(params, n0).as_tuple()[fam - 1]
    if not math.isclose(medium.c, zet, rel_tol=1e-10):
        raise ValueError(f"multiplier {medium.c} does not match the family-{fam} constant {zet}")
    g = _real_branch_coefficient(gamma)
    if g == 0:
        raise ValueError("dominant source coefficient vanishes on both branches")
    K = kernel_basis(params, n0, tables)[fam][k - 1]
    psi_hat = _perfect_wave_pieces(K, fam, n0, medium.shell_radius, params, tables)
    quad = shared_quadrature(2 * (n0 + 2) + 6)
    unit_source = SourceSpec(q=source.q, coefficients={(n0, fam, k): 1.0})
    C0 = g * source_pairing(psi_hat, unit_source, params, tables, quad)
    C1 = 0.0
    for p in psi_hat:
        C1 += 0.5 * float(np.real(pairing_P(p.terms, p.terms, p.r_lo, p.r_hi, params, tables)))
    tau = C0 / (2.0 * C1 * delta)
    J_lower = C0**2 / (4.0 * C1 * delta)
    psi = [Piece(tuple(Term(tau * t.coef, t.degree, t.power) for t in p.terms), p.r_lo, p.r_hi) for p in psi_hat]
    return psi, J_lower, tau


def _toroidal_surface_solve(n: int, rho: float, density_scalar: complex, mu: float) -> list[tuple[complex, complex]]:
    """Scalar single-layer solve: -L w = density K Y on the sphere rho.

    Returns (entire, decaying) amplitudes inside/outside for a unit kernel;
    continuity plus a plain traction jump of -density determine both.
    """
    # w = a r^n inside, b r^{-n-1} outside; continuity a rho^n = b rho^{-n-1};
    # traction jump (out - in) = -density: mu[-(n+2) b rho^{-n-2} - (n-1) a rho^{n-1}] = -density
    a = density_scalar / (mu * (2 * n + 1.0) * rho ** (n - 1))
    b = a * rho ** (2 * n + 1)
    return [(a, 0.0), (0.0, b)]


def witness_core_resonant(medium: LayeredMedium, source: SourceSpec, delta: float,
                          tables: DerivativeTable) -> tuple[list[Piece], list[Piece], float, float]:
    """Dual witness for the cored scheduled configuration.

    psi is the core-free perfect wave of the scheduled mode; v repairs the
    core interface through an exact per-mode elliptic solve.  Returns
    (v pieces, psi pieces, J lower bound, tau).
    """
    if medium.core_radius is None:
        raise ValueError("core witness requires a core")
    if source.q <= medium.shell_radius:
        raise ValueError("source must lie outside the shell")
    params = medium.base
    mu = params.mu
    a_core = medium.core_radius
    n0, fam, k, gamma = _dominant_mode(source)
    tables = ensure_tables(tables, n0 + 6)
    if fam != 1:
        raise ValueError("core witness implemented for the family-1 schedule")
    zet = plasmon_constants(params, n0).zeta1
    if not math.isclose(medium.c, zet, rel_tol=1e-10):
        raise ValueError(f"multiplier {medium.c} does not match zeta1({n0}) = {zet}")
    g = _real_branch_coefficient(gamma)
    K = kernel_basis(params, n0, tables)[1][k - 1]
    R = medium.shell_radius
    psi_hat = _perfect_wave_pieces(K, 1, n0, R, params, tables)
    quad = shared_quadrature(2 * (n0 + 2) + 6)
    unit_source = SourceSpec(q=source.q, coefficients={(n0, 1, k): 1.0})
    C0 = g * source_pairing(psi_hat, unit_source, params, tables, quad)
    C_psi = 0.0
    for p in psi_hat:
        C_psi += 0.5 * float(np.real(pairing_P(p.terms, p.terms, p.r_lo, p.r_hi, params, tables)))
    # core repair: -delta L v = L_A psi = (c-1) traction(psi) on the core sphere
    se, _ = toroidal_radial_coeffs(n0, mu, a_core)
    rho1 = (medium.c - 1.0) * se  # per unit tau
    amps = _toroidal_surface_solve(n0, a_core, rho1, mu)  # -L v_tilde = rho1 K Y, v = tau v_tilde/delta
    v_tilde = _mode_pieces(K, n0, amps, [a_core])
    P_vt = sum(
        float(np.real(pairing_P(p.terms, p.terms, p.r_lo, p.r_hi, params, tables))) for p in v_tilde
    )
    # J(tau) = C0 tau - (delta C_psi + P_vt/(2 delta) * ... ) tau^2
    C_v = 0.5 * P_vt / delta
    denom = delta * C_psi + C_v
    tau = C0 / (2.0 * denom)
    J_lower = C0**2 / (4.0 * denom)
    scale = lambda pieces, s: [
        Piece(tuple(Term(s * t.coef, t.degree, t.power) for t in p.terms), p.r_lo, p.r_hi) for p in pieces
    ]
    return scale(v_tilde, tau / delta), scale(psi_hat, tau), J_lower, tau


def witness_radial_nonresonant(medium: LayeredMedium, source: SourceSpec, delta: float,
                               tables: DerivativeTable) -> tuple[list[Piece], list[Piece], float]:
    """Primal witness for the cored scheduled configuration outside R^{3/2}.

    The scheduled mode rides the free incident wave (no scattering); the
    constraint defect at the material interfaces is pushed into w by exact
    per-mode solves.  Returns (v pieces, w pieces, I upper bound).
    """
    if medium.core_radius is None:
        raise ValueError("radial witness requires a core")
    params = medium.base
    mu = params.mu
    R, q = medium.shell_radius, source.q
    if q <= R**1.5:
        raise ValueError("hypothesis violated: q must exceed R^{3/2}")
    a_core = medium.core_radius
    tables = ensure_tables(tables, max(n for (n, _, _) in source.coefficients) + 6)
    n_sched = None
    v_parts: list[list[Piece]] = []
    w_parts: list[list[Piece]] = []
    for (n, fam, k), gamma in sorted(source.coefficients.items()):
        if gamma == 0:
            continue
        if fam != 1:
            raise ValueError("radial witness needs a family-1 source")
        zet1 = plasmon_constants(params, n).zeta1
        K = kernel_basis(params, n, tables)[1][k - 1]
        if math.isclose(medium.c, zet1, rel_tol=1e-10):
            # scheduled mode: free incident wave, interface defects go to w
            n_sched = n
            tau = -gamma / ((2 * n + 1.0) * q ** (n - 1) * mu)
            coeffs = [(tau, 0.0), (0.0, tau * q ** (2 * n + 1))]
            v_parts.append(_mode_pieces(K, n, coeffs, [q]))
            for rho, sgn in ((a_core, 1.0), (R, -1.0)):
                se, _ = toroidal_radial_coeffs(n, mu, rho)
                dens = sgn * (medium.c - 1.0) * se * tau
                amps = _toroidal_surface_solve(n, rho, -dens, mu)
                w_parts.append(_mode_pieces(K, n, amps, [rho]))
        else:
            e, e6 = _fixed_c_radial_solve(n, medium.c, R, q, mu)
            tau = gamma / e6
            coeffs = [(tau, 0.0), (tau * e[0], tau * e[1]), (tau * e[2], tau * e[3]), (0.0, tau * e[4])]
            v_parts.append(_mode_pieces(K, n, coeffs, [a_core, R, q]))
    v = _merge_pieces(v_parts)
    w = _merge_pieces(w_parts) if w_parts else []
    I_upper = functional_I(v, w if w else None, delta, params, tables)
    return v, w, I_upper


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class fixed_configuration:
    """delta -> (medium, source) factory with a fixed multiplier."""

    params: LameParams
    shell_radius: float
    c: float
    source: SourceSpec
    core_radius: float | None = None

    def __call__(self, delta: float) -> tuple[LayeredMedium, SourceSpec]:
        med = LayeredMedium(
            shell_radius=self.shell_radius,
            c=self.c,
            delta=delta,
            base=self.params,
            core_radius=self.core_radius,
        )
        return med, self.source


@dataclass(frozen=True)
class scheduled_configuration:
    """delta -> (medium, source) factory following the loss schedule.

    The multiplier is the family constant at the scheduled degree and the
    single-mode source is re-injected there with the given coefficient.
    """

    params: LameParams
    shell_radius: float
    q: float
    family: int = 1
    k: int = 1
    gamma: complex = 1.0
    core_radius: float | None = None

    def __call__(self, delta: float) -> tuple[LayeredMedium, SourceSpec]:
        n = schedule_n_delta(self.shell_radius, delta)
        c = plasmon_constants(self.params, n).as_tuple()[self.family - 1]
        med = LayeredMedium(
            shell_radius=self.shell_radius,
            c=c,
            delta=delta,
            base=self.params,
            core_radius=self.core_radius,
        )
        src = SourceSpec(q=self.q, coefficients={(n, self.family, self.k): self.gamma})
        return med, src


def _fit_slope(deltas: Sequence[float], values: Sequence[float]) -> float:
    x = np.log(1.0 / np.asarray(deltas))
    y = np.log(np.asarray(values))
    A = np.vstack([x, np.ones_like(x)]).T
    slope, _ = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(slope)


def _sweep_row(configuration, delta: float, tables: DerivativeTable, with_witnesses: bool) -> EnergyReport:
    if delta <= 0:
        raise ValueError("delta = 0 is rejected: the exact solve may be singular")
    med, src = configuration(delta)
    sols = solve_modes(med, src, tables)
    E = dissipation_E(sols, med, tables)
    I_upper = None
    J_lower = None
    if with_witnesses:
        for builder in (_try_I, _try_J):
            I_upper, J_lower = builder(med, src, delta, tables, I_upper, J_lower)
    return EnergyReport(delta=delta, E_delta=E, c_used=med.c, I_upper=I_upper,
                        J_lower=J_lower, n_delta=max(src.degrees()))


def sweep(configuration: Callable[[float], tuple[LayeredMedium, SourceSpec]],
          delta_list: Sequence[float], tables: DerivativeTable,
          with_witnesses: bool = True, max_workers: int = 1) -> SweepResult:
    """Exact solves over a decreasing loss list, with witness bounds.

    Each row records the dissipation and whichever bounds apply to the
    configuration; the verdict follows the growth conventions in the module
    docstring.  Rows are independent and run on ``max_workers`` threads over
    shared immutable tables; assembly of the result is ordered.
    """
    deltas = list(delta_list)
    if len(deltas) < 3 or any(b >= a for a, b in zip(deltas[:-1], deltas[1:])):
        raise ValueError("delta_list must be strictly decreasing with >= 3 entries")
    if deltas[0] / deltas[-1] < 0.99e3:
        raise ValueError("sweep must span at least three decades")
    _, deepest_src = configuration(deltas[-1])
    tables = ensure_tables(tables, max(deepest_src.degrees()) + 6)
    if max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(lambda d: _sweep_row(configuration, d, tables, with_witnesses), deltas))
    else:
        rows = [_sweep_row(configuration, d, tables, with_witnesses) for d in deltas]
    E = [r.E_delta for r in rows]
    slope = _fit_slope(deltas, E)
    monotone = all(E[i + 1] >= E[i] * 0.95 for i in range(len(E) - 1))
    final = [r.E_delta for r in rows if r.delta <= deltas[-1] * 100.0]
    # boundedness = no upward move above 10x within the final two decades
    # (a strongly decaying dissipation is bounded, not inconclusive)
    growth_factor = max(
        (final[j] / final[i] for i in range(len(final)) for j in range(i, len(final))),
        default=1.0,
    )
    if monotone and slope > 0.5:
        verdict = "resonant"
    elif growth_factor < 10.0:
        verdict = "non-resonant"
    else:
        verdict = "inconclusive"
    return SweepResult(
        rows=rows,
        verdict=verdict,
        growth_exponent=slope,
        meta={
            "thresholds": "resonant: monotone growth and fitted slope > 0.5; "
            "non-resonant: largest upward move in the final two decades < 10x",
            "final_window_growth_factor": growth_factor,
        },
    )


def _try_I(med, src, delta, tables, I_upper, J_lower):
    if med.core_radius is None:
        return I_upper, J_lower
    candidates = []
    zet1 = plasmon_constants(med.base, max(src.degrees())).zeta1
    if math.isclose(med.c, zet1, rel_tol=1e-10) and src.q > med.shell_radius**1.5:
        try:
            candidates.append(witness_radial_nonresonant(med, src, delta, tables)[2])
        except (ValueError, ArithmeticError):
            pass
    try:
        candidates.append(witness_fixed_c(med, src, tables)[1])
    except (ValueError, ArithmeticError):
        pass
    if candidates:
        I_upper = min(candidates)  # both are valid upper bounds; keep the tighter
    return I_upper, J_lower


def _try_J(med, src, delta, tables, I_upper, J_lower):
    try:
        if med.core_radius is None:
            _, J_lower, _ = witness_nocore(med, src, delta, tables)
        else:
            _, _, J_lower, _ = witness_core_resonant(med, src, delta, tables)
    except (ValueError, ArithmeticError):
        pass
    return I_upper, J_lower
