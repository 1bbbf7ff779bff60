"""Perfect plasmon elastic waves of the core-free sphere transmission problem.

For a fixed degree n >= 2 the exterior field is one irregular block with
coefficient matrix G.  Matching the Dirichlet data of the interior solution
obtained from the surface displacement against the one obtained from the
surface traction (divided by the shell multiplier c) yields a square linear
map on G; its null space is nontrivial exactly at the three plasmon
constants.  Null bases are rotated to self-conjugate matrices, so every
returned kernel generates a real-valued field G Y_n.

The Neumann-Poincare route is independent: densities e_j Y_n^m on the sphere
are convolved with the Kelvin matrix through exact radial factors of the
Newtonian and distance kernels, and K* is read off as the average of the two
one-sided conormal traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .harmonics import DerivativeTable, SphereQuadrature, build_quadrature, ensure_tables
from .lame import (
    LameParams,
    ModeField,
    Term,
    eval_terms,
    exterior_traction_coeffs,
    lame_residual,
    mode_constants,
    stack_rows,
    t1_vector,
    t3_vector,
    term_derivative,
    traction_coeffs,
    _neumann_to_dirichlet,
)

__all__ = [
    "PlasmonConstants",
    "PlasmonEigenProblem",
    "PerfectWave",
    "plasmon_constants",
    "assemble_H",
    "plasmon_kernel",
    "perfect_wave",
    "verify_perfect_wave",
    "np_eigenvalue_map",
    "kelvin_matrix",
    "single_layer_field",
    "np_galerkin_spectrum",
]


@dataclass(frozen=True)
class PlasmonConstants:
    """The three negative shell multipliers admitting nontrivial waves."""

    n: int
    zeta1: float
    zeta2: float
    zeta3: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.zeta1, self.zeta2, self.zeta3)


def plasmon_constants(params: LameParams, n: int) -> PlasmonConstants:
    """Closed-form plasmon constants for degree n >= 2.

    The middle constant carries the combination (n-1) lambda + (3n-2) mu in
    its numerator; the transmission eigenproblem, the kernel multiplicity
    2n-1 and the Neumann-Poincare spectrum all confirm this form.
    """
    if n < 2:
        raise ValueError("plasmon constants need n >= 2")
    lam, mu = params.lam, params.mu
    z1 = -1.0 - 3.0 / (n - 1.0)
    z2 = -(2.0 * n + 2.0) * ((n - 1) * lam + (3 * n - 2) * mu) / (
        (2.0 * n * n + 1.0) * lam + (2.0 + 2.0 * n * (n - 1.0)) * mu
    )
    z3 = -((2.0 * n * n + 4 * n + 3) * lam + (2.0 * n * n + 6 * n + 6) * mu) / (
        2.0 * n * ((n + 2) * lam + (3 * n + 5) * mu)
    )
    out = PlasmonConstants(n=n, zeta1=z1, zeta2=z2, zeta3=z3)
    if not all(z < 0 for z in out.as_tuple()):
        raise AssertionError(f"plasmon constants not all negative at n={n}: {out}")
    return out


@dataclass
class PlasmonEigenProblem:
    """Square matching problem on vec(G) = [G_1, G_2, G_3] for one degree."""

    n: int
    c: float
    R: float
    params: LameParams
    H: np.ndarray  # (3(2n+1), 3(2n+1)); row convention vec(G) @ H = defect
    singular_values: np.ndarray = field(default=None)

    def defect(self, G: np.ndarray) -> np.ndarray:
        return np.asarray(G, dtype=complex).reshape(-1) @ self.H


def _vec(G: np.ndarray) -> np.ndarray:
    return np.asarray(G).reshape(-1)


def _unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape(3, 2 * n + 1)


def assemble_H(n: int, params: LameParams, c: float, tables: DerivativeTable,
               R: float = 1.0) -> PlasmonEigenProblem:
    """Displacement-match composed with traction expansion and inversion.

    Columns are produced by pushing basis coefficient matrices through the
    degree-n building blocks: surface displacement of the irregular block,
    its closed-form surface traction, and the traction-to-displacement
    inversion carrying the multiplier c.
    """
    if n < 2:
        raise ValueError("assemble_H needs n >= 2")
    if c == 0:
        raise ValueError("multiplier c = 0 makes the traction inversion singular")
    tables = ensure_tables(tables, n + 4)
    N = 3 * (2 * n + 1)
    M = np.zeros((N, N), dtype=complex)
    for a in range(N):
        E = _unvec(np.eye(N)[a], n)
        disp = E / R ** (n + 1)
        trac_n = exterior_traction_coeffs(E, n, R, params, tables)[n]
        tilde = _neumann_to_dirichlet(trac_n, n, R, params, tables, c=c)
        M[:, a] = _vec(disp - tilde)
    prob = PlasmonEigenProblem(n=n, c=c, R=R, params=params, H=M.T)
    prob.singular_values = np.linalg.svd(M, compute_uv=False)
    return prob


def _flip_matrix(n: int) -> np.ndarray:
    m = n - np.arange(2 * n + 1)
    F = np.zeros((2 * n + 1, 2 * n + 1))
    F[np.arange(2 * n + 1), n + m] = (-1.0) ** m
    return F


def _conj_kernel(G: np.ndarray) -> np.ndarray:
    """Antiunitary map fixing matrices whose field G Y_n is real-valued."""
    n = (G.shape[1] - 1) // 2
    return np.conj(G) @ _flip_matrix(n)


def plasmon_kernel(problem: PlasmonEigenProblem, rel_tol: float = 1e-9) -> list[np.ndarray]:
    """Orthonormal self-conjugate basis of the null space of the matching map.

    Raises ``ValueError`` with the smallest residual singular value when the
    multiplier is not a plasmon constant.
    """
    n = problem.n
    U, s, Vh = np.linalg.svd(problem.H.T)
    keep = s < rel_tol * s[0]
    if not np.any(keep):
        raise ValueError(
            f"no kernel at c={problem.c}: smallest singular value {s[-1]:.3e} "
            f"(relative {s[-1] / s[0]:.3e})"
        )
    raw = [_unvec(Vh[i].conj(), n) for i in np.nonzero(keep)[0]]
    return _realify(raw)


def _realify(basis: list[np.ndarray]) -> list[np.ndarray]:
    """Rotate a kernel basis to self-conjugate matrices, re-orthonormalized."""
    dim = len(basis)
    out: list[np.ndarray] = []
    candidates: list[np.ndarray] = []
    for G in basis:
        candidates.append(G + _conj_kernel(G))
        candidates.append(1j * (G - _conj_kernel(G)))
    for cand in candidates:
        w = cand.copy()
        for prev in out:
            w = w - np.sum(w * np.conj(prev)) * prev
        nrm = math.sqrt(abs(np.sum(w * np.conj(w))))
        if nrm > 1e-8:
            out.append(w / nrm)
        if len(out) == dim:
            break
    if len(out) != dim:
        raise AssertionError("failed to build a self-conjugate kernel basis")
    return out


def kernel_family(G: np.ndarray, tables: DerivativeTable, tol: float = 1e-8) -> int:
    """Classify a kernel matrix by its t-conditions: 1, 2 or 3."""
    n = (G.shape[1] - 1) // 2
    has_t1 = np.max(np.abs(t1_vector(G, n, tables))) > tol
    has_t3 = np.max(np.abs(t3_vector(G, n, tables))) > tol
    if not has_t1 and not has_t3:
        return 1
    if not has_t1 and has_t3:
        return 2
    if has_t1 and not has_t3:
        return 3
    raise ValueError("matrix has both t1 and t3 content; not a pure kernel")


@dataclass(frozen=True)
class PerfectWave:
    """Piecewise transmission eigenfield for one kernel matrix."""

    n: int
    family: int
    c: float
    R: float
    kernel: np.ndarray
    interior: ModeField
    exterior: ModeField

    def field(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        inside = eval_terms(self.interior.terms, x)
        outside = eval_terms(self.exterior.terms, x)
        return np.where((r <= self.R)[..., None], inside, outside)


def perfect_wave(kernel: np.ndarray, family: int, n: int, R: float,
                 params: LameParams, tables: DerivativeTable) -> PerfectWave:
    """Construct the piecewise wave for a kernel of the given family.

    Family 1 is pure on both sides; family 2 carries the regular correction
    inside with the (r^2 - R^2) split; family 3 carries the irregular
    correction outside with the R^{2n+1} weight on both exterior terms (the
    variant that satisfies the transmission condition).
    """
    K = np.asarray(kernel, dtype=complex)
    tables = ensure_tables(tables, n + 4)
    cst = mode_constants(params, n)
    zetas = plasmon_constants(params, n)
    c = zetas.as_tuple()[family - 1]
    int_terms: list[Term] = [Term(K, n, n)]
    ext_terms: list[Term] = [Term(K * R ** (2 * n + 1), n, -n - 1)]
    if family == 2:
        t3 = t3_vector(K, n, tables)
        corr = stack_rows(t3, tables.lower[n - 1])
        int_terms.append(Term(-cst.M_n * corr, n - 2, n))
        int_terms.append(Term(cst.M_n * R**2 * corr, n - 2, n - 2))
    if family == 3:
        t1 = t1_vector(K, n, tables)
        corr = stack_rows(t1, tables.raise_[n + 1])
        ext_terms.append(Term(cst.k_n * R ** (2 * n + 1) * corr, n + 2, -n - 1))
        ext_terms.append(Term(-cst.k_n * R ** (2 * n + 3) * corr, n + 2, -n - 3))
    return PerfectWave(
        n=n,
        family=family,
        c=c,
        R=R,
        kernel=K,
        interior=ModeField(tuple(int_terms), 0.0, R),
        exterior=ModeField(tuple(ext_terms), R, math.inf),
    )


def verify_perfect_wave(wave: PerfectWave, params: LameParams, tables: DerivativeTable,
                        quad: SphereQuadrature | None = None, n_points: int = 200,
                        seed: int = 0) -> dict[str, float]:
    """Residuals of every defining property of a perfect wave.

    Keys: continuity (pointwise on the interface), transmission (c-weighted
    traction match, relative), lame_interior / lame_exterior (relative finite
    difference residuals), t1_interiors / t3 conditions by family.
    """
    n, R, c = wave.n, wave.R, wave.c
    if quad is None:
        quad = build_quadrature(2 * n + 8)
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_points, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    vin = eval_terms(wave.interior.terms, R * dirs)
    vout = eval_terms(wave.exterior.terms, R * dirs)
    scale = max(1.0, float(np.max(np.abs(vin))))
    continuity = float(np.max(np.abs(vin - vout))) / scale
    t_in = traction_coeffs(wave.interior.terms, R, params, quad, tables=tables)
    t_out = traction_coeffs(wave.exterior.terms, R, params, quad, tables=tables)
    degs = sorted(set(t_in) | set(t_out))
    tenorm = max(
        max((float(np.max(np.abs(m))) for m in t_out.values()), default=0.0), 1e-30
    )
    transmission = max(
        float(
            np.max(
                np.abs(
                    c * t_in.get(d, np.zeros(1)) - t_out.get(d, np.zeros(1))
                )
            )
        )
        for d in degs
    ) / tenorm
    pts_in = dirs[:24] * (0.35 * R)
    pts_out = dirs[:24] * (1.7 * R)
    res_in = lame_residual(wave.interior.terms, params, pts_in)
    res_out = lame_residual(wave.exterior.terms, params, pts_out)
    t1 = np.max(np.abs(t1_vector(wave.kernel, n, tables)))
    t3 = np.max(np.abs(t3_vector(wave.kernel, n, tables)))
    return {
        "continuity": continuity,
        "transmission": transmission,
        "lame_interior": res_in,
        "lame_exterior": res_out,
        "t1": float(t1),
        "t3": float(t3),
        "normalization": float(abs(np.sum(wave.kernel * np.conj(wave.kernel)) - 1.0)),
    }


def np_eigenvalue_map(c: float) -> float:
    """Shell multiplier to Neumann-Poincare eigenvalue, (c+1)/(2(c-1))."""
    if c == 1:
        raise ZeroDivisionError("c = 1 is the pole of the eigenvalue map")
    return (c + 1.0) / (2.0 * (c - 1.0))


def kelvin_matrix(x: np.ndarray, params: LameParams) -> np.ndarray:
    """Matrix fundamental solution of the static system at x != 0."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise ZeroDivisionError("Kelvin matrix is singular at x = 0")
    lam, mu = params.lam, params.mu
    alpha = 0.5 * (1.0 / mu + 1.0 / (2.0 * mu + lam))
    beta = 0.5 * (1.0 / mu - 1.0 / (2.0 * mu + lam))
    return -(alpha / (4 * math.pi)) * np.eye(3) / r - (beta / (4 * math.pi)) * np.outer(x, x) / r**3


def _scalar_potential_terms(n: int, pos: int, R: float, kind: str) -> tuple[list[Term], list[Term]]:
    """Single-layer radial factors of 1/|x-y| ('newton') or |x-y| ('dist').

    Returns (inside terms, outside terms) for the density Y_n^m at stack
    position ``pos`` on the sphere of radius R; coefficients are scalar rows.
    """
    row = np.zeros((1, 2 * n + 1), dtype=complex)
    row[0, pos] = 1.0
    f = 4.0 * math.pi * R**2 / (2 * n + 1.0)
    if kind == "newton":
        inside = [Term(f * row / R ** (n + 1), n, n)]
        outside = [Term(f * row * R**n, n, -n - 1)]
    elif kind == "dist":
        inside = [
            Term(f * row / ((2 * n + 3.0) * R ** (n + 1)), n, n + 2),
            Term(-f * row * R ** (1 - n) / (2 * n - 1.0), n, n),
        ]
        outside = [
            Term(f * row * R ** (n + 2) / (2 * n + 3.0), n, -n - 1),
            Term(-f * row * R**n / (2 * n - 1.0), n, -n + 1),
        ]
    else:
        raise ValueError(kind)
    return inside, outside


def _second_derivative_terms(terms: list[Term], i: int, j: int, tables: DerivativeTable) -> list[Term]:
    out: list[Term] = []
    for t in terms:
        for dt in term_derivative(t, j, tables):
            out.extend(term_derivative(dt, i, tables))
    return out


def single_layer_field(j: int, n: int, pos: int, R: float, params: LameParams,
                       tables: DerivativeTable) -> tuple[ModeField, ModeField]:
    """Exact single-layer potential of the density e_j Y_n^m on partial B_R.

    The Kelvin matrix splits into a Newtonian part and second derivatives of
    the distance kernel; both have exact per-degree radial factors, so the
    potential is a finite sum of harmonic terms on either side of the sphere.
    """
    lam, mu = params.lam, params.mu
    alpha = 0.5 * (1.0 / mu + 1.0 / (2.0 * mu + lam))
    beta = 0.5 * (1.0 / mu - 1.0 / (2.0 * mu + lam))
    newt_in, newt_out = _scalar_potential_terms(n, pos, R, "newton")
    dist_in, dist_out = _scalar_potential_terms(n, pos, R, "dist")

    def build(newt: list[Term], dist: list[Term]) -> list[Term]:
        vec: dict[tuple[int, int], np.ndarray] = {}

        def add(i: int, ts: list[Term], w: complex):
            for t in ts:
                key = (t.degree, t.power)
                block = vec.setdefault(key, np.zeros((3, 2 * t.degree + 1), dtype=complex))
                block[i] += w * t.coef[0]

        for t in newt:
            add(j, [t], -(alpha + beta) / (4.0 * math.pi))
        for i in range(3):
            dd = _second_derivative_terms(dist, i, j, tables)
            add(i, dd, beta / (4.0 * math.pi))
        return [Term(block, d, p) for (d, p), block in sorted(vec.items())]

    inside = ModeField(tuple(build(newt_in, dist_in)), 0.0, R)
    outside = ModeField(tuple(build(newt_out, dist_out)), R, math.inf)
    return inside, outside


def np_galerkin_spectrum(R: float, params: LameParams, n_max: int,
                         quad: SphereQuadrature, eps: float = 1e-4) -> list[tuple[float, int]]:
    """Galerkin eigenvalues of K* on vector harmonics up to degree ``n_max``.

    The conormal derivative of the exact single-layer field is evaluated at
    r = R (1 +- eps) and the two one-sided traces are averaged.  Returns
    (eigenvalue, dominant basis degree) pairs sorted by eigenvalue.
    """
    if quad.exactness < 2 * n_max + 4:
        raise ValueError("quadrature exactness below 2 n_max + 4")
    from .harmonics import shared_tables

    tables = shared_tables(n_max + 4)
    basis = [(jj, n, pos) for n in range(1, n_max + 1) for jj in range(3) for pos in range(2 * n + 1)]
    dim = len(basis)
    index = {b: i for i, b in enumerate(basis)}
    M = np.zeros((dim, dim), dtype=complex)
    X_in = (1.0 - eps) * R * quad.nodes
    X_out = (1.0 + eps) * R * quad.nodes
    from .lame import grad_terms, _traction_from_grad

    for a, (jj, n, pos) in enumerate(basis):
        inside, outside = single_layer_field(jj, n, pos, R, params, tables)
        g_in = grad_terms(inside.terms, X_in, tables)
        g_out = grad_terms(outside.terms, X_out, tables)
        t_in = _traction_from_grad(g_in, quad.nodes, params.lam, params.mu)
        t_out = _traction_from_grad(g_out, quad.nodes, params.lam, params.mu)
        kstar = 0.5 * (t_in + t_out)
        for nb in range(1, n_max + 1):
            proj = quad.project(kstar, nb)  # (2nb+1, 3)
            for jb in range(3):
                for pb in range(2 * nb + 1):
                    M[index[(jb, nb, pb)], a] = proj[pb, jb]
    vals, vecs = np.linalg.eig(M)
    out = []
    for v, w in zip(vals, vecs.T):
        deg = basis[int(np.argmax(np.abs(w)))][1]
        out.append((float(np.real(v)), deg))
    out.sort(key=lambda t: t[0])
    return out
