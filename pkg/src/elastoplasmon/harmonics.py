"""Orthonormal spherical harmonics, sphere quadrature and solid-harmonic
derivative matrices.

Conventions
-----------
* ``Y_n^m`` is the complex orthonormal spherical harmonic with the
  Condon-Shortley phase, so ``int_{S^2} Y_n^m conj(Y_n'^m') = delta delta``.
* Stacked vectors ``Y_n(xhat)`` hold the orders in descending sequence
  ``m = n, n-1, ..., -n``;  position ``i`` stores order ``m = n - i``.
* ``r^n Y_n`` (regular) and ``r^{-n-1} Y_n`` (irregular) solid harmonics obey

      d/dx_j [r^n     Y_n] = lower[n][j]  . r^{n-1} Y_{n-1}
      d/dx_j [r^{-n-1}Y_n] = raise_[n][j] . r^{-n-2} Y_{n+1}

  ``lower[n][j]`` has shape ``(2n+1, 2n-1)`` and ``raise_[n][j]`` has shape
  ``(2n+1, 2n+3)``.  With the complex basis the ``x_2`` members are purely
  imaginary; the other two are real.
* Entries come from the standard solid-harmonic gradient ladders in the
  Cartesian combinations ``d/dz``, ``d/dx +- i d/dy``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import pi, sqrt

import numpy as np

__all__ = [
    "HarmonicIndex",
    "SphereQuadrature",
    "DerivativeTable",
    "SMatrixSet",
    "eval_Y",
    "sph_harm_stack",
    "build_quadrature",
    "build_derivative_tables",
    "build_s_matrices",
    "dmat",
]


@dataclass(frozen=True)
class HarmonicIndex:
    """Degree/order pair with the stacking convention m = n, n-1, ..., -n."""

    degree: int
    order: int

    def __post_init__(self):
        if self.degree < 0 or abs(self.order) > self.degree:
            raise ValueError(f"invalid harmonic index (n={self.degree}, m={self.order})")

    @property
    def position(self) -> int:
        """Row of this order inside the stacked vector of its degree."""
        return self.degree - self.order


def _normalized_legendre_scaled(n_max: int, z: np.ndarray) -> np.ndarray:
    """Scaled associated Legendre table A[n, m] with Y_n^m = A[n,m] (x+iy)^m.

    ``A[n, m] = Pbar_n^m(z) / sin(theta)^m`` for m >= 0, where ``Pbar`` is the
    orthonormalized function including the Condon-Shortley phase.  Scaling by
    ``sin^m`` keeps the recurrence pole-free.
    """
    z = np.asarray(z, dtype=float)
    A = np.zeros((n_max + 1, n_max + 1) + z.shape)
    A[0, 0] = 1.0 / sqrt(4.0 * pi)
    for m in range(1, n_max + 1):
        A[m, m] = -sqrt((2 * m + 1) / (2.0 * m)) * A[m - 1, m - 1]
    for m in range(0, n_max):
        A[m + 1, m] = sqrt(2 * m + 3.0) * z * A[m, m]
    for m in range(0, n_max + 1):
        for n in range(m + 2, n_max + 1):
            c1 = sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            c2 = sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            A[n, m] = c1 * (z * A[n - 1, m] - c2 * A[n - 2, m])
    return A


def sph_harm_stack(n: int, xhat: np.ndarray) -> np.ndarray:
    """Stacked vector Y_n at unit direction(s), orders m = n ... -n.

    Parameters
    ----------
    n : int
        Harmonic degree.
    xhat : array, shape (..., 3)
        Unit direction(s).

    Returns
    -------
    array, shape (..., 2n+1), complex
    """
    xhat = np.asarray(xhat, dtype=float)
    x, y, z = xhat[..., 0], xhat[..., 1], xhat[..., 2]
    A = _normalized_legendre_scaled(n, z)
    u = x + 1j * y
    out = np.zeros(z.shape + (2 * n + 1,), dtype=complex)
    upow = np.ones_like(u)
    for m in range(0, n + 1):
        ym = A[n, m] * upow
        out[..., n - m] = ym
        if m > 0:
            out[..., n + m] = (-1) ** m * np.conj(ym)
        upow = upow * u
    return out


def eval_Y(idx: HarmonicIndex, direction: np.ndarray) -> complex:
    """Single orthonormal harmonic value at a unit direction.

    Raises ``ValueError`` when the direction is not normalized to 1e-12.
    """
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    return complex(sph_harm_stack(idx.degree, direction)[idx.position])


@dataclass(frozen=True)
class SphereQuadrature:
    """Product Gauss-Legendre (polar) x uniform (azimuthal) rule on S^2."""

    nodes: np.ndarray  # (N, 3) unit vectors
    weights: np.ndarray  # (N,), sums to 4 pi
    exactness: int

    def integrate(self, values: np.ndarray) -> complex:
        """Integrate nodal samples; leading axis must match the node count."""
        return np.tensordot(self.weights, values, axes=(0, 0))

    @lru_cache(maxsize=None)
    def harmonics(self, n: int) -> np.ndarray:
        """Cached (N, 2n+1) table of Y_n at the nodes."""
        return sph_harm_stack(n, self.nodes)

    def project(self, values: np.ndarray, n: int) -> np.ndarray:
        """Coefficients <values, Y_n^m> for m = n ... -n.

        ``values`` may carry trailing axes (e.g. vector components); the
        result has shape (2n+1,) + trailing.
        """
        Yc = np.conj(self.harmonics(n))  # (N, 2n+1)
        wv = self.weights[:, None] * Yc  # (N, 2n+1)
        return np.tensordot(wv, values, axes=(0, 0))

    def __hash__(self):  # needed for the lru_cache on self
        return id(self)

    def __eq__(self, other):
        return self is other


def build_quadrature(exactness: int) -> SphereQuadrature:
    """Sphere rule integrating spherical polynomials up to ``exactness``."""
    if exactness < 2:
        raise ValueError("exactness must be >= 2")
    n_theta = exactness // 2 + 1
    n_phi = exactness + 1
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - t**2)
    nodes = np.empty((n_theta * n_phi, 3))
    nodes[:, 0] = np.outer(st, np.cos(phi)).ravel()
    nodes[:, 1] = np.outer(st, np.sin(phi)).ravel()
    nodes[:, 2] = np.outer(t, np.ones(n_phi)).ravel()
    weights = np.outer(wt, np.full(n_phi, 2.0 * pi / n_phi)).ravel()
    return SphereQuadrature(nodes=nodes, weights=weights, exactness=exactness)


def _lower_matrices(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradient ladder for regular solid harmonics of degree n >= 1."""
    Lx = np.zeros((2 * n + 1, 2 * n - 1), dtype=complex)
    Ly = np.zeros_like(Lx)
    Lz = np.zeros_like(Lx)
    s = (2.0 * n + 1.0) / (2.0 * n - 1.0)
    for m in range(-n, n + 1):
        row = n - m
        if abs(m) <= n - 1:
            Lz[row, (n - 1) - m] = sqrt((n + m) * (n - m) * s)
        if abs(m + 1) <= n - 1:
            cp = sqrt((n - m) * (n - m - 1) * s)
            Lx[row, (n - 1) - (m + 1)] += 0.5 * cp
            Ly[row, (n - 1) - (m + 1)] += -0.5j * cp
        if abs(m - 1) <= n - 1:
            cm = -sqrt((n + m) * (n + m - 1) * s)
            Lx[row, (n - 1) - (m - 1)] += 0.5 * cm
            Ly[row, (n - 1) - (m - 1)] += 0.5j * cm
    return Lx, Ly, Lz


def _raise_matrices(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradient ladder for irregular solid harmonics of degree n >= 0."""
    Rx = np.zeros((2 * n + 1, 2 * n + 3), dtype=complex)
    Ry = np.zeros_like(Rx)
    Rz = np.zeros_like(Rx)
    s = (2.0 * n + 1.0) / (2.0 * n + 3.0)
    for m in range(-n, n + 1):
        row = n - m
        Rz[row, (n + 1) - m] = -sqrt((n + 1 + m) * (n + 1 - m) * s)
        cp = sqrt((n + 1 + m) * (n + 2 + m) * s)
        Rx[row, (n + 1) - (m + 1)] += 0.5 * cp
        Ry[row, (n + 1) - (m + 1)] += -0.5j * cp
        cm = -sqrt((n + 1 - m) * (n + 2 - m) * s)
        Rx[row, (n + 1) - (m - 1)] += 0.5 * cm
        Ry[row, (n + 1) - (m - 1)] += 0.5j * cm
    return Rx, Ry, Rz


@dataclass(frozen=True)
class DerivativeTable:
    """Solid-harmonic derivative matrices for degrees up to ``n_max``.

    ``lower[n][j]`` and ``raise_[n][j]`` hold the two defining families; all
    other index patterns used by the mode formulas are these families looked
    up by (source degree, target degree), see :func:`dmat`.
    """

    n_max: int
    lower: tuple  # lower[n] = (Dx, Dy, Dz), valid for 1 <= n <= n_max
    raise_: tuple  # raise_[n] = (Dx, Dy, Dz), valid for 0 <= n <= n_max


def build_derivative_tables(n_max: int, validate: bool = True) -> DerivativeTable:
    """Populate both derivative families and run the build-time self-test.

    The self-test projects analytically evaluated surface gradients onto the
    harmonic basis by quadrature and fails on disagreement above 1e-9.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    lower = (None,) + tuple(_lower_matrices(n) for n in range(1, n_max + 1))
    raise_ = tuple(_raise_matrices(n) for n in range(0, n_max + 1))
    table = DerivativeTable(n_max=n_max, lower=lower, raise_=raise_)
    if validate:
        _quadrature_self_test(table)
    return table


def dmat(table: DerivativeTable, src: int, dst: int, j: int) -> np.ndarray:
    """Derivative matrix selected by (source degree, target degree).

    ``dst = src - 1`` selects the regular family, ``dst = src + 1`` the
    irregular one.  ``j`` is 0, 1, 2 for x, y, z.
    """
    if dst == src - 1:
        if not (1 <= src <= table.n_max):
            raise ValueError(f"lower family degree {src} out of range")
        return table.lower[src][j]
    if dst == src + 1:
        if not (0 <= src <= table.n_max):
            raise ValueError(f"raise family degree {src} out of range")
        return table.raise_[src][j]
    raise ValueError(f"no derivative matrix maps degree {src} to {dst}")


@lru_cache(maxsize=8)
def shared_tables(n_max: int) -> DerivativeTable:
    """Process-wide memoized tables (immutable, safe to share)."""
    return build_derivative_tables(n_max)


@lru_cache(maxsize=64)
def shared_quadrature(exactness: int) -> SphereQuadrature:
    """Process-wide memoized quadrature rules."""
    return build_quadrature(exactness)


def ensure_tables(tables: DerivativeTable | None, n_need: int) -> DerivativeTable:
    """Tables covering degree ``n_need``, reusing or growing the shared set.

    Growth is quantized to multiples of 8 so deep loss schedules do not
    rebuild tables at every step.
    """
    if tables is not None and tables.n_max >= n_need:
        return tables
    return shared_tables(max(12, 8 * ((n_need + 7) // 8)))


@dataclass(frozen=True)
class SMatrixSet:
    """The four degree-n products of two derivative matrices."""

    n: int
    s3: np.ndarray  # (2n+3, 2n-1), vanishes identically (Laplacian of a harmonic)
    s4: np.ndarray  # (2n-1, 2n-1)
    s5: np.ndarray  # (2n-1, 2n+3), vanishes identically
    s6: np.ndarray  # (2n+3, 2n+3)


def build_s_matrices(n: int, tables: DerivativeTable) -> SMatrixSet:
    """Assemble s3..s6 as sums over j of the stated derivative products."""
    if not (2 <= n <= tables.n_max - 1):
        raise ValueError(f"degree {n} outside table range 2..{tables.n_max - 1}")
    s3 = sum(dmat(tables, n + 1, n, j) @ dmat(tables, n, n - 1, j) for j in range(3))
    s4 = sum(dmat(tables, n - 1, n, j) @ dmat(tables, n, n - 1, j) for j in range(3))
    s5 = sum(dmat(tables, n - 1, n, j) @ dmat(tables, n, n + 1, j) for j in range(3))
    s6 = sum(dmat(tables, n + 1, n, j) @ dmat(tables, n, n + 1, j) for j in range(3))
    return SMatrixSet(n=n, s3=s3, s4=s4, s5=s5, s6=s6)


def _surface_gradient_stack(n: int, nodes: np.ndarray) -> np.ndarray:
    """Cartesian gradient of Y_n on the unit sphere, shape (N, 2n+1, 3).

    Uses the theta/phi ladder, independent of the solid ladders above:
    ``dY/dtheta = m cot(theta) Y_n^m + sqrt((n-m)(n+m+1)) e^{-i phi} Y_n^{m+1}``.
    """
    x, y, z = nodes[:, 0], nodes[:, 1], nodes[:, 2]
    st = np.sqrt(np.maximum(1.0 - z**2, 0.0))
    safe = st > 1e-13
    inv_st = np.where(safe, 1.0 / np.where(safe, st, 1.0), 0.0)
    eiphi = np.where(safe, (x + 1j * y) * inv_st, 1.0)
    Y = sph_harm_stack(n, nodes)  # (N, 2n+1)
    dY_dtheta = np.zeros_like(Y)
    dY_dphi = np.zeros_like(Y)
    for m in range(-n, n + 1):
        i = n - m
        term = m * (z * inv_st) * Y[:, i]
        if m + 1 <= n:
            term = term + sqrt((n - m) * (n + m + 1)) * np.conj(eiphi) * Y[:, n - (m + 1)]
        dY_dtheta[:, i] = term
        dY_dphi[:, i] = 1j * m * Y[:, i]
    # unit vectors theta_hat, phi_hat in Cartesian components
    cphi, sphi = np.real(eiphi), np.imag(eiphi)
    theta_hat = np.stack([z * cphi, z * sphi, -st], axis=-1)
    phi_hat = np.stack([-sphi, cphi, np.zeros_like(z)], axis=-1)
    grad = (
        dY_dtheta[:, :, None] * theta_hat[:, None, :]
        + (dY_dphi * inv_st[:, None])[:, :, None] * phi_hat[:, None, :]
    )
    return grad


def _quadrature_self_test(table: DerivativeTable, tol: float = 1e-9) -> None:
    """Check every derivative matrix against quadrature-projected gradients."""
    for n in range(1, table.n_max + 1):
        quad = build_quadrature(2 * n + 4)
        grad = _surface_gradient_stack(n, quad.nodes)  # (N, 2n+1, 3)
        Y = quad.harmonics(n)
        xh = quad.nodes
        # d/dx_j [r^n Y_n] on S^2 = n xhat_j Y + tangential gradient component j
        for j in range(3):
            vals = n * xh[:, j : j + 1] * Y + grad[:, :, j]
            proj = quad.project(vals, n - 1) if n >= 1 else None
            ref = table.lower[n][j]
            if np.max(np.abs(proj.T - ref)) > tol:
                raise AssertionError(f"lower[{n}][{j}] fails quadrature self-test")
        # d/dx_j [r^{-n-1} Y_n] on S^2 = -(n+1) xhat_j Y + tangential component
        for j in range(3):
            vals = -(n + 1) * xh[:, j : j + 1] * Y + grad[:, :, j]
            proj = quad.project(vals, n + 1)
            ref = table.raise_[n][j]
            if np.max(np.abs(proj.T - ref)) > tol:
                raise AssertionError(f"raise_[{n}][{j}] fails quadrature self-test")
    # degree 0 irregular: gradient of 1/(sqrt(4 pi) r)
    quad = build_quadrature(6)
    vals = -quad.nodes / sqrt(4.0 * pi)
    for j in range(3):
        proj = quad.project(vals[:, j], 1)
        if np.max(np.abs(proj.T - table.raise_[0][j])) > tol:
            raise AssertionError(f"raise_[0][{j}] fails quadrature self-test")
