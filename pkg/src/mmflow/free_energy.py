"""Free-energy densities, the discrete energy functional and its calculus.

A density f(p, z) is smooth on R^n x S, normalized so that value and both
gradients vanish at (0, reference).  The discrete energy collocates f at
cell centers, with the gradient argument p obtained by averaging the two
adjacent face differences; the energy gradient returned here is the exact
derivative of that discrete functional (divided by the cell volume, so it
approximates the variational derivative).

Built-in families: the Cahn-Hilliard-type density
f(p,z) = (eps + a(z))/2 * p^T Gamma p + Psi(z) with a(z) = sum_k
exp(mu_k z_k), and plain quadratic densities given by their Hessian blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .grid import (
    Grid1D,
    GridField,
    face_average,
    face_divergence,
    face_gradient,
    integrate,
)
from .value_space import Case, ValueSpace

__all__ = [
    "EnergyDensity",
    "PolynomialPotential",
    "CahnHilliardParams",
    "normalize_density",
    "make_cahn_hilliard",
    "make_quadratic_density",
    "estimate_coercivity",
    "cell_gradient",
    "discrete_energy",
    "energy_gradient",
    "nonlinear_operator",
    "assemble_quadratic_form",
]


@dataclass
class EnergyDensity:
    """Vectorized free-energy density with first derivatives and Hessian.

    All callables accept arrays p, z of shape (n, M) and return shape (M,)
    for ``evaluate``, (n, M) for the gradients and (2n, 2n, M) for the
    Hessian in (p, z) block order.  ``quadratic_blocks`` holds constant
    Hessian blocks (Qpp, Qpz, Qzz) when f is exactly quadratic around the
    reference state, which enables direct linear solves downstream.
    """

    components: int
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_p: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_z: Callable[[np.ndarray, np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray, np.ndarray], np.ndarray]
    coercivity_lower: float = 0.0
    coercivity_upper: float = 0.0
    quadratic_blocks: Optional[tuple] = None
    name: str = "custom"


def _as_pz(p, z, n):
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if z.ndim == 1:
        z = z[:, None]
    if p.shape[0] != n or z.shape[0] != n:
        raise ValueError("p and z must have one row per component")
    return p, z


def normalize_density(raw: EnergyDensity, space: ValueSpace) -> EnergyDensity:
    """Subtract the affine part of ``raw`` at (0, reference).

    Returns a density with f(0, z0) = 0 and vanishing gradients there;
    Hessian and coercivity constants are unchanged.  Already-normalized
    densities are returned with zero-valued corrections.
    """
    n = space.n
    zref = space.reference
    p0 = np.zeros((n, 1))
    z0 = zref[:, None]
    g0 = float(raw.evaluate(p0, z0)[0])
    gp0 = raw.grad_p(p0, z0)[:, 0].copy()
    gz0 = raw.grad_z(p0, z0)[:, 0].copy()

    def evaluate(p, z):
        p, z = _as_pz(p, z, n)
        corr = g0 + gp0 @ p + gz0 @ (z - zref[:, None])
        return raw.evaluate(p, z) - corr

    def grad_p(p, z):
        p, z = _as_pz(p, z, n)
        return raw.grad_p(p, z) - gp0[:, None]

    def grad_z(p, z):
        p, z = _as_pz(p, z, n)
        return raw.grad_z(p, z) - gz0[:, None]

    return EnergyDensity(
        components=n,
        evaluate=evaluate,
        grad_p=grad_p,
        grad_z=grad_z,
        hessian=raw.hessian,
        coercivity_lower=raw.coercivity_lower,
        coercivity_upper=raw.coercivity_upper,
        quadratic_blocks=raw.quadratic_blocks,
        name=raw.name,
    )


class PolynomialPotential:
    """Componentwise polynomial potential Psi(z) = sum_j P_j(z_j - center_j).

    Coefficients are given per component in increasing degree.  Cross-
    component convexity must come from the Gamma matrix; this class only
    models separable homogeneous parts.
    """

    def __init__(self, coefficients: Sequence[Sequence[float]], center: np.ndarray):
        self.coeffs = [np.asarray(c, dtype=float) for c in coefficients]
        self.center = np.asarray(center, dtype=float)
        if len(self.coeffs) != self.center.size:
            raise ValueError("one coefficient list per component required")

    @property
    def max_degree(self) -> int:
        return max((c.size - 1 for c in self.coeffs), default=0)

    def value(self, z):
        out = 0.0
        for j, c in enumerate(self.coeffs):
            out = out + np.polynomial.polynomial.polyval(z[j] - self.center[j], c)
        return out

    def grad(self, z):
        rows = []
        for j, c in enumerate(self.coeffs):
            d = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.zeros(1)
            rows.append(np.polynomial.polynomial.polyval(z[j] - self.center[j], d))
        return np.stack(rows)

    def hess_diag(self, z):
        rows = []
        for j, c in enumerate(self.coeffs):
            d2 = np.polynomial.polynomial.polyder(c, 2) if c.size > 2 else np.zeros(1)
            rows.append(np.polynomial.polynomial.polyval(z[j] - self.center[j], d2))
        return np.stack(rows)


@dataclass
class CahnHilliardParams:
    """Parameters of the generalized Cahn-Hilliard density.

    ``a_weights`` empty means a(z) = 0, so the gradient prefactor is the
    constant eps and the classical split f = p^T Gamma p / 2 + Psi(z) is
    recovered with eps = 1.
    """

    gamma: np.ndarray
    psi: PolynomialPotential
    epsilon: float = 1.0
    a_weights: Sequence[float] = field(default_factory=list)

    def __post_init__(self):
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        if not np.allclose(self.gamma, self.gamma.T):
            raise ValueError("Gamma must be symmetric")
        if np.min(np.linalg.eigvalsh(self.gamma)) <= 0:
            raise ValueError("Gamma must be positive definite")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        self.a_weights = np.asarray(list(self.a_weights), dtype=float)


def make_cahn_hilliard(params: CahnHilliardParams, space: ValueSpace,
                       coercivity_samples: int = 400) -> EnergyDensity:
    """Normalized generalized Cahn-Hilliard density on the given value space."""
    n = space.n
    gamma = params.gamma
    if gamma.shape != (n, n):
        raise ValueError("Gamma shape does not match the number of components")
    eps = float(params.epsilon)
    mu = params.a_weights
    has_a = mu.size > 0
    if has_a and mu.size != n:
        raise ValueError("a_weights must have one entry per component")
    psi = params.psi

    # Uniform convexity of Psi, sampled on S.
    zs = np.linspace(0.0, 1.0, 64)
    sample = space.lower[:, None] + (space.upper - space.lower)[:, None] * zs[None, :]
    if np.min(psi.hess_diag(sample)) <= 0:
        raise ValueError("Psi must be uniformly convex on the value space")

    def a_val(z):
        if not has_a:
            return np.zeros(z.shape[1])
        return np.sum(np.exp(mu[:, None] * z), axis=0)

    def a_grad(z):
        if not has_a:
            return np.zeros_like(z)
        return mu[:, None] * np.exp(mu[:, None] * z)

    def evaluate(p, z):
        p, z = _as_pz(p, z, n)
        gp = gamma @ p
        quad = np.sum(p * gp, axis=0)
        return 0.5 * (eps + a_val(z)) * quad + psi.value(z)

    def grad_p(p, z):
        p, z = _as_pz(p, z, n)
        return (eps + a_val(z))[None, :] * (gamma @ p)

    def grad_z(p, z):
        p, z = _as_pz(p, z, n)
        quad = np.sum(p * (gamma @ p), axis=0)
        return 0.5 * a_grad(z) * quad[None, :] + psi.grad(z)

    def hessian(p, z):
        p, z = _as_pz(p, z, n)
        m = p.shape[1]
        H = np.zeros((2 * n, 2 * n, m))
        pref = eps + a_val(z)
        gp = gamma @ p
        quad = np.sum(p * gp, axis=0)
        ag = a_grad(z)
        H[:n, :n] = pref[None, None, :] * gamma[:, :, None]
        for j in range(n):
            for k in range(n):
                H[j, n + k] = ag[k] * gp[j]
                H[n + k, j] = ag[k] * gp[j]
        hz = psi.hess_diag(z)
        for j in range(n):
            # a(z) is separable, so its Hessian is diagonal.
            H[n + j, n + j] += 0.5 * (mu[j] ** 2 * np.exp(mu[j] * z[j]) * quad if has_a else 0.0) + hz[j]
        return H

    raw = EnergyDensity(
        components=n,
        evaluate=evaluate,
        grad_p=grad_p,
        grad_z=grad_z,
        hessian=hessian,
        name="cahn_hilliard",
    )
    if not has_a and psi.max_degree <= 2:
        qpp = eps * gamma
        qzz = np.zeros((n, n))
        z0 = space.reference[:, None]
        np.fill_diagonal(qzz, psi.hess_diag(z0)[:, 0])
        raw.quadratic_blocks = (qpp, np.zeros((n, n)), qzz)
    density = normalize_density(raw, space)
    lo, hi = estimate_coercivity(density, space, coercivity_samples)
    density.coercivity_lower = lo
    density.coercivity_upper = hi
    return density


def make_quadratic_density(qpp, qpz, qzz, space: ValueSpace,
                           coercivity_samples: int = 400) -> EnergyDensity:
    """Pure quadratic density from explicit Hessian blocks.

    f(p, z) = p^T Qpp p / 2 + p^T Qpz (z - z0) + (z - z0)^T Qzz (z - z0) / 2,
    already normalized at (0, z0) by construction.
    """
    n = space.n
    qpp = np.atleast_2d(np.asarray(qpp, dtype=float))
    qpz = np.atleast_2d(np.asarray(qpz, dtype=float))
    qzz = np.atleast_2d(np.asarray(qzz, dtype=float))
    for name, q in (("qpp", qpp), ("qpz", qpz), ("qzz", qzz)):
        if q.shape != (n, n):
            raise ValueError(f"{name} must be {n}x{n}")
    if not (np.allclose(qpp, qpp.T) and np.allclose(qzz, qzz.T)):
        raise ValueError("qpp and qzz must be symmetric")
    zref = space.reference

    def evaluate(p, z):
        p, z = _as_pz(p, z, n)
        v = z - zref[:, None]
        return 0.5 * np.sum(p * (qpp @ p), axis=0) + np.sum(p * (qpz @ v), axis=0) \
            + 0.5 * np.sum(v * (qzz @ v), axis=0)

    def grad_p(p, z):
        p, z = _as_pz(p, z, n)
        return qpp @ p + qpz @ (z - zref[:, None])

    def grad_z(p, z):
        p, z = _as_pz(p, z, n)
        return qpz.T @ p + qzz @ (z - zref[:, None])

    H_const = np.block([[qpp, qpz], [qpz.T, qzz]])

    def hessian(p, z):
        p, z = _as_pz(p, z, n)
        return np.repeat(H_const[:, :, None], p.shape[1], axis=2)

    density = EnergyDensity(
        components=n,
        evaluate=evaluate,
        grad_p=grad_p,
        grad_z=grad_z,
        hessian=hessian,
        quadratic_blocks=(qpp, qpz, qzz),
        name="quadratic",
    )
    lo, hi = estimate_coercivity(density, space, coercivity_samples)
    density.coercivity_lower = lo
    density.coercivity_upper = hi
    return density


def estimate_coercivity(density: EnergyDensity, space: ValueSpace,
                        samples: int = 400, seed: int = 0,
                        p_radius: float = 10.0) -> tuple:
    """Sampled growth constants (C_lower, C_upper) of the density Hessian.

    p is drawn from a ball of radius ``p_radius``, z uniformly in S.  In
    case B the extreme eigenvalues of the full Hessian are used; in case A
    the lower constant confines only the p-block, so the Schur complement
    with respect to the z-block is taken.  The lower value is floored at
    1e-12.
    """
    if samples < 100:
        raise ValueError("coercivity sampling needs at least 100 points")
    n = space.n
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((n, samples))
    direction /= np.maximum(np.linalg.norm(direction, axis=0), 1e-300)
    radius = p_radius * rng.random(samples) ** (1.0 / n)
    p = direction * radius
    z = space.lower[:, None] + (space.upper - space.lower)[:, None] * rng.random((n, samples))
    H = density.hessian(p, z)
    if H.shape != (2 * n, 2 * n, samples):
        raise ValueError("hessian callable returned an unexpected shape")

    lower = np.inf
    upper = -np.inf
    for i in range(samples):
        Hi = 0.5 * (H[:, :, i] + H[:, :, i].T)
        eigs = np.linalg.eigvalsh(Hi)
        upper = max(upper, eigs[-1])
        if space.case_tag is Case.B:
            lower = min(lower, eigs[0])
        else:
            Hpp = Hi[:n, :n]
            Hpz = Hi[:n, n:]
            Hzz = Hi[n:, n:]
            if np.min(np.linalg.eigvalsh(Hzz)) < -1e-12:
                lower = 0.0
                continue
            Hzz_pinv = np.linalg.pinv(Hzz, rcond=1e-12)
            schur = Hpp - Hpz @ Hzz_pinv @ Hpz.T
            # Rows of Hpz outside the range of Hzz drive the infimum to -inf.
            residual = Hpz.T - Hzz @ Hzz_pinv @ Hpz.T
            if np.max(np.abs(residual)) > 1e-10 * max(1.0, np.max(np.abs(Hpz))):
                lower = 0.0
                continue
            lower = min(lower, np.min(np.linalg.eigvalsh(schur)))
    return max(float(lower), 1e-12), float(upper)


def cell_gradient(field: GridField) -> np.ndarray:
    """Face differences averaged back to cell centers."""
    g = face_gradient(field)
    return 0.5 * (g[:, :-1] + g[:, 1:])


def _adjoint_cell_average(cells: np.ndarray) -> np.ndarray:
    # Transpose of the face->cell averaging used by cell_gradient.
    n, N = cells.shape
    out = np.zeros((n, N + 1))
    out[:, :-1] += 0.5 * cells
    out[:, 1:] += 0.5 * cells
    return out


def _adjoint_face_gradient(grid: Grid1D, faces: np.ndarray) -> np.ndarray:
    # Transpose of face_gradient; boundary faces never contribute.
    w = faces.copy()
    w[:, 0] = 0.0
    w[:, -1] = 0.0
    return -face_divergence(grid, w)


def discrete_energy(density: EnergyDensity, u: GridField) -> float:
    """Midpoint quadrature of f(Du, u) with the cell-averaged gradient."""
    p = cell_gradient(u)
    return integrate(u.grid, density.evaluate(p, u.values))


def energy_gradient(density: EnergyDensity, u: GridField) -> np.ndarray:
    """Exact gradient of discrete_energy scaled to the variational derivative.

    Cellwise grad_z f(Du, u) minus the divergence of the face extension of
    grad_p f(Du, u); multiplied by the cell volume this is the exact
    derivative of discrete_energy with respect to the cell values, so it
    matches finite differences of the energy to rounding.
    """
    p = cell_gradient(u)
    gz = density.grad_z(p, u.values)
    gp = density.grad_p(p, u.values)
    return gz + _adjoint_face_gradient(u.grid, _adjoint_cell_average(gp))


def nonlinear_operator(density: EnergyDensity, pairs, u: GridField, rho: GridField) -> float:
    """Weak-form pairing of div(M(u) d_x rho) with the metric gradient of E.

    The test field rho must be compactly supported inside the domain; the
    faces carry M(u) averaged from the adjacent cells times the face
    difference of rho, and the cell divergence of that flux is paired with
    the exact discrete variational derivative of the energy (the same
    object the movement stepper descends, so the discrete weak residual is
    free of spurious collocation error).
    """
    if rho.values.shape != u.values.shape:
        raise ValueError("test function must live on the grid of u")
    if np.any(np.abs(rho.values[:, :2]) > 0) or np.any(np.abs(rho.values[:, -2:]) > 0):
        raise ValueError("test function support touches the boundary")
    grid = u.grid
    g_rho = face_gradient(rho)
    u_face = face_average(u)
    m_face = np.stack([pair.mobility_at(u_face[j]) for j, pair in enumerate(pairs)])
    flux = m_face * g_rho
    div_flux = face_divergence(grid, flux)
    return integrate(grid, div_flux * energy_gradient(density, u))


def assemble_quadratic_form(density: EnergyDensity, space: ValueSpace,
                            grid: Grid1D) -> Optional[sp.csc_matrix]:
    """Sparse matrix A with discrete_energy(u) = (u-z0)^T A (u-z0) / 2.

    Only available when the density is exactly quadratic; returns None
    otherwise.  The flattening is component-major, matching
    ``GridField.values.reshape(-1)``.
    """
    if density.quadratic_blocks is None:
        return None
    qpp, qpz, qzz = density.quadratic_blocks
    N = grid.cells
    dx = grid.spacing
    # Face-difference operator with zero boundary rows, then face->cell average.
    e = np.ones(N)
    G = sp.diags([-e / dx, e / dx], [-1, 0], shape=(N + 1, N), format="csr").tolil()
    G[0, :] = 0.0
    G[N, :] = 0.0
    G = G.tocsr()
    Avg = sp.diags([0.5 * np.ones(N + 1), 0.5 * np.ones(N)], [0, 1], shape=(N, N + 1), format="csr")
    D = (Avg @ G).tocsr()
    identity = sp.identity(N, format="csr")
    A = sp.kron(qpp, (D.T @ D), format="csc")
    A = A + sp.kron(qpz, D.T, format="csc") + sp.kron(qpz.T, D, format="csc")
    A = A + sp.kron(qzz, identity, format="csc")
    return (dx * A).tocsc()
