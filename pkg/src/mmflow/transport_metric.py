"""Dynamic transport distance with nonlinear concave mobilities.

The squared distance between two states is the minimum of the kinetic
action sum_{k,j,f} ds*dx * w^2 / m_j(ubar) over staggered space-time paths
satisfying the discrete continuity equation, where ubar is the mean of the
four density values adjacent to an (inner step, face) point.  Because each
m_j is concave, the integrand is the perspective of a square composed with
a concave map, hence jointly convex, and the whole minimization is a convex
program with affine constraints.

The solver is a Douglas-Rachford primal-dual splitting on three variable
blocks (cell densities U, face momenta W, action-point densities R):

* one prox handles all pointwise nonlinearities: the kinetic prox in
  (W, R) via monotone scalar root finding (mmflow.kernels), the value-space
  box on U, and, in minimizing-movement mode, the free-energy prox on the
  terminal slice;
* the other prox is the exact projection onto the affine set {continuity,
  boundary fluxes, endpoint data, R = interpolation(U)}, performed by a
  prefactored sparse KKT solve whose Schur complement is the space-time
  Laplacian of the staggered grid.

Every returned path is therefore feasible to linear-solver precision; the
reported primal-dual residual is the Douglas-Rachford fixed-point gap.  The
relaxation parameter is scaled by the operator norm of the discrete
space-time divergence, estimated once by power iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .free_energy import EnergyDensity, assemble_quadratic_form, discrete_energy, energy_gradient
from .grid import Grid1D, GridField
from .value_space import EntropyMobilityPair, ValueSpace

__all__ = [
    "TransportPath",
    "SolverOptions",
    "SolveReport",
    "ConvergenceError",
    "action",
    "continuity_residual",
    "perspective_prox",
    "distance",
    "PathSolver",
]


@dataclass(frozen=True)
class TransportPath:
    """Staggered inner-time discretization of a transport path.

    densities: (K+1, n, N) cell-centered states at inner-time nodes;
    momenta:   (K, n, N+1) face-centered fluxes at inner-time midpoints,
    boundary faces identically zero.
    """

    grid: Grid1D
    densities: np.ndarray
    momenta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.densities, dtype=float)
        w = np.asarray(self.momenta, dtype=float)
        if d.ndim != 3 or w.ndim != 3:
            raise ValueError("densities and momenta must be 3d arrays")
        K = w.shape[0]
        if d.shape[0] != K + 1 or d.shape[1] != w.shape[1]:
            raise ValueError("densities and momenta shapes are inconsistent")
        if d.shape[2] != self.grid.cells or w.shape[2] != self.grid.cells + 1:
            raise ValueError("path arrays do not match the grid")
        object.__setattr__(self, "densities", d)
        object.__setattr__(self, "momenta", w)

    @property
    def inner_steps(self) -> int:
        return self.momenta.shape[0]

    @property
    def components(self) -> int:
        return self.densities.shape[1]

    @property
    def inner_spacing(self) -> float:
        return 1.0 / self.inner_steps

    def endpoint_fields(self) -> tuple:
        return (GridField(self.grid, self.densities[0]),
                GridField(self.grid, self.densities[-1]))


def midpoint_face_average(densities: np.ndarray) -> np.ndarray:
    """Average density onto (inner midpoint, face) action points.

    Interior faces take the mean of the four adjacent (time node, cell)
    values; boundary faces the mean of the two adjacent values of the
    single neighboring cell.
    """
    mid = 0.5 * (densities[:-1] + densities[1:])
    K, n, N = mid.shape
    out = np.empty((K, n, N + 1))
    out[..., 1:-1] = 0.5 * (mid[..., 1:] + mid[..., :-1])
    out[..., 0] = mid[..., 0]
    out[..., -1] = mid[..., -1]
    return out


def action(path: TransportPath, pairs: Sequence[EntropyMobilityPair]) -> float:
    """Kinetic action of the path; +inf on flux through a dry point."""
    if len(pairs) != path.components:
        raise ValueError("one entropy/mobility pair per component required")
    ds = path.inner_spacing
    dx = path.grid.spacing
    ubar = midpoint_face_average(path.densities)
    total = 0.0
    for j, pair in enumerate(pairs):
        m = pair.mobility_at(ubar[:, j, :])
        w = path.momenta[:, j, :]
        positive = m > 0.0
        if np.any((~positive) & (w != 0.0)):
            return math.inf
        total += float(np.sum(np.where(positive, w**2 / np.where(positive, m, 1.0), 0.0)))
    return ds * dx * total


def continuity_residual(path: TransportPath) -> float:
    """Max norm of the discrete continuity equation over all points."""
    ds = path.inner_spacing
    dx = path.grid.spacing
    dU = (path.densities[1:] - path.densities[:-1]) / ds
    divW = (path.momenta[..., 1:] - path.momenta[..., :-1]) / dx
    return float(np.max(np.abs(dU + divW))) if dU.size else 0.0


def perspective_prox(w: float, rho_context: float, sigma: float,
                     pair: EntropyMobilityPair) -> tuple:
    """Joint prox of the kinetic integrand at a single point.

    Solves argmin (w'-w)^2/2 + (r'-rho)^2/2 + sigma*w'^2/m(r') with r'
    confined to the mobility interval; absolute tolerance 1e-12.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    w_arr = np.array([float(w)])
    r_arr = np.array([float(rho_context)])
    if pair.mobility_poly is not None:
        c0, c1, c2 = pair.mobility_poly
        wn, rn = kernels.perspective_prox_batch(w_arr, r_arr, float(sigma),
                                                c0, c1, c2, pair.lower, pair.upper)
    else:
        wn, rn = kernels.perspective_prox_batch_generic(w_arr, r_arr, float(sigma), pair)
    return float(wn[0]), float(rn[0])


@dataclass
class SolverOptions:
    """Knobs of the path solver.  Defaults suit the desk-scale scenarios.

    ``step_scale`` left at None picks a mode-tuned default (the pure
    distance solve tolerates a much larger splitting parameter than the
    movement step, whose endpoint prox prefers a smaller one).
    """

    tolerance: float = 1e-8
    max_iterations: int = 200_000
    check_every: int = 20
    step_scale: Optional[float] = None
    relaxation: float = 1.8
    mass_atol: float = 1e-8
    inner_tolerance: float = 1e-13
    inner_max_iterations: int = 400
    power_iterations: int = 60
    min_iterations: int = 1


@dataclass
class SolveReport:
    iterations: int = 0
    primal_dual_residual: float = math.inf
    constraint_residual: float = math.inf
    converged: bool = False
    feasible: bool = True
    objective: float = math.inf
    kinetic_action: float = math.inf


class ConvergenceError(RuntimeError):
    """Raised when the splitting exhausts its iteration budget."""

    def __init__(self, message: str, value: float, path: Optional[TransportPath],
                 report: SolveReport):
        super().__init__(message)
        self.value = value
        self.path = path
        self.report = report


def _divergence_opnorm(K: int, N: int, ds: float, dx: float, iterations: int) -> float:
    """Operator norm of (U, W) -> continuity residual, by power iteration."""
    rng = np.random.default_rng(12345)  # fixed seed: deterministic setup
    U = rng.standard_normal((K + 1, N))
    W = rng.standard_normal((K, N + 1))
    lam = 1.0
    for _ in range(iterations):
        r = (U[1:] - U[:-1]) / ds + (W[:, 1:] - W[:, :-1]) / dx
        Ut = np.zeros_like(U)
        Ut[1:] += r / ds
        Ut[:-1] -= r / ds
        Wt = np.zeros_like(W)
        Wt[:, 1:] += r / dx
        Wt[:, :-1] -= r / dx
        lam = math.sqrt(float(np.sum(Ut**2) + np.sum(Wt**2)))
        if lam == 0.0:
            return 1.0
        U = Ut / lam
        W = Wt / lam
    return math.sqrt(lam)


class PathSolver:
    """Shared Douglas-Rachford engine for distance and movement-step solves.

    mode "distance": both endpoints pinned, objective = action.
    mode "jko": left endpoint pinned, objective = action_weight * action
    + E(terminal slice) with action_weight = 1/(2 tau).
    """

    def __init__(
        self,
        grid: Grid1D,
        pairs: Sequence[EntropyMobilityPair],
        inner_steps: int,
        mode: str,
        u_left: np.ndarray,
        u_right: Optional[np.ndarray] = None,
        density: Optional[EnergyDensity] = None,
        space: Optional[ValueSpace] = None,
        action_weight: float = 1.0,
        opts: Optional[SolverOptions] = None,
    ):
        if mode not in ("distance", "jko"):
            raise ValueError("mode must be 'distance' or 'jko'")
        if mode == "distance" and u_right is None:
            raise ValueError("distance mode needs both endpoints")
        if mode == "jko" and (density is None or space is None):
            raise ValueError("jko mode needs an energy density and value space")
        self.grid = grid
        self.pairs = list(pairs)
        self.K = int(inner_steps)
        if self.K < 1:
            raise ValueError("inner_steps must be at least 1")
        self.n = len(self.pairs)
        self.N = grid.cells
        self.mode = mode
        self.u_left = np.asarray(u_left, dtype=float).reshape(self.n, self.N)
        self.u_right = None if u_right is None else np.asarray(u_right, dtype=float).reshape(self.n, self.N)
        self.density = density
        self.space = space
        self.action_weight = float(action_weight)
        self.opts = opts or SolverOptions()

        self.ds = 1.0 / self.K
        self.dx = grid.spacing
        self.lower = np.array([p.lower for p in self.pairs])
        self.upper = np.array([p.upper for p in self.pairs])

        # The splitting parameter balances the kinetic prox curvature against
        # the constraint geometry; scaling by the norm of the space-time
        # divergence and the square root of the action weight keeps the
        # iteration count flat across grid resolutions and step sizes.
        opnorm = _divergence_opnorm(self.K, self.N, self.ds, self.dx,
                                    self.opts.power_iterations)
        step_scale = self.opts.step_scale
        if step_scale is None:
            step_scale = 256.0 if mode == "distance" else 16.0
        self.gamma = step_scale / (max(opnorm, 1e-12) * math.sqrt(self.action_weight))
        self.sigma_point = self.gamma * self.action_weight * self.ds * self.dx

        self._setup_projection()
        if mode == "jko":
            self._setup_endpoint_prox()

    # ----- affine projection -------------------------------------------------

    def _setup_projection(self) -> None:
        K, N = self.K, self.N
        nU = (K + 1) * N
        nW = K * (N + 1)
        self.nU, self.nW = nU, nW
        self.dimP = nU + 2 * nW

        def iU(k, i):
            return k * N + i

        def iW(k, f):
            return nU + k * (N + 1) + f

        def iR(k, f):
            return nU + nW + k * (N + 1) + f

        rows, cols, vals = [], [], []
        row = 0

        drop = (self.mode == "distance")
        for k in range(K):
            for i in range(N):
                if drop and k == K - 1 and i == N - 1:
                    # The mass telescoping makes one continuity row dependent
                    # when both endpoints are pinned; dropping it keeps the
                    # KKT matrix nonsingular without changing the affine set.
                    continue
                rows += [row] * 4
                cols += [iU(k + 1, i), iU(k, i), iW(k, i + 1), iW(k, i)]
                vals += [1.0 / self.ds, -1.0 / self.ds, 1.0 / self.dx, -1.0 / self.dx]
                row += 1
        for k in range(K):
            for f in (0, N):
                rows.append(row)
                cols.append(iW(k, f))
                vals.append(1.0)
                row += 1
        for k in range(K):
            for f in range(N + 1):
                rows.append(row)
                cols.append(iR(k, f))
                vals.append(1.0)
                if f == 0:
                    stencil = [(iU(k, 0), -0.5), (iU(k + 1, 0), -0.5)]
                elif f == N:
                    stencil = [(iU(k, N - 1), -0.5), (iU(k + 1, N - 1), -0.5)]
                else:
                    stencil = [(iU(k, f - 1), -0.25), (iU(k, f), -0.25),
                               (iU(k + 1, f - 1), -0.25), (iU(k + 1, f), -0.25)]
                for c, v in stencil:
                    rows.append(row)
                    cols.append(c)
                    vals.append(v)
                row += 1
        self._left_rows = row
        for i in range(N):
            rows.append(row)
            cols.append(iU(0, i))
            vals.append(1.0)
            row += 1
        self._right_rows = row
        if self.mode == "distance":
            for i in range(N):
                rows.append(row)
                cols.append(iU(K, i))
                vals.append(1.0)
                row += 1
        self.nrows = row

        A = sp.coo_matrix((vals, (rows, cols)), shape=(self.nrows, self.dimP)).tocsr()
        kkt = sp.bmat([[sp.identity(self.dimP, format="csr"), A.T],
                       [A, None]], format="csc")
        self._kkt_lu = spla.splu(kkt)

        self._rhs_b = np.zeros((self.nrows, self.n))
        self._rhs_b[self._left_rows:self._left_rows + N, :] = self.u_left.T
        if self.mode == "distance":
            self._rhs_b[self._right_rows:self._right_rows + N, :] = self.u_right.T

    def set_left_endpoint(self, u_left: np.ndarray) -> None:
        """Re-pin the left endpoint; the factorization is endpoint-independent."""
        self.u_left = np.asarray(u_left, dtype=float).reshape(self.n, self.N).copy()
        self._rhs_b[self._left_rows:self._left_rows + self.N, :] = self.u_left.T

    def _project(self, U: np.ndarray, W: np.ndarray, R: np.ndarray) -> tuple:
        K, N, n = self.K, self.N, self.n
        X = np.empty((self.dimP, n))
        X[:self.nU] = U.transpose(0, 2, 1).reshape(self.nU, n)
        X[self.nU:self.nU + self.nW] = W.transpose(0, 2, 1).reshape(self.nW, n)
        X[self.nU + self.nW:] = R.transpose(0, 2, 1).reshape(self.nW, n)
        rhs = np.concatenate([X, self._rhs_b], axis=0)
        sol = self._kkt_lu.solve(rhs)
        Xp = sol[:self.dimP]
        Up = Xp[:self.nU].reshape(K + 1, N, n).transpose(0, 2, 1)
        Wp = Xp[self.nU:self.nU + self.nW].reshape(K, N + 1, n).transpose(0, 2, 1)
        Rp = Xp[self.nU + self.nW:].reshape(K, N + 1, n).transpose(0, 2, 1)
        return Up, Wp, Rp

    # ----- pointwise prox ----------------------------------------------------

    def _prox_kinetic(self, W: np.ndarray, R: np.ndarray) -> tuple:
        Wp = np.empty_like(W)
        Rp = np.empty_like(R)
        for j, pair in enumerate(self.pairs):
            if pair.mobility_poly is not None:
                c0, c1, c2 = pair.mobility_poly
                wj, rj = kernels.perspective_prox_batch(
                    W[:, j, :], R[:, j, :], self.sigma_point,
                    c0, c1, c2, pair.lower, pair.upper)
            else:
                wj, rj = kernels.perspective_prox_batch_generic(
                    W[:, j, :], R[:, j, :], self.sigma_point, pair)
            Wp[:, j, :] = wj
            Rp[:, j, :] = rj
        return Wp, Rp

    def _clip_states(self, U: np.ndarray) -> np.ndarray:
        return np.clip(U, self.lower[None, :, None], self.upper[None, :, None])

    # ----- free-energy prox on the terminal slice ----------------------------

    def _setup_endpoint_prox(self) -> None:
        opts = self.opts
        quad = assemble_quadratic_form(self.density, self.space, self.grid)
        self._quad_A = quad
        self._zref_flat = np.repeat(self.space.reference, self.N)
        if quad is not None:
            dim = quad.shape[0]
            self._quad_M = (sp.identity(dim, format="csc") + self.gamma * quad).tocsc()
            self._quad_lu = spla.splu(self._quad_M)
            self._active_lower = np.zeros(dim, dtype=bool)
            self._active_upper = np.zeros(dim, dtype=bool)
            self._as_cache: dict = {}
            lam = 1.0
            v = np.ones(dim)
            for _ in range(30):
                v = quad @ v
                lam = float(np.linalg.norm(v))
                if lam == 0.0:
                    break
                v /= lam
            self._energy_lipschitz = max(lam, 1e-12)
        else:
            cbar = max(self.density.coercivity_upper, 1e-12)
            self._energy_lipschitz = self.dx * cbar * (2.0 / self.dx + 1.0) ** 2
        self._endpoint_warm: Optional[np.ndarray] = None
        self._lo_flat = np.repeat(self.lower, self.N)
        self._hi_flat = np.repeat(self.upper, self.N)

    def _energy_value_grad(self, v_flat: np.ndarray) -> tuple:
        if self._quad_A is not None:
            dev = v_flat - self._zref_flat
            Ad = self._quad_A @ dev
            return 0.5 * float(dev @ Ad), Ad
        u = GridField(self.grid, v_flat.reshape(self.n, self.N))
        return discrete_energy(self.density, u), \
            self.dx * energy_gradient(self.density, u).reshape(-1)

    def _box_qp_active_set(self, q: np.ndarray) -> Optional[np.ndarray]:
        """Exact solve of min v'Mv/2 - q'v over the box, M = I + gamma*A.

        Primal-dual active-set iteration, warm-started from the previous
        call's active sets.  Returns None if it fails to settle (the caller
        then falls back to projected gradient iterations).
        """
        M = self._quad_M
        lo, hi = self._lo_flat, self._hi_flat
        low = self._active_lower.copy()
        up = self._active_upper.copy()
        dim = q.size
        v = np.empty(dim)
        for _ in range(40):
            free = ~(low | up)
            v[low] = lo[low]
            v[up] = hi[up]
            if np.any(free):
                key = free.tobytes()
                cached = self._as_cache.get(key)
                if cached is None:
                    idx = np.flatnonzero(free)
                    act = np.flatnonzero(~free)
                    Mf = M[idx]
                    cached = (idx, act, spla.splu(Mf[:, idx].tocsc()), Mf[:, act].tocsr())
                    if len(self._as_cache) > 8:
                        self._as_cache.clear()
                    self._as_cache[key] = cached
                idx, act, lu, Mfa = cached
                rhs = q[idx] - Mfa @ v[act]
                v[idx] = lu.solve(rhs)
            grad = M @ v - q
            tol = 1e-12 * (1.0 + float(np.max(np.abs(q))))
            new_low = (v < lo - tol) & free | (low & (grad >= -tol))
            new_up = (v > hi + tol) & free | (up & (grad <= tol))
            new_low &= ~new_up
            if np.array_equal(new_low, low) and np.array_equal(new_up, up):
                self._active_lower = low
                self._active_upper = up
                return np.clip(v, lo, hi)
            low, up = new_low, new_up
        return None

    def _prox_endpoint(self, u_in: np.ndarray) -> np.ndarray:
        """argmin |v - u_in|^2/2 + gamma E(v) over the value-space box."""
        gamma = self.gamma
        flat = u_in.reshape(-1)
        if self._quad_A is not None:
            q = flat + gamma * (self._quad_A @ self._zref_flat)
            direct = self._quad_lu.solve(q)
            if np.all(direct >= self._lo_flat) and np.all(direct <= self._hi_flat):
                self._endpoint_warm = direct
                self._active_lower[:] = False
                self._active_upper[:] = False
                return direct.reshape(self.n, self.N)
            solved = self._box_qp_active_set(q)
            if solved is not None:
                self._endpoint_warm = solved
                return solved.reshape(self.n, self.N)
            start = np.clip(direct, self._lo_flat, self._hi_flat)
        elif self._endpoint_warm is not None:
            start = np.clip(self._endpoint_warm, self._lo_flat, self._hi_flat)
        else:
            start = np.clip(flat, self._lo_flat, self._hi_flat)

        # Projected FISTA on the strongly convex prox objective.
        step = 1.0 / (1.0 + gamma * self._energy_lipschitz)
        x = start.copy()
        y = x.copy()
        t = 1.0
        scale = 1.0 + float(np.max(np.abs(flat)))
        for _ in range(self.opts.inner_max_iterations):
            _, gE = self._energy_value_grad(y)
            grad = (y - flat) + gamma * gE
            x_new = np.clip(y - step * grad, self._lo_flat, self._hi_flat)
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            delta = float(np.max(np.abs(x_new - x)))
            x = x_new
            t = t_new
            if delta < self.opts.inner_tolerance * scale:
                break
        self._endpoint_warm = x
        return x.reshape(self.n, self.N)

    def _prox_separable(self, U: np.ndarray, W: np.ndarray, R: np.ndarray) -> tuple:
        Wp, Rp = self._prox_kinetic(W, R)
        Up = self._clip_states(U)
        if self.mode == "jko":
            Up[-1] = self._prox_endpoint(U[-1])
        return Up, Wp, Rp

    # ----- main loop ----------------------------------------------------------

    def initial_path(self) -> tuple:
        K = self.K
        if self.mode == "distance":
            s = np.linspace(0.0, 1.0, K + 1)
            U = (1.0 - s)[:, None, None] * self.u_left[None] + s[:, None, None] * self.u_right[None]
        else:
            U = np.repeat(self.u_left[None], K + 1, axis=0)
        W = np.zeros((K, self.n, self.N + 1))
        R = midpoint_face_average(U)
        return U, W, R

    def solve(self, init: Optional[tuple] = None, reuse_state: bool = False) -> tuple:
        """Run the splitting; returns (path, report, endpoint).

        With ``reuse_state`` the shadow variable of a previous solve on this
        instance seeds the iteration (useful across movement steps whose
        minimizers are a small step apart); otherwise the iteration starts
        from ``init`` or the canonical initial path.
        """
        opts = self.opts
        if opts.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        state = getattr(self, "_shadow_state", None)
        if reuse_state and state is not None:
            yU, yW, yR = (a.copy() for a in state)
        else:
            if init is None:
                init = self.initial_path()
            yU, yW, yR = (a.copy() for a in init)
        lam = opts.relaxation
        size = math.sqrt(yU.size + yW.size + yR.size)
        report = SolveReport()
        it = 0
        residual = math.inf
        while it < opts.max_iterations:
            hU, hW, hR = self._prox_separable(yU, yW, yR)
            tU, tW, tR = self._project(2.0 * hU - yU, 2.0 * hW - yW, 2.0 * hR - yR)
            dU = tU - hU
            dW = tW - hW
            dR = tR - hR
            yU += lam * dU
            yW += lam * dW
            yR += lam * dR
            it += 1
            if it % opts.check_every == 0 or it >= opts.max_iterations:
                residual = math.sqrt(float(np.sum(dU**2) + np.sum(dW**2) + np.sum(dR**2))) / size
                if residual <= opts.tolerance and it >= opts.min_iterations:
                    report.converged = True
                    break
        self._shadow_state = (yU, yW, yR)
        path = TransportPath(self.grid, tU, tW)
        report.iterations = it
        report.primal_dual_residual = residual
        report.constraint_residual = continuity_residual(path)
        # The prox-side momenta vanish exactly at dry points, so the action
        # evaluated there is free of the spurious +inf that solver noise on
        # the (feasible) projected variables would trigger.
        report.kinetic_action = self._hat_action(hW, hR)
        report.objective = self.action_weight * report.kinetic_action
        if self.mode == "jko":
            report.objective += self._energy_value_grad(hU[-1].reshape(-1))[0]
        return path, report, tU[-1]

    def _hat_action(self, W: np.ndarray, R: np.ndarray) -> float:
        total = 0.0
        for j, pair in enumerate(self.pairs):
            m = pair.mobility_at(R[:, j, :])
            w = W[:, j, :]
            positive = m > 0.0
            if np.any((~positive) & (w != 0.0)):
                return math.inf
            total += float(np.sum(np.where(positive, w**2 / np.where(positive, m, 1.0), 0.0)))
        return self.ds * self.dx * total


def distance(
    u0: GridField,
    u1: GridField,
    pairs: Sequence[EntropyMobilityPair],
    opts: Optional[SolverOptions] = None,
    inner_steps: int = 8,
) -> tuple:
    """Transport distance between two states on the same grid.

    Returns (value, path, report).  Endpoints with componentwise mass
    mismatch are at infinite distance under the zero-flux truncation (the
    report is flagged infeasible and no solve is attempted).
    """
    if u0.grid != u1.grid:
        raise ValueError("fields must live on the same grid")
    if u0.values.shape != u1.values.shape:
        raise ValueError("fields must have the same number of components")
    opts = opts or SolverOptions()
    dx = u0.grid.spacing
    mass0 = dx * u0.values.sum(axis=1)
    mass1 = dx * u1.values.sum(axis=1)
    if np.any(np.abs(mass0 - mass1) > opts.mass_atol * (1.0 + np.abs(mass0))):
        K = inner_steps
        U = np.repeat(u0.values[None], K + 1, axis=0)
        path = TransportPath(u0.grid, U, np.zeros((K, u0.components, u0.grid.cells + 1)))
        report = SolveReport(feasible=False, converged=False)
        return math.inf, path, report

    solver = PathSolver(
        grid=u0.grid,
        pairs=pairs,
        inner_steps=inner_steps,
        mode="distance",
        u_left=u0.values,
        u_right=u1.values,
        opts=opts,
    )
    path, report, _ = solver.solve()
    value = math.sqrt(max(report.kinetic_action, 0.0))
    if not report.converged:
        raise ConvergenceError(
            f"distance solve did not converge within {opts.max_iterations} iterations "
            f"(residual {report.primal_dual_residual:.3e})",
            value=value, path=path, report=report)
    return value, path, report
