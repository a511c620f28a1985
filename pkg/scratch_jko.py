"""Scratch: JKO-step solve vs cvxpy, case-B quadratic and case-A box-active."""
import time

import cvxpy as cp
import numpy as np

import mmflow as mm
from mmflow.free_energy import cell_gradient
from mmflow.transport_metric import PathSolver


def cvx_jko(grid, u0, K, tau, energy_expr, lo=0.0, hi=1.0):
    N = grid.cells
    dx = grid.spacing
    ds = 1.0 / K
    U = cp.Variable((K + 1, N))
    W = cp.Variable((K, N + 1))
    cons = [U[0] == u0, W[:, 0] == 0, W[:, -1] == 0, U >= lo, U <= hi]
    for k in range(K):
        cons.append((U[k + 1] - U[k]) / ds + (W[k, 1:] - W[k, :-1]) / dx == 0)
    terms = []
    for k in range(K):
        for f in range(N + 1):
            if f == 0:
                avg = 0.5 * (U[k, 0] + U[k + 1, 0])
            elif f == N:
                avg = 0.5 * (U[k, N - 1] + U[k + 1, N - 1])
            else:
                avg = 0.25 * (U[k, f - 1] + U[k, f] + U[k + 1, f - 1] + U[k + 1, f])
            m = avg - cp.square(avg)
            terms.append(cp.quad_over_lin(W[k, f], m))
    act = ds * dx * cp.sum(cp.hstack(terms))
    obj = act / (2 * tau) + energy_expr(U[K])
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value, U.value


def cell_grad_expr(grid, urow):
    N = grid.cells
    dx = grid.spacing
    g = (urow[1:] - urow[:-1]) / dx          # interior faces
    gl = cp.hstack([0, g])                    # (N,) faces 0..N-1
    gr = cp.hstack([g, 0])                    # faces 1..N
    return 0.5 * (gl + gr)


# ---- case B: quadratic CH energy ----
grid = mm.Grid1D(1.0, 8)
x = grid.cell_centers
space = mm.ValueSpace.case_b([0.0], [1.0], [0.5])
pair = mm.make_logarithmic_pair(0.0, 1.0)
psi = mm.PolynomialPotential([[0.0, 0.0, 1.0]], space.reference)
density = mm.make_cahn_hilliard(mm.CahnHilliardParams(gamma=[[1.0]], psi=psi, epsilon=1.0), space)
print("coercivity:", density.coercivity_lower, density.coercivity_upper)

u0v = 0.5 + 0.2 * np.exp(-4 * x**2)
tau, K = 1e-2, 2
dx = grid.spacing


def e_expr(uK):
    du = cell_grad_expr(grid, uK)
    return dx * (0.5 * cp.sum_squares(du) + cp.sum_squares(uK - 0.5))


val_cvx, Ucvx = cvx_jko(grid, u0v, K, tau, e_expr)
print("cvx jko objective:", val_cvx)

u0 = mm.GridField(grid, u0v)
for scale in (1.0, 2.0):
    opts = mm.SolverOptions(tolerance=1e-11, step_scale=scale, relaxation=1.8)
    t0 = time.time()
    solver = PathSolver(grid=grid, pairs=[pair], inner_steps=K, mode="jko",
                        u_left=u0.values, density=density, space=space,
                        action_weight=1.0 / (2 * tau), opts=opts)
    path, rep, endpoint = solver.solve()
    t = time.time() - t0
    print(f"scale={scale}: obj={rep.objective:.10f} relerr={(rep.objective-val_cvx)/val_cvx:+.2e} "
          f"iters={rep.iterations} res={rep.primal_dual_residual:.2e} [{t:.2f}s]")
    print("  endpoint diff vs cvx:", np.max(np.abs(endpoint - Ucvx[-1])))

# energy decrease check
E0 = mm.discrete_energy(density, u0)
Enext = mm.discrete_energy(density, mm.GridField(grid, endpoint))
act = mm.action(path, [pair])
print("E0", E0, "Enext", Enext, "act/(2tau)", act / (2 * tau), "sum", Enext + act / (2 * tau))

# ---- case A: f = p^2/2, box active at 0 ----
print("\ncase A:")
space_a = mm.ValueSpace.case_a([0.0], [1.0])
density_a = mm.make_quadratic_density([[1.0]], [[0.0]], [[0.0]], space_a)
print("coercivity A:", density_a.coercivity_lower, density_a.coercivity_upper)
u0a = np.maximum(0.0, 0.35 * (1 - (x / 0.6) ** 2))  # compact bump touching 0
tau_a = 2e-2


def e_expr_a(uK):
    du = cell_grad_expr(grid, uK)
    return dx * 0.5 * cp.sum_squares(du)


val_cvx_a, Ucvx_a = cvx_jko(grid, u0a, K, tau_a, e_expr_a)
print("cvx jko objective A:", val_cvx_a)
opts = mm.SolverOptions(tolerance=1e-11, step_scale=2.0, relaxation=1.8)
solver = PathSolver(grid=grid, pairs=[pair], inner_steps=K, mode="jko",
                    u_left=u0a[None, :], density=density_a, space=space_a,
                    action_weight=1.0 / (2 * tau_a), opts=opts)
t0 = time.time()
path, rep, endpoint = solver.solve()
t = time.time() - t0
print(f"obj={rep.objective:.10f} relerr={(rep.objective-val_cvx_a)/max(val_cvx_a,1e-12):+.2e} "
      f"iters={rep.iterations} res={rep.primal_dual_residual:.2e} [{t:.2f}s]")
print("endpoint min:", endpoint.min(), " diff vs cvx:", np.max(np.abs(endpoint - Ucvx_a[-1])))
