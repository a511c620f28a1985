"""Scratch: validate the DR path solver against cvxpy on tiny instances."""
import numpy as np
import cvxpy as cp
import mmflow as mm
from mmflow.transport_metric import PathSolver, midpoint_face_average


def cvx_distance(grid, u0, u1, K, extra_energy=None, tau=None):
    N = grid.cells
    dx = grid.spacing
    ds = 1.0 / K
    U = cp.Variable((K + 1, N))
    W = cp.Variable((K, N + 1))
    cons = [U[0] == u0, W[:, 0] == 0, W[:, -1] == 0, U >= 0, U <= 1]
    if u1 is not None:
        cons.append(U[K] == u1)
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
            m = avg - cp.square(avg)  # s(1-s), concave
            terms.append(cp.quad_over_lin(W[k, f], m))
    act = ds * dx * cp.sum(cp.hstack(terms))
    if extra_energy is None:
        obj = act
    else:
        obj = act / (2 * tau) + extra_energy(U[K])
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value, U.value, W.value


grid = mm.Grid1D(1.0, 8)
x = grid.cell_centers
np.random.seed(0)
u0v = 0.5 + 0.25 * np.sin(np.pi * x / 1.0)
u1v = 0.5 + 0.25 * np.cos(np.pi * x / 1.0) * np.sin(np.pi * x)
# equalize masses
u1v = u1v - u1v.mean() + u0v.mean()
print("mass0", u0v.mean(), "mass1", u1v.mean())
pair = mm.make_logarithmic_pair(0.0, 1.0)

K = 2
val_cvx, Ucvx, Wcvx = cvx_distance(grid, u0v, u1v, K)
print("cvx distance^2:", val_cvx, " distance:", np.sqrt(val_cvx))

u0 = mm.GridField(grid, u0v)
u1 = mm.GridField(grid, u1v)
import time
for scale in (0.5, 1.0, 2.0, 4.0):
    for relax in (1.0, 1.5, 1.8):
        opts = mm.SolverOptions(tolerance=1e-11, max_iterations=200000, step_scale=scale, relaxation=relax)
        t0 = time.time()
        val, path, rep = mm.distance(u0, u1, [pair], opts=opts, inner_steps=K)
        t = time.time() - t0
        print(f"scale={scale} relax={relax}: d={val:.10f} d2={val**2:.3e} iters={rep.iterations} "
              f"res={rep.primal_dual_residual:.2e} cres={rep.constraint_residual:.2e} "
              f"relerr={(val**2-val_cvx)/val_cvx:+.2e} [{t:.2f}s]")
