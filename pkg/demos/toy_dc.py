"""A one-dimensional DC problem solved with and without inertia.

Minimise ``x**2 / 2 - |x|``. The critical points are ``+1`` and ``-1``
(and the non-minimising ``0``). The script starts at ``x = 3`` and prints
the Lyapunov values, the accepted inertial weights and the descent report.
"""

import numpy as np

from bregdc import DCProblem, EuclideanKernel, SolverConfig, check_descent, solve

problem = DCProblem(
    f1_value=lambda x: 0.5 * float(np.sum(x * x)),
    f1_grad=lambda x: np.asarray(x, dtype=np.float64),
    f2_value=lambda x: float(np.sum(np.abs(x))),
    f2_subgrad=np.sign,
    kernel=EuclideanKernel(),
    smad_L=1.0,
)

for beta in ("zero", "fista"):
    cfg = SolverConfig(lam=0.9, beta=beta, tol=1e-12, max_iter=200)
    res = solve(problem, cfg, np.array([3.0]))
    print(f"beta={beta}: x = {res.x_final[0]:.12f} after {res.iterations} iterations")
    for r in res.trace[:6]:
        print(f"  k={r.k:2d} beta={r.beta_accepted:.4f} H={r.lyapunov:.6f}")
    rep = check_descent(res.trace, epsilon=cfg.epsilon)
    print(f"  H non-increasing: {rep.monotone}, summable: {rep.summable}")
