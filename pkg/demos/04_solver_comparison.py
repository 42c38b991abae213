"""Monolithic vs partitioned solvers on the same discrete problem.

Both solvers are inexact Newton methods with identical tolerances and
produce identical states; they differ only in how each linear Newton system
is solved.  The coupled solver runs GMRES on the full block system with a
coupled multigrid preconditioner.  The decoupled solver alternates exact
per-cell receptor solves with multigrid-preconditioned solves of the field
block until the full linear residual converges -- which takes many sweeps
when the coupling is strong.

Run:  python demos/04_solver_comparison.py   (takes a few minutes)
"""

import dataclasses

import numpy as np

from intercell import (NewtonConfig, RunConfig, build_problem, newton_coupled,
                       newton_decoupled, pseudo_timestep_globalize)

print(f"{'case':<12} {'solver':<10} {'newton':>6} {'gmres':>6} {'sweeps':>7}")
for label, k_d in (("biological", 0.1), ("artificial", 1000.0)):
    config = RunConfig(n=2, level=1)
    config.params = dataclasses.replace(config.params, k_d=k_d)
    disc, params, _ = build_problem(config)
    cfg = NewtonConfig()
    warm = pseudo_timestep_globalize(disc, disc.rest_state(params), params,
                                     cfg, [0.5] * 20)
    sol_c, st_c = newton_coupled(disc, warm, params, cfg)
    sol_d, st_d = newton_decoupled(disc, warm, params, cfg)
    print(f"{label:<12} {'coupled':<10} {st_c.newton_steps:>6} "
          f"{st_c.krylov_total:>6} {'-':>7}")
    print(f"{label:<12} {'decoupled':<10} {st_d.newton_steps:>6} "
          f"{st_d.krylov_total:>6} {sum(st_d.sweeps_per_step):>7}")
    dev = np.linalg.norm(sol_c.flat() - sol_d.flat(), np.inf)
    print(f"{'':12} solutions agree to |delta|_inf = {dev:.1e}\n")

print("Strong coupling (k_d = 0.1): the partitioned solver needs an order of")
print("magnitude more GMRES iterations for the same answer.  Weak coupling")
print("(k_d = 1000): both are cheap and the gap nearly closes.")
