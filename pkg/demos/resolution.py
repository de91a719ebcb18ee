"""Coarser envelope control.

Holding each envelope for 0.05 ns (ten propagation steps) shrinks the
search space tenfold. The carriers are still sampled every step, so only
the controllable part of the field is coarsened.
"""

from nvopt.harness import ExperimentSpec, run_optimization_race, run_resolution_study

spec = ExperimentSpec(methods=("rabi-resonant",), n_restarts=3)
fine = run_optimization_race(spec)
coarse = run_resolution_study(spec, resolution=0.05)
print(f"resolution = dt   : best p3 {fine.best_p3():.4f}")
print(f"resolution = 0.05 : best p3 {coarse.best_p3():.4f}")
