"""Gaussian STIRAP in four NV model variants.

A counter-intuitive Gaussian pair (Stokes tone first) moves population from
|-1> to |+1> through the dark state. Without dissipation both the 4-level
and the 10-level models transfer almost perfectly; with spontaneous decay
the 10-level model loses more because of the extra excited states.
"""

from nvopt.harness import VARIANTS, split_for
from nvopt.liouville import propagate_trajectory
from nvopt.model import Level, build_interaction_model
from nvopt.pulses import GaussianParams, gaussian_stirap

a, T, dt = 5.0, 100.0, 0.005  # rad/ns, ns, ns

for dims, dissipation in VARIANTS:
    model = build_interaction_model(dims=dims, dissipation=dissipation)
    field = gaussian_stirap(GaussianParams.default(a, T), T, dt, model.carriers)
    traj = propagate_trajectory(model, field, Level.MINUS1, split=split_for(model))
    p3 = traj.population(Level.PLUS1)[-1]
    peak_a2 = traj.population(Level.A2).max()
    label = f"{dims}-level, {'dissipative' if dissipation else 'closed'}"
    print(f"{label:24s} p(+1) = {p3:.6f}   max p(A2) = {peak_a2:.2e}")
