"""The analytic GRAPE gradient against two finite-difference references.

Differences of phi with one segment propagator replaced by its first-order
expansion reproduce the analytic gradient to rounding. Against the exact
propagator the mismatch is O(dt) and halves with the time step.
"""

import numpy as np

from nvopt.grape import TargetWeights, grad_phi
from nvopt.liouville import assemble_split, tensor_split
from nvopt.model import build_interaction_model
from nvopt.pulses import constant_field
from nvopt.validation import exact_phi, gradient_oracle_error

model = build_interaction_model(dims=4)
w = TargetWeights(lam=-0.5)
err = gradient_oracle_error(model, np.random.default_rng(0), N=40, w=w)
print(f"first-order differences: worst relative error {err:.1e}")

rng = np.random.default_rng(1)
b1, b2 = rng.uniform(0.5, 3, 10), rng.uniform(0.5, 3, 10)
split, dense = assemble_split(model), tensor_split(model)
for dt in (0.01, 0.005, 0.0025):
    f = constant_field(1, 1, 0.4, dt, model.carriers, 0.3, resolution=0.04).with_blocks(b1, b2)
    g = grad_phi(model, f, w=w, split=split).dphi_dOmega1
    fd = []
    for k in range(10):
        up, down = b1.copy(), b1.copy()
        up[k] += 1e-5
        down[k] -= 1e-5
        fd.append((exact_phi(model, f.with_blocks(up, b2), w, dense)
                   - exact_phi(model, f.with_blocks(down, b2), w, dense)) / 2e-5)
    fd = np.array(fd)
    print(f"dt = {dt:<7g} error vs exact propagator {np.abs(g - fd).max() / np.abs(fd).max():.3f}")
