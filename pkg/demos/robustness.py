"""Sensitivity of an optimized pulse to amplitude and detuning errors.

One GRAPE run supplies the pulse; the map scans a common relative amplitude
error and a global detuning offset. The centre of the grid is the
unperturbed pulse and reproduces its fidelity exactly.
"""

import numpy as np

from nvopt.harness import ExperimentSpec, curvature, run_robustness_map, run_single
from nvopt.model import build_interaction_model

model = build_interaction_model()
run = run_single("rabi-resonant", model, 1.0, seed=0, index=0, spec=ExperimentSpec())
dOmega = np.linspace(-0.1, 0.1, 5)
dDelta = np.linspace(-0.2, 0.2, 5)
rmap = run_robustness_map(model, run.field, dOmega, dDelta)

print("dOmega \\ dDelta " + " ".join(f"{d:7.2f}" for d in dDelta))
for o, row in zip(dOmega, rmap.p3):
    print(f"{o:15.3f} " + " ".join(f"{p:7.4f}" for p in row))
print(f"nominal {rmap.nominal:.4f}, curvature (dOmega, dDelta) = {curvature(rmap)}")
