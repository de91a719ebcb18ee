"""Where adiabatic transfer breaks down.

Short pulses are not adiabatic and strong pulses in the dissipative model
pump population into lossy excited states, so fidelity peaks at moderate
amplitude and long duration.
"""

from nvopt.harness import ExperimentSpec, run_stirap_scan

spec = ExperimentSpec(kind="stirap-scan", T_list=(10.0, 30.0, 100.0), amplitudes=(1.0, 3.0, 5.0, 9.0))
rows = run_stirap_scan(spec, variants=[(10, True)])

print("a [GHz]  " + "  ".join(f"T={T:>5g}" for T in spec.T_list))
for a in spec.amplitudes:
    p = [r.p3 for r in rows if r.a_GHz == a]
    print(f"{a:7g}  " + "  ".join(f"{x:7.4f}" for x in p))
