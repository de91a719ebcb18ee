from dataclasses import replace

import numpy as np
import pytest

from nvopt import harness
from nvopt.harness import (
    ExperimentSpec,
    RaceResult,
    curvature,
    draw_start,
    restart_rng,
    run_dt_convergence,
    run_optimization_race,
    run_resolution_study,
    run_robustness_map,
    run_single,
    run_stirap_scan,
    stirap_p3,
)
from nvopt.grape import eval_phi
from nvopt.model import build_interaction_model
from nvopt.pulses import GaussianParams, constant_field, gaussian_stirap
from nvopt.simplex import gaussian_bounds

TINY = ExperimentSpec(dims=4, dissipation=True, T_list=(0.5,), n_restarts=2, dt=0.01,
                      max_iters=5, nm_max_evals=10)


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(kind="bogus")
    with pytest.raises(ValueError):
        ExperimentSpec(methods=("gradient-descent",))
    with pytest.raises(ValueError):
        ExperimentSpec(n_restarts=0)
    assert ExperimentSpec().to_dict()["methods"] == list(harness.METHODS)


def test_scan_row_count():
    spec = ExperimentSpec(kind="stirap-scan", T_list=(1.0, 2.0), amplitudes=(1.0, 3.0, 5.0), dt=0.01)
    rows = run_stirap_scan(spec, variants=[(4, False), (4, True)])
    assert len(rows) == 2 * 3 * 2
    assert all(0 <= r.p3 <= 1 + 1e-9 for r in rows)
    assert {(r.dims, r.dissipation) for r in rows} == {(4, False), (4, True)}


def test_short_pulses_are_not_adiabatic():
    m = build_interaction_model(dims=4, dissipation=False)
    assert stirap_p3(m, 1.0, 10.0) < stirap_p3(m, 1.0, 100.0)


@pytest.mark.parametrize("method", harness.METHODS)
def test_single_restart_reproducible(method):
    m = build_interaction_model(dims=4)
    a = run_single(method, m, 0.5, 7, 3, TINY)
    b = run_single(method, m, 0.5, 7, 3, TINY)
    assert a.p3 == b.p3 and a.seed == 10
    assert np.array_equal(a.field.omega1, b.field.omega1)
    assert a.method == method


def test_restart_streams_differ():
    assert restart_rng(0, 1).uniform() != restart_rng(0, 2).uniform()
    assert restart_rng(3, 0).uniform() == restart_rng(0, 3).uniform()


@pytest.mark.parametrize("method", harness.METHODS)
def test_draw_start_in_box(method):
    rng = np.random.default_rng(0)
    b = gaussian_bounds(1.0)
    for _ in range(50):
        s = draw_start(method, 1.0, rng, ExperimentSpec())
        assert 0 <= s["a"] <= 3
        if "mu" in s:
            assert b[1, 0] <= s["mu"] <= b[1, 1] and b[2, 0] <= s["sigma"] <= b[2, 1]
        elif method == "rabi-resonant":
            assert s["Delta"] == 0.0
        else:
            assert 0 <= s["Delta"] <= 3


@pytest.fixture(scope="module")
def tiny_race():
    return run_optimization_race(TINY)


def test_race_shape(tiny_race):
    assert set(tiny_race.runs) == {(m, 0.5) for m in harness.METHODS}
    assert all(len(r) == 2 for r in tiny_race.runs.values())
    assert [r.seed for r in tiny_race.runs["rabi-resonant", 0.5]] == [0, 1]
    rows = tiny_race.summary()
    assert len(rows) == 4 and all(r["n"] == 2 for r in rows)


def test_best_invariant_under_reordering(tiny_race):
    for key, runs in tiny_race.runs.items():
        flipped = RaceResult(tiny_race.spec, {key: list(reversed(runs))})
        assert flipped.best(*key) is tiny_race.best(*key)


def test_best_tie_goes_to_lowest_seed(tiny_race):
    run = tiny_race.runs["rabi-resonant", 0.5][0]
    a, b = replace(run, seed=5), replace(run, seed=2)
    assert RaceResult(TINY, {("x", 0.5): [a, b]}).best("x", 0.5).seed == 2


def test_workers_do_not_change_results(tiny_race):
    par = run_optimization_race(TINY, workers=2)
    for key, runs in tiny_race.runs.items():
        assert [r.p3 for r in runs] == [r.p3 for r in par.runs[key]]


def test_resolution_at_dt_equals_race(tiny_race):
    res = run_resolution_study(TINY, resolution=TINY.dt)
    for key, runs in tiny_race.runs.items():
        assert [r.p3 for r in runs] == [r.p3 for r in res.runs[key]]


def test_robustness_map(tiny_race):
    m = build_interaction_model(dims=4)
    best = tiny_race.best("adiabatic-grape", 0.5).field
    rmap = run_robustness_map(m, best, [-0.1, 0.0, 0.1], [-0.2, 0.0, 0.2])
    assert rmap.p3.shape == (3, 3)
    assert rmap.p3[1, 1] == rmap.nominal == eval_phi(m, best).p3
    assert np.all(np.isfinite(rmap.p3)) and np.all((rmap.p3 >= 0) & (rmap.p3 <= 1 + 1e-9))
    assert all(np.isfinite(curvature(rmap)))
    with pytest.raises(ValueError):
        run_robustness_map(m, best, [np.nan], [0.0])


def test_dt_convergence_zero_field():
    m = build_interaction_model(dims=4)
    study = run_dt_convergence(m, lambda dt: constant_field(0, 0, 1.0, dt, m.carriers), (0.02, 0.01, 0.005))
    assert all(r.p3 == 0.0 for r in study.rows)
    assert study.rows[0].diff is None and all(r.diff == 0.0 for r in study.rows[1:])


def test_dt_convergence_gaussian():
    m = build_interaction_model(dims=4)

    def make(dt):
        return gaussian_stirap(GaussianParams.default(5.0, 2.0), 2.0, dt, m.carriers)

    study = run_dt_convergence(m, make, (0.01, 0.005, 0.0025), rk4_dt=0.005)
    assert [r.dt for r in study.rows] == [0.01, 0.005, 0.0025]
    assert study.rows[-1].diff < 1e-3
    assert study.rk4_max_diff < 1e-6


def test_physicality_check():
    m = build_interaction_model(dims=4)
    f = gaussian_stirap(GaussianParams.default(5.0, 2.0), 2.0, 0.005, m.carriers)
    p = harness.check_physicality(m, f)
    assert p["trace_drift"] < 1e-8 and p["min_eigenvalue"] > -1e-7


def test_workers_env(monkeypatch):
    monkeypatch.setenv("NVOPT_WORKERS", "3")
    assert harness.resolve_workers(1) == 3
    monkeypatch.delenv("NVOPT_WORKERS")
    assert harness.resolve_workers(None) == 1
