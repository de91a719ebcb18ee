import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvopt.pulses import (
    ControlField,
    GaussianParams,
    constant_field,
    deps_dDelta,
    deps_domega,
    gaussian_stirap,
    ghz_to_internal,
    internal_to_ghz,
    perturb,
    rebin,
    sample_eps,
)


def test_eps_at_midpoints():
    f = constant_field(2.0, 3.0, 0.05, 0.01, carriers=(10.0, 20.0), Delta=1.0)
    t = (np.arange(5) + 0.5) * 0.01
    assert np.allclose(f.eps_series(), 2 * np.cos(11 * t) + 3 * np.cos(21 * t))
    assert sample_eps(f, 1) == pytest.approx(2 * np.cos(11 * 0.005) + 3 * np.cos(21 * 0.005))
    with pytest.raises(IndexError):
        sample_eps(f, 0)


def test_left_sampling():
    f = ControlField(np.ones(4), np.ones(4), 5.0, 6.0, dt=0.1, sampling="left")
    assert f.times[0] == 0.0
    assert sample_eps(f, 1) == 2.0
    assert deps_dDelta(f)[0] == 0.0


def test_deps_domega():
    f = constant_field(1.0, 1.0, 0.1, 0.01, carriers=(3.0, 4.0), Delta=0.5)
    c1, c2 = deps_domega(f)
    assert np.allclose(c1, np.cos(3.5 * f.times))
    assert np.allclose(c2, np.cos(4.5 * f.times))


def test_deps_dDelta_formula():
    f = constant_field(2.0, 1.0, 0.1, 0.01, carriers=(3.0, 4.0), Delta=0.5)
    t = f.times
    expected = -2 * np.sin(3.5 * t) * t - np.sin(4.5 * t) * t
    assert np.allclose(deps_dDelta(f), expected)
    h = 1e-6
    fd = (f.with_blocks(*f.blocks(), Delta=0.5 + h).eps_series()
          - f.with_blocks(*f.blocks(), Delta=0.5 - h).eps_series()) / (2 * h)
    assert np.allclose(deps_dDelta(f), fd, atol=1e-8)


def test_gaussian_default_shape():
    p = GaussianParams.default(5.0, 100.0)
    assert (p.sigma, p.mu_plus, p.mu_minus) == (10.0, 60.0, 40.0)
    f = gaussian_stirap(p, 100.0, 0.005)
    assert f.n_segments == 20000
    t = f.times
    assert t[np.argmax(f.omega1)] == pytest.approx(60.0, abs=0.005)
    assert t[np.argmax(f.omega2)] == pytest.approx(40.0, abs=0.005)
    assert f.max_amplitude() == pytest.approx(5.0, rel=1e-6)
    # Omega2 comes first (counter-intuitive ordering)
    assert f.omega2[1000] > f.omega1[1000]


def test_gaussian_symmetric():
    p = GaussianParams.symmetric(2.0, 0.3, 0.1, 1.0)
    assert p.mu_minus == pytest.approx(0.7)
    f = gaussian_stirap(p, 1.0, 0.005)
    assert np.allclose(f.omega1, f.omega2[::-1])


def test_gaussian_validation():
    with pytest.raises(ValueError):
        GaussianParams(1.0, 0.5, 0.5, 0.0)
    with pytest.raises(ValueError):
        gaussian_stirap(GaussianParams(1.0, 2.0, 0.5, 0.1), 1.0)
    with pytest.raises(ValueError):
        gaussian_stirap(GaussianParams.default(1.0, 1.0), 1.0, dt=0.3)


def test_energy_constant():
    f = constant_field(3.0, 3.0, 1.0, 0.005)
    assert f.energy() == pytest.approx(2 * 200 * 9.0)


def test_field_validation():
    with pytest.raises(ValueError):
        ControlField(np.ones(3), np.ones(4), 0, 0)
    with pytest.raises(ValueError):
        ControlField(np.array([1.0, np.nan]), np.ones(2), 0, 0)
    with pytest.raises(ValueError):
        ControlField(np.ones(3), np.ones(3), 0, 0, dt=0.01, resolution=0.02)
    with pytest.raises(ValueError):
        ControlField(np.array([1.0, 2.0]), np.ones(2), 0, 0, dt=0.01, resolution=0.02)
    with pytest.raises(ValueError):
        ControlField(np.ones(2), np.ones(2), 0, 0, sampling="random")


def test_read_only():
    f = constant_field(1.0, 1.0, 0.1, 0.01)
    with pytest.raises(ValueError):
        f.omega1[0] = 2.0


def test_perturb_identity_and_scaling():
    f = gaussian_stirap(GaussianParams.default(2.0, 1.0), 1.0, 0.005, (3.0, 1.0), Delta=0.2)
    g = perturb(f, 0.0, 0.0)
    assert np.array_equal(g.eps_series(), f.eps_series())
    h = perturb(f, 0.1, -0.05)
    assert np.allclose(h.omega1, 1.1 * f.omega1)
    assert h.Delta == pytest.approx(0.15)
    with pytest.raises(ValueError):
        perturb(f, -1.5, 0.0)


def test_rebin_block_means():
    f = ControlField(np.arange(8.0), np.ones(8), 0, 0, dt=0.01)
    g = rebin(f, 0.04)
    assert g.block_length == 4 and g.n_blocks == 2
    assert np.allclose(g.blocks()[0], [1.5, 5.5])
    assert np.array_equal(rebin(f, 0.01).omega1, f.omega1)
    with pytest.raises(ValueError):
        rebin(f, 0.03)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.sampled_from([1, 2, 5, 10]),
    blocks=st.integers(1, 8),
)
def test_rebin_properties(seed, n, blocks):
    rng = np.random.default_rng(seed)
    N = n * blocks
    f = ControlField(rng.normal(size=N), rng.normal(size=N), 1.0, 2.0, dt=0.005)
    g = rebin(f, n * 0.005)
    # block means keep the pulse area and never raise the energy
    assert g.omega1.sum() == pytest.approx(f.omega1.sum(), abs=1e-9)
    assert g.energy() <= f.energy() + 1e-9
    assert np.array_equal(rebin(g, n * 0.005).omega1, g.omega1)


def test_with_blocks_expands():
    f = constant_field(1.0, 1.0, 0.1, 0.01, resolution=0.05)
    g = f.with_blocks([1.0, 2.0], [3.0, 4.0], Delta=0.7)
    assert np.array_equal(g.omega1, [1.0] * 5 + [2.0] * 5)
    assert g.Delta == 0.7


@pytest.mark.parametrize("convention", ["plain", "angular"])
def test_pulse_dict_round_trip(convention):
    f = gaussian_stirap(GaussianParams.default(2.0, 1.0), 1.0, 0.005, (73.5, 69.9), Delta=0.3, resolution=0.05)
    d = json.loads(json.dumps(f.to_dict(convention)))
    g = ControlField.from_dict(d)
    assert g.resolution == f.resolution and g.sampling == f.sampling
    if convention == "plain":
        assert np.array_equal(g.omega1, f.omega1) and g.delta1 == f.delta1
    else:
        # one division and one multiplication by 2 pi
        assert np.allclose(g.omega1, f.omega1, rtol=2.3e-16, atol=0)
        assert np.allclose(g.eps_series(), f.eps_series(), rtol=1e-14, atol=1e-14)


def test_pulse_dict_rejects_inconsistent_T():
    d = constant_field(1.0, 1.0, 0.1, 0.01).to_dict()
    d["T_ns"] = 0.2
    with pytest.raises(ValueError):
        ControlField.from_dict(d)
    d["T_ns"] = 0.1
    d["convention"] = "radians"
    with pytest.raises(ValueError):
        ControlField.from_dict(d)


def test_convention_conversion():
    assert ghz_to_internal(1.0, "angular") == pytest.approx(2 * np.pi)
    assert ghz_to_internal(1.0) == 1.0
    assert np.allclose(internal_to_ghz(ghz_to_internal(np.array([1.0, 2.0]), "angular"), "angular"), [1, 2])
