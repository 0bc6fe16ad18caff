import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracplap.grid import Box, Domain, FracParams, Grid, SampledFunction, make_preset, mean_value


def test_grid_checks():
    with pytest.raises(ValueError):
        Grid(1, 12)
    with pytest.raises(ValueError):
        Grid(1, 4)
    with pytest.raises(ValueError):
        Grid(3, 8)
    with pytest.raises(ValueError):
        Grid(1, 8, -1.0)
    g = Grid(2, 16, 2.0)
    assert g.h == 0.125
    assert g.shape == (16, 16)
    assert g.coordinates().shape == (16, 16, 2)


def test_constant_and_sine_presets():
    g = Grid(1, 64)
    u = make_preset("constant", g, {"value": 5})
    assert np.all(u.values == 5)
    v = make_preset("sine", g, {"k": 1})
    x = np.arange(64) / 64
    np.testing.assert_array_equal(v.values, np.sin(2 * np.pi * x))


def test_random_trig_deterministic():
    g = Grid(1, 128)
    a = make_preset("random_trig", g, {"seed": 7})
    b = make_preset("random_trig", g, {"seed": 7})
    assert a.values.tobytes() == b.values.tobytes()
    with pytest.raises(ValueError):
        make_preset("random_trig", g, {})


def test_preset_errors():
    g = Grid(1, 64)
    with pytest.raises(ValueError):
        make_preset("nope", g)
    with pytest.raises(ValueError):
        make_preset("gaussian_bump", g, {"center": 0.9, "radius": 0.3})
    with pytest.raises(ValueError):
        make_preset("hat", g, {"center": 0.1, "radius": 0.2})


def test_bump_support_inside_box():
    g = Grid(1, 256)
    u = make_preset("gaussian_bump", g, {"center": 0.5, "width": 0.05, "radius": 0.2})
    x = g.axes()[0]
    assert np.all(u.values[np.abs(x - 0.5) >= 0.2] == 0)
    assert u.values[128] == 1.0


def test_sampled_function_is_immutable():
    g = Grid(1, 8)
    u = SampledFunction(g, np.arange(8.0))
    with pytest.raises(ValueError):
        u.values[0] = 1.0
    with pytest.raises(ValueError):
        SampledFunction(g, np.full(8, np.nan))
    with pytest.raises(ValueError):
        SampledFunction(g, np.zeros(9))


def test_mean_value_basics():
    g = Grid(1, 256)
    u = make_preset("constant", g, {"value": 5})
    assert mean_value(u, Domain.interval(0.25, 0.5)) == 5
    v = make_preset("sine", g, {"k": 1})
    assert abs(mean_value(v)) < 1e-12
    with pytest.raises(ValueError):
        mean_value(u, Domain(()))


def test_mean_value_hat_half_box():
    # oracle: 16x refined grid with a Richardson step against 8x. Kinks sit on
    # grid nodes, so every level already equals radius / (half-box length).
    def m(n):
        g = Grid(1, n)
        u = make_preset("hat", g, {"center": 0.5, "radius": 0.1875})
        return mean_value(u, Domain.interval(0.25, 0.75))
    fine, mid = m(64 * 16), m(64 * 8)
    oracle = fine + (fine - mid) / 3
    assert abs(oracle - 0.375) < 1e-12
    assert abs(m(64) - oracle) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-100, 100))
def test_mean_value_shift(seed, c):
    g = Grid(1, 64)
    u = make_preset("random_trig", g, {"seed": seed})
    d = Domain.interval(0.125, 0.625)
    a = mean_value(u + c, d)
    b = mean_value(u, d) + c
    assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 1000), st.floats(-5, 5), st.floats(-5, 5))
def test_mean_value_linear(s1, s2, a, b):
    g = Grid(1, 64)
    u = make_preset("random_trig", g, {"seed": s1})
    v = make_preset("random_trig", g, {"seed": s2})
    d = Domain.interval(0.25, 0.75)
    lhs = mean_value(u * a + v * b, d)
    rhs = a * mean_value(u, d) + b * mean_value(v, d)
    assert abs(lhs - rhs) <= 1e-12 * (abs(a) + abs(b) + 1) * 4


def test_binary_round_trip(tmp_path):
    g = Grid(2, 16, 3.0)
    u = make_preset("random_trig", g, {"seed": 3})
    data = u.to_bytes()
    assert len(data) == 16 + 8 * 256
    assert data[:16] == bytes.fromhex("02000000") + bytes.fromhex("10000000") + np.float64(3.0).tobytes()
    w = SampledFunction.from_bytes(data)
    assert w.grid == g and w.values.tobytes() == u.values.tobytes()
    path = tmp_path / "u.bin"
    u.save(path)
    assert SampledFunction.load(path).values.tobytes() == u.values.tobytes()


def test_csv_export():
    g = Grid(1, 8)
    u = make_preset("sine", g, {"k": 1})
    lines = u.to_csv().strip().splitlines()
    assert lines[0] == "index,x,value"
    assert len(lines) == 9
    i, x, val = lines[3].split(",")
    assert int(i) == 2 and float(x) == 0.25 and float(val) == u.values[2]


def test_box_and_domain():
    g = Grid(1, 16)
    b = Box.interval(0.25, 0.5)
    assert b.is_aligned(g) and b.inside_torus(g)
    assert b.scaled(2).lo == (0.125,)
    assert b.mask(g).sum() == 4
    with pytest.raises(ValueError):
        Domain((Box.interval(0, 0.5), Box.interval(0.25, 0.75)))
    with pytest.raises(ValueError):
        Domain.interval(0.1, 0.5).validate(g)
    d = Domain((Box.interval(0, 0.25), Box.interval(0.5, 0.75)))
    assert d.mask(g).sum() == 8
    assert math.isclose(d.measure(g), 0.5)
    g2 = Grid(2, 8)
    b2 = Box((0.25, 0.0), (0.5, 0.5))
    assert b2.mask(g2).sum() == 2 * 4


def test_frac_params():
    FracParams(0.5, 2)
    for bad in [dict(s=0, p=2), dict(s=1, p=2), dict(s=0.5, p=1.5), dict(s=0.5, p=2, eps=-1)]:
        with pytest.raises(ValueError):
            FracParams(**bad)
    with pytest.raises(ValueError):
        FracParams(0.9, 2, eps=0.2).check_shift()
    with pytest.raises(ValueError):
        FracParams(0.5, 3, eps=0.2, t=0.5).check_commutator()
    FracParams(0.5, 2, eps=0.1).check_commutator()
