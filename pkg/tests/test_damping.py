import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singdamp.damping import (
    BoundedPiece,
    DampingSpec,
    PowerPiece,
    cell_average,
    classify_normal_p,
    constant_damping,
    eval_pointwise,
    predict_rates,
    sharp_damping,
    sobolev_multiplier_ratio,
    total_mass,
)

betas = st.floats(min_value=-0.9, max_value=2.0, allow_nan=False)
power_pieces = st.builds(
    PowerPiece,
    beta=betas,
    sigma=st.floats(min_value=0.0, max_value=3.0),
    theta=st.floats(min_value=-math.pi, max_value=math.pi),
    amplitude=st.floats(min_value=0.1, max_value=5.0),
    plus_one=st.booleans(),
)
bounded_pieces = st.builds(
    lambda a, width, level: BoundedPiece(support=(a, a + width), level=level),
    st.floats(min_value=-math.pi, max_value=math.pi),
    st.floats(min_value=0.01, max_value=6.0),
    st.floats(min_value=0.0, max_value=3.0),
)
specs = st.lists(st.one_of(power_pieces, bounded_pieces), min_size=1, max_size=4).map(
    lambda ps: DampingSpec(tuple(ps))
)


def test_pointwise_sharp_profile():
    spec = sharp_damping(-0.5)
    x = np.array([0.0, 1.0, math.pi / 2 + 0.25, -math.pi / 2 - 0.25])
    assert np.allclose(eval_pointwise(spec, x), [0.0, 0.0, 0.25**-0.5 + 1, 0.25**-0.5 + 1])


def test_pointwise_is_infinite_exactly_at_singular_edges():
    vals = eval_pointwise(sharp_damping(-0.5), np.array([math.pi / 2, -math.pi / 2]))
    assert np.all(np.isinf(vals))
    assert eval_pointwise(sharp_damping(1.0), np.array([math.pi / 2]))[0] == 0.0


def test_cell_inside_window_is_zero():
    assert cell_average(sharp_damping(-0.5), -0.3, 0.4) == 0.0


def test_cell_touching_edge_is_finite_and_exact():
    # average of t**-1/2 + 1 over t in [0, 0.01]
    val = cell_average(sharp_damping(-0.5), math.pi / 2, math.pi / 2 + 0.01)
    assert val == pytest.approx(2 / math.sqrt(0.01) + 1, rel=1e-12)


def test_cell_average_rejects_empty_cells():
    with pytest.raises(ValueError):
        cell_average(sharp_damping(0.0), 1.0, 1.0)


@pytest.mark.parametrize("point", [0.3, 1.9, 2.8, -2.2, -3.0])
def test_small_cells_approach_pointwise_values(point):
    spec = DampingSpec((PowerPiece(-0.5, math.pi / 2, plus_one=True), BoundedPiece((-1.0, 0.5), 0.4)))
    avg = cell_average(spec, point - 5e-7, point + 5e-7)
    ref = eval_pointwise(spec, np.array([point]))[0]
    assert abs(avg - ref) <= 1e-4 * max(abs(ref), 1.0)


@settings(max_examples=60, deadline=None)
@given(specs, st.integers(min_value=16, max_value=400))
def test_periodic_partition_telescopes_to_total_mass(spec, n):
    edges = -math.pi + 2 * math.pi * np.arange(n + 1) / n
    avg = cell_average(spec, edges[:-1], edges[1:])
    mass = total_mass(spec)
    assert np.sum(avg * np.diff(edges)) == pytest.approx(mass, rel=1e-12, abs=1e-12)
    assert np.all(avg >= -1e-12)


@settings(max_examples=60, deadline=None)
@given(specs, betas)
def test_adding_a_smaller_beta_never_raises_normal_p(spec, beta):
    current = classify_normal_p(spec)
    lower = min([beta] + [p.beta for p in spec.power_pieces()])
    extended = DampingSpec(spec.pieces + (PowerPiece(lower, 1.0),))
    assert classify_normal_p(extended) <= current


@settings(max_examples=40, deadline=None)
@given(specs)
def test_json_round_trip(spec):
    again = DampingSpec.from_json(spec.to_json())
    assert again == spec
    assert again.spec_hash() == spec.spec_hash()


def test_json_field_names():
    data = json.loads(DampingSpec((PowerPiece(-0.5, math.pi / 4), BoundedPiece((1.0, 2.0), 3.0))).to_json())
    assert set(data["pieces"][0]) == {"kind", "beta", "sigma", "theta", "amplitude", "plus_one"}
    assert data["pieces"][1] == {"kind": "bounded", "support": [1.0, 2.0], "level": 3.0}


@pytest.mark.parametrize("kwargs", [{"beta": -1.0, "sigma": 1.0}, {"beta": 0.0, "sigma": 4.0}, {"beta": 0.0, "sigma": 1.0, "amplitude": 0.0}])
def test_invalid_power_pieces(kwargs):
    with pytest.raises(ValueError):
        PowerPiece(**kwargs)


def test_negative_bounded_level_rejected():
    with pytest.raises(ValueError):
        BoundedPiece((0.0, 1.0), -1.0)


def test_normal_p_examples():
    assert classify_normal_p(sharp_damping(-0.5)) == pytest.approx(2.0)
    assert math.isinf(classify_normal_p(sharp_damping(0.0)))
    assert math.isinf(classify_normal_p(DampingSpec((PowerPiece(1.0, 1.0), BoundedPiece((0.0, 1.0), 1.0)))))
    mixed = DampingSpec((PowerPiece(-0.5, 1.0), PowerPiece(-0.75, 1.0, theta=math.pi)))
    assert classify_normal_p(mixed) == pytest.approx(4 / 3)


def _edge_lp_integral(spec, edge, p, eps):
    # integral of W**p over (edge + eps, edge + 0.5) on a geometric grid
    t = np.geomspace(eps, 0.5, 4000)
    vals = eval_pointwise(spec, edge + t) ** p
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t)))


def test_normal_p_matches_lp_quadrature_near_the_edge():
    mixed = DampingSpec((PowerPiece(-0.5, 1.0), PowerPiece(-0.75, 1.0, theta=math.pi)))
    p_star = classify_normal_p(mixed)
    # the beta = -3/4 piece has its edge at theta + sigma = pi + 1
    edge = math.pi + 1.0
    below = [_edge_lp_integral(mixed, edge, 0.9 * p_star, eps) for eps in (1e-6, 1e-9, 1e-12)]
    above = [_edge_lp_integral(mixed, edge, 1.1 * p_star, eps) for eps in (1e-6, 1e-9, 1e-12)]
    assert below[-1] / below[0] < 1.5
    # the divergent side grows like eps**-0.1, about 4x over six decades
    assert above[-1] / above[0] > 3.0


def test_rate_prediction_for_sharp_damping():
    rates = predict_rates(sharp_damping(-0.5))
    assert rates.decay_exponent == pytest.approx(0.6)
    assert rates.resolvent_exponent == pytest.approx(2 / 3)
    assert rates.normal_p == pytest.approx(2.0)
    assert rates.schrodinger_exponent == pytest.approx(0.4)
    assert predict_rates(sharp_damping(1.0)).schrodinger_exponent == 0.5


def test_empty_spec_has_no_rates():
    with pytest.raises(ValueError):
        predict_rates(DampingSpec(()))
    with pytest.raises(ValueError):
        classify_normal_p(DampingSpec(()))


def test_unit_damping_multiplier_ratio_is_one():
    stats = sobolev_multiplier_ratio(constant_damping(1.0), 256, 0.0)
    assert stats.max == pytest.approx(1.0, abs=1e-8)
    assert stats.norm == pytest.approx(1.0, abs=1e-8)


def test_multiplier_ratio_is_deterministic_in_the_seed():
    a = sobolev_multiplier_ratio(sharp_damping(-0.5), 128, 0.25, seed=3)
    b = sobolev_multiplier_ratio(sharp_damping(-0.5), 128, 0.25, seed=3)
    assert a == b
    assert a.max <= a.norm + 1e-12
