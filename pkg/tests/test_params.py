import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contactwave.errors import InvalidParams
from contactwave.params import (
    Grid,
    PhysParams,
    check_delta0,
    defect_free_viscosity,
    diffusion_half_width,
    parse_delta0,
)


def test_defaults_and_derived_values():
    p = PhysParams()
    assert p.p_plus == 1.0
    assert p.cv == pytest.approx(1.5)
    assert p.a == pytest.approx(0.4)
    assert p.v_minus == pytest.approx(0.5)


@given(
    st.floats(0.1, 5), st.floats(1.05, 3), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 2), st.floats(0.1, 2)
)
def test_far_field_pressures_agree(R, gamma, tm, tp, vp, kappa):
    p = PhysParams(R=R, gamma=gamma, theta_minus=tm, theta_plus=tp, v_plus=vp, kappa=kappa)
    assert p.v_minus / p.theta_minus == pytest.approx(p.v_plus / p.theta_plus, rel=1e-15)
    assert p.a > 0.0


@pytest.mark.parametrize("field,value", [("gamma", 1.0), ("R", 0.0), ("mu", -1.0), ("theta_minus", 0.0)])
def test_invalid_constants_rejected(field, value):
    with pytest.raises(InvalidParams):
        PhysParams(**{field: value})


def test_gamma_message():
    with pytest.raises(InvalidParams, match="gamma must exceed 1"):
        PhysParams(gamma=1.0)


@pytest.mark.parametrize("text,expected", [("1/9", 1 / 9), ("1/17", 1 / 17), ("1", 1.0), (" 1/33 ", 1 / 33)])
def test_parse_delta0(text, expected):
    assert parse_delta0(text) == expected


@pytest.mark.parametrize("bad", ["1/10", "2/9", "0", "abc", "1/0", 0.3])
def test_parse_delta0_rejects(bad):
    with pytest.raises(InvalidParams):
        parse_delta0(bad)


@given(st.integers(0, 500))
def test_odd_reciprocals_accepted(k):
    assert check_delta0(1.0 / (2 * k + 1)) == 2 * k + 1


def test_defect_free_viscosity_value(params):
    # mu = a R / p_+ = kappa (gamma-1) / (gamma R)
    assert defect_free_viscosity(params) == pytest.approx(0.4)
    assert params.replace(mu=defect_free_viscosity(params)).defect_coefficient == pytest.approx(0.0, abs=1e-16)


def test_grid_nodes():
    g = Grid(5.0, 101)
    assert g.x[0] == -5.0 and g.x[-1] == 5.0
    assert g.dx == pytest.approx(0.1)
    assert np.allclose(np.diff(g.x), g.dx, rtol=1e-12)
    assert np.array_equal(g.x, -g.x[::-1])


def test_grid_refinement_keeps_nodes():
    g = Grid(3.0, 65)
    f = g.refined(2)
    assert f.n_nodes == 4 * 64 + 1
    assert np.allclose(f.x[::4], g.x, atol=1e-14)


@pytest.mark.parametrize("n", [63, 10, 64.5])
def test_grid_minimum_nodes(n):
    with pytest.raises(InvalidParams):
        Grid(1.0, n)


def test_diffusion_half_width(params):
    assert diffusion_half_width(params, 100.0) == pytest.approx(10 * math.sqrt(4 * 0.4 * 100 / 0.5))
