from dataclasses import replace

import pytest

from contactwave.errors import InvalidParams
from contactwave.experiments import (
    FLAG_REGISTRY,
    SCENARIO_NAMES,
    SUITE,
    GridSpec,
    RunRecord,
    Scenario,
    complete_flags,
    default_scenario,
    delta0_sweep,
    flags_for,
    flow_half_width,
    make_flag,
    run_scenario,
)
from contactwave.params import PhysParams


def test_scenario_validation():
    with pytest.raises(InvalidParams):
        Scenario("nope")
    with pytest.raises(InvalidParams):
        Scenario("stationary", t_final=0.0)
    with pytest.raises(InvalidParams):
        Scenario("stationary", output_ratio=1.0)
    with pytest.raises(InvalidParams):
        Scenario("stationary", extend_factor=0.5)
    with pytest.raises(InvalidParams):
        default_scenario("nope")


@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_default_scenarios_build(name):
    s = default_scenario(name)
    assert s.name == name
    t = s.with_seed(11)
    assert t.seed == 11 and t.initial.seed == 11


def test_registry_covers_every_scenario():
    for key, spec in FLAG_REGISTRY.items():
        assert spec.scenarios, key
        assert set(spec.scenarios) <= set(SCENARIO_NAMES), key
    for name in SUITE:
        assert flags_for(name), name
    assert set(SUITE) <= set(SCENARIO_NAMES)
    # every asserted flag can be reached from the suite
    reached = {k for n in SUITE for k in flags_for(n)}
    assert reached == set(FLAG_REGISTRY)


def test_grid_spec_resolution():
    g = GridSpec(10.0, 0.1).resolve(99.0)
    assert g.half_width == 10.0 and g.dx == pytest.approx(0.1)
    auto = GridSpec(None, 0.1).resolve(25.0)
    assert auto.half_width == 25.0
    fine = GridSpec(10.0, 0.1, refine=2).resolve(0.0)
    assert fine.n_nodes == 4 * (g.n_nodes - 1) + 1


def test_flow_half_width_grows_with_time_and_extent():
    p = PhysParams()
    assert flow_half_width(p, 160.0) > flow_half_width(p, 40.0)
    assert flow_half_width(p, 40.0, 6.0) > flow_half_width(p, 40.0)
    c = p.far_field_sound_speed()
    assert flow_half_width(p, 40.0) >= c * 40.0 / 0.9


def test_complete_flags_marks_unreached_as_failed():
    rec = RunRecord(default_scenario("residual_check"), ok=False, error="boom")
    rec.flags.append(make_flag("solver_order", True, 2.0))
    complete_flags(rec)
    keys = [f.key for f in rec.flags]
    assert keys == flags_for("residual_check")
    missing = [f for f in rec.flags if f.key != "solver_order"]
    assert all(not f.passed and f.measured is None and "boom" in f.detail for f in missing)
    assert not rec.passed


def test_failed_run_gives_failed_record():
    s = replace(default_scenario("perturbed_wave"), max_steps=5)
    rec = run_scenario(s)
    assert not rec.ok and "BudgetExceeded" in rec.error
    assert [f.key for f in rec.flags] == flags_for("perturbed_wave")
    assert all(not f.passed for f in rec.flags)
    assert rec.failed_flags()


def test_stationary_short_run_is_exact_and_deterministic():
    s = replace(default_scenario("stationary"), stationary_steps=300)
    a, b = run_scenario(s), run_scenario(s)
    assert a.passed and a.values["max_norm"] == 0.0
    assert a.values == b.values and a.audits == b.audits
    assert [f.to_dict() for f in a.flags] == [f.to_dict() for f in b.flags]


def test_delta0_table():
    p = PhysParams()
    rows, exps = delta0_sweep(p, (1 / 9, 1 / 33, 1 / 17), dx=0.1)
    assert [r["delta0"] for r in rows] == sorted((1 / 9, 1 / 17, 1 / 33), reverse=True)
    for r in rows:
        assert abs(r["l1_theta0_x"] - 0.5) <= 1e-6
    # the supremum of Theta0_x is linear in delta0
    assert exps["sup_theta0_x"] == pytest.approx(1.0, abs=0.15)
    assert exps["sq_lntheta0_xx"] >= 1.5
    assert set(exps) == {"sq_theta0_x", "sq_lntheta0_xx", "sq_lntheta0_xxx", "sup_theta0_x"}


def test_delta0_sweep_scenario_flags():
    rec = run_scenario(replace(default_scenario("delta0_sweep"), grid=GridSpec(None, 0.1)))
    assert rec.ok
    assert [f.key for f in rec.flags] == flags_for("delta0_sweep")
    assert {f.key: f.passed for f in rec.flags}["initial_total_variation"]


@pytest.mark.slow
def test_amplitude_sweep_reports_threshold():
    rec = run_scenario(default_scenario("amplitude_sweep"))
    assert rec.ok
    rows = rec.tables["amplitude_sweep"]
    assert [r["amplitude"] for r in rows] == sorted(r["amplitude"] for r in rows)
    flags = {f.key: f for f in rec.flags}
    assert flags["amplitude_monotonicity"].passed
    assert flags["largest_stable_amplitude"].measured == rec.values["largest_stable_amplitude"]
    assert rows[0]["amplitude"] == 0.0 and rows[0]["passed"]
