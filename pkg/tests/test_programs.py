import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import u_dem, u_gen, u_hi, u_lo
from oracles import birth_death_iid, brute_force_p
from fairshare.cmdp import build_instance
from fairshare.errors import ModeMismatch
from fairshare.netgen import UserModel, build_joint_chain
from fairshare.programs import (OccupationMeasure, build_lp_f, build_lp_p, occupation_marginals,
                                solve_f, solve_p)


def test_lp_p_shape(gen_chain):
    inst = build_instance(gen_chain, 2)
    lp = build_lp_p(inst, 0.0)
    assert inst.n_states == 6
    assert lp.n_vars == inst.n_pairs
    assert lp.A_ge.shape[0] == 1
    unc = build_lp_p(inst, math.inf)
    assert unc.A_ge is None or unc.A_ge.shape[0] == 0
    assert unc.A_eq.shape == lp.A_eq.shape


def test_lp_modes(hi_lo):
    with pytest.raises(ModeMismatch):
        build_lp_f(build_instance(hi_lo, 2, "full"))
    with pytest.raises(ModeMismatch):
        build_lp_p(build_instance(hi_lo, 2, "efficient"))


def test_single_user_p_matches_oracle(gen_chain):
    _, llr = birth_death_iid(0.6, 2)
    rep = solve_p(build_instance(gen_chain, 2), 0.0)
    assert rep.objective == pytest.approx(llr, abs=1e-6)
    assert rep.contributions[0] >= -1e-9
    assert rep.problem == "P"


def test_single_user_f_is_zero():
    rep = solve_f(build_instance(build_joint_chain([u_gen()]), 4, "efficient"))
    assert rep.objective == pytest.approx(0.0, abs=1e-9)


def test_theorem1_floor(hi_dem):
    for b in (2, 5):
        assert solve_p(build_instance(hi_dem, b), 0.0).objective >= 0.2 - 1e-8


@pytest.mark.parametrize("b", [2, 4, 6])
def test_parity_value(hi_lo, b):
    rep = solve_f(build_instance(hi_lo, b, "efficient"))
    assert rep.objective == pytest.approx(-0.44, abs=1e-6)
    odd = rep.battery_marginal[1::2].sum()
    assert odd <= 1e-9


def test_relaxation_order(hi_lo):
    inst = build_instance(hi_lo, 4)
    vals = [solve_p(inst, d).objective for d in (0.0, 0.1, 0.3, math.inf)]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


@settings(max_examples=15)
@given(st.lists(st.tuples(st.floats(0.1, 0.9), st.floats(0.1, 0.9)), min_size=1, max_size=2),
       st.integers(0, 4), st.sampled_from([0.0, 0.1, 0.5]))
def test_p_matches_brute_force(pq, b, delta):
    users = [UserModel.two_state(p, q) for p, q in pq]
    ours = solve_p(build_instance(build_joint_chain(users), b), delta).objective
    ref = brute_force_p([u.transitions for u in users], b, delta)
    assert ours == pytest.approx(ref, abs=1e-8)


def test_marginal_invariants(hi_dem):
    rep = solve_p(build_instance(hi_dem, 3), 0.2)
    assert rep.contributions.sum() == pytest.approx(0.0, abs=1e-8)
    assert rep.battery_marginal.sum() == pytest.approx(1.0, abs=1e-9)
    assert rep.llr_sys == pytest.approx(rep.objective, abs=1e-9)
    assert rep.contributions.min() >= -0.2 - 1e-9
    assert rep.diagnostics["stationarity_residual"] <= 1e-9


def test_zero_action_measure():
    # always idle: the measure is pi(x) at a fixed battery level
    ch = build_joint_chain([u_hi(), u_dem()])
    inst = build_instance(ch, 2)
    mass = np.zeros(inst.n_pairs)
    for xi in range(ch.n_states):
        s = inst.state_index(xi, 1)
        mass[inst.pair_index(s, (0, 0))] = ch.stationary[xi]
    rho = OccupationMeasure(inst, mass)
    assert rho.stationarity_residual() < 1e-12
    m = occupation_marginals(rho)
    assert np.allclose(m.contributions, 0.0)
    assert m.llr == pytest.approx([0.05, 0.6], abs=1e-12)


def test_report_json_fields(hi_lo):
    inst = build_instance(hi_lo, 2)
    d = solve_p(inst, math.inf).to_dict()
    assert set(d) == {"problem", "objective", "delta", "llr_per_user", "contributions",
                      "battery_marginal", "diagnostics"}
    assert d["delta"] == "inf" and d["problem"] == "P_delta"
    f = solve_f(build_instance(hi_lo, 2, "efficient")).to_dict()
    assert f["delta"] is None and f["problem"] == "F"
    json.dumps(d)
    json.dumps(f)


def test_highs_backend_agrees(hi_lo):
    inst = build_instance(hi_lo, 6)
    a = solve_p(inst, 0.0)
    b = solve_p(inst, 0.0, backend="highs")
    assert a.objective == pytest.approx(b.objective, abs=1e-8)


def test_efficient_lp_ignores_unfair_slack():
    # three users with E2 and E3 ties: F must stay <= 0 and contributions must sum to 0
    ch = build_joint_chain([u_gen(), u_lo(), u_dem()])
    rep = solve_f(build_instance(ch, 3, "efficient"))
    assert rep.objective <= 1e-9
    assert rep.contributions.sum() == pytest.approx(0.0, abs=1e-8)
    assert rep.contributions.min() == pytest.approx(rep.objective, abs=1e-8)
