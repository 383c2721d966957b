import math

import pytest
from hypothesis import given, strategies as st

from dualbatch.errors import OutOfHorizon, SingularDenominator, WrongInitialArc
from dualbatch.model import GammaParams, PlantConfig, ProcessState, rhs
from dualbatch.policy import (FeedbackRule, Policy, batch_time, policy_input, simulate_follow,
                              singular_control, singular_control_numeric, solve_nominal,
                              switching_value, terminal_impulse)
from strategies import gammas

import oracles

G = GammaParams(3.0, 1000.0, 0.1)
CFG = PlantConfig()

T1 = 2.67764908469098       # scipy quad
T2 = 9.2860491721276        # RK4, h = 1e-4
C1_T1 = 225.10185269917
C1_T2, C2_T2, _ = oracles.singular_arc_closed_form(G.as_tuple(), C1_T1)


@pytest.fixture(scope="module")
def sol():
    return solve_nominal(G, CFG)


def test_switching_times_match_oracles(sol):
    assert sol.policy.t1 == pytest.approx(T1, abs=1e-8)
    assert sol.policy.t2 == pytest.approx(T2, abs=1e-8)
    assert sol.policy.tf == sol.policy.t2
    assert sol.state_t1.c1 == pytest.approx(C1_T1, rel=1e-9)
    assert sol.state_t1.c2 == pytest.approx(50.0, rel=1e-12)


def test_singular_arc_matches_closed_form(sol):
    assert sol.state_t2.c1 == pytest.approx(C1_T2, rel=1e-9)
    assert sol.state_t2.c2 == pytest.approx(C2_T2, rel=1e-9)
    assert sol.dilution_factor == pytest.approx(C1_T2 / 150.0, rel=1e-9)
    assert (sol.final_state.c1, sol.final_state.c2) == pytest.approx((150.0, 0.05), rel=1e-9)


def test_rk4_oracle_agrees_with_quad():
    t1, t2, y1, y2 = oracles.rk4_policy(G.as_tuple())
    q1, c1 = oracles.t1_quadrature(G.as_tuple())
    assert t1 == pytest.approx(q1, abs=1e-9)
    assert y1[0] == pytest.approx(c1, rel=1e-9)
    assert y2[0] == pytest.approx(C1_T2, rel=1e-8)


def test_singular_level(sol):
    assert singular_control(G) == pytest.approx(0.909090909, abs=1e-9)
    assert sol.policy.u_s == singular_control(G)


def test_switching_function_constant_on_singular_arc(sol):
    _, _, traj = simulate_follow(G, sol.policy, CFG)
    later = [s for s in traj.states() if s.t > sol.policy.t1 + 1e-6]
    assert later
    assert max(abs(switching_value(s, G)) for s in later) < 1e-7


@given(gammas, st.floats(60, 400), st.floats(0.1, 40))
def test_numeric_singular_input_matches_closed_form(g, c1, c2):
    x = ProcessState(c1, c2)
    assert singular_control_numeric(switching_value, x, g, CFG) == pytest.approx(
        singular_control(g), rel=1e-6)


def test_numeric_singular_input_degenerate():
    with pytest.raises(SingularDenominator):
        singular_control_numeric(lambda s, p: 1.0, ProcessState(60, 10), G, CFG)


def test_policy_input_semantics(sol):
    pi = sol.policy
    assert policy_input(0.0, pi) == 0.0
    assert policy_input(pi.t1 - 1e-9, pi) == 0.0
    assert policy_input(pi.t1, pi) == pi.u_s
    assert policy_input(pi.tf, pi) == pi.u_s
    assert terminal_impulse(pi).t == pi.tf
    with pytest.raises(OutOfHorizon):
        policy_input(pi.tf + 1.0, pi)


def test_policy_json_roundtrip(sol):
    assert Policy.from_json(sol.policy.to_json()) == sol.policy


def test_wrong_initial_arc():
    x = ProcessState(400.0, 10.0)
    with pytest.raises(WrongInitialArc):
        solve_nominal(G, CFG, x)
    relaxed = solve_nominal(G, CFG, x, strict=False)
    assert relaxed.policy.t1 == 0.0


def test_feedback_rule_input():
    rule = FeedbackRule.for_params(G)
    assert rule.input_at(CFG.initial_state()) == 0.0
    assert rule.input_at(ProcessState(C1_T1 + 1.0, 50.0)) == rule.u_s


@given(gammas)
def test_terminal_targets_met_under_mismatch(g):
    # the ratio event is parameter free, so any model mismatch still ends on target
    rule = FeedbackRule.for_params(CFG.prior_mid)
    x2, xf, _ = simulate_follow(g, rule, CFG)
    assert x2.c1 / x2.c2 == pytest.approx(3000.0, rel=1e-9)
    assert (xf.c1, xf.c2) == pytest.approx((150.0, 0.05), rel=1e-9)


@given(gammas)
def test_optimal_beats_mismatched_rule(g):
    own = solve_nominal(g, CFG).policy.tf
    other = batch_time(g, FeedbackRule.for_params(CFG.prior_mid), CFG)
    assert own <= other + 1e-8


def test_flux_positive_along_optimal_path(sol):
    _, _, traj = simulate_follow(G, sol.policy, CFG)
    assert min(traj.qp) > 0
    d1, _ = rhs(sol.state_t1, sol.policy.u_s, G, CFG)
    # on the singular arc c1 still rises
    assert d1 > 0
    assert math.isfinite(sol.policy.tf)
