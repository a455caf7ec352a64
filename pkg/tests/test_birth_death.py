import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from qtl import (
    Policy,
    check_admissible,
    constant_policy,
    discrete_function,
    evaluate,
    exact_metrics,
    feasibility,
    is_admissible,
    is_stable,
    metrics,
    pi_at,
    policy_from_json,
    policy_from_pieces,
    policy_to_json,
    power_function,
    qlength_upper_bound,
    recurrent_window,
    stationary,
)

CSQ = power_function(2.0)
IDENT = power_function(1.0, role="utility")


def two_level():
    # lam 0.4 everywhere; mu 0.5 on {1,2}, 1.0 from 3 on
    return policy_from_pieces([], 0.4, [(1, 2, 0.5)], 1.0)


def random_policy(rng, transient=False, finite=False):
    """Admissible, stable policy with random level structure."""
    h = int(rng.integers(2, 30))
    mu_levels = np.sort(rng.uniform(0.1, 1.0, size=3))
    lam_levels = np.sort(rng.uniform(0.05, 0.95, size=2))[::-1]
    cut1, cut2 = sorted(rng.integers(1, h + 1, size=2))
    mu = [0.0]
    for q in range(1, h + 1):
        mu.append(mu_levels[0] if q <= cut1 else mu_levels[1])
    lam = [lam_levels[0] if q <= cut2 else lam_levels[1] for q in range(h + 1)]
    mu_tail = float(mu_levels[2])
    lam_tail = float(min(lam_levels[1], mu_tail * 0.8))
    lam = [max(x, lam_tail) for x in lam]
    if transient:
        dead = int(rng.integers(1, 4))
        for q in range(1, min(dead + 1, h)):
            mu[q] = 0.0
    if finite:
        stop = int(rng.integers(max(2, h - 3), h + 1))
        lam = [x if q < stop else 0.0 for q, x in enumerate(lam)]
        lam_tail = 0.0
    return Policy(lam, mu, lam_tail, mu_tail)


def test_constant_policy_shape():
    p = constant_policy(0.4, 1.0)
    assert p.horizon == 0
    assert p.arrival(0) == 0.4 and p.arrival(7) == 0.4
    assert p.service(0) == 0.0 and p.service(1) == 1.0


def test_policy_validation():
    with pytest.raises(ValueError):
        Policy([0.4], [0.5], 0.4, 1.0)  # mu(0) nonzero
    with pytest.raises(ValueError):
        Policy([0.4, 0.4], [0.0], 0.4, 1.0)  # horizon mismatch
    with pytest.raises(ValueError):
        Policy([-0.1], [0.0], 0.4, 1.0)
    with pytest.raises(ValueError):
        policy_from_pieces([(0, 2, 0.4), (2, 3, 0.3)], 0.0, [], 1.0)  # overlap
    with pytest.raises(ValueError):
        policy_from_pieces([(3, 2, 0.4)], 0.0, [], 1.0)  # bad range


def test_admissibility_flags():
    assert is_admissible(constant_policy(0.4, 1.0))
    assert is_admissible(two_level())
    bumpy = Policy([0.4, 0.4, 0.4], [0.0, 0.8, 0.5], 0.4, 1.0)
    assert not is_admissible(bumpy)
    with pytest.raises(ValueError):
        check_admissible(bumpy)


def test_policy_json_round_trip():
    p = two_level()
    q = policy_from_json(policy_to_json(p))
    assert q == p
    rng = np.random.default_rng(7)
    for k in range(10):
        p = random_policy(rng, transient=k % 2 == 0, finite=k % 3 == 0)
        assert policy_from_json(policy_to_json(p)) == p


def test_recurrent_window_cases():
    assert recurrent_window(constant_policy(0.4, 1.0)) == (0, math.inf)
    p = policy_from_pieces([], 0.4, [(1, 2, 0.0)], 1.0)
    assert recurrent_window(p) == (2, math.inf)
    p = policy_from_pieces([(0, 9, 0.4)], 0.0, [], 1.0)
    assert recurrent_window(p) == (0, 10)


def test_stability():
    assert is_stable(constant_policy(0.4, 1.0))
    assert not is_stable(constant_policy(0.5, 0.5))
    # finite window is always stable
    assert is_stable(policy_from_pieces([(0, 4, 0.9)], 0.0, [], 0.2))


def test_stationary_geometric():
    sr = stationary(constant_policy(0.4, 1.0))
    for q in range(50):
        assert abs(pi_at(sr, q) - 0.6 * 0.4 ** q) < 1e-12
    assert sr.tail_mass < 1e-12


def test_stationary_two_level_hand_values():
    s = oracles.exact_chain_stats(
        [Fraction(2, 5)] * 3, [0, Fraction(1, 2), Fraction(1, 2)],
        Fraction(2, 5), Fraction(1))
    sr = stationary(two_level())
    assert abs(pi_at(sr, 0) - float(s["pi"][0])) < 1e-10
    assert abs(float(s["pi"][0]) - 0.3488372093) < 1e-9
    pi3 = float(s["pi"][2]) * 0.4  # one detailed-balance step past q=2
    assert abs(pi_at(sr, 3) - 0.0893023256) < 1e-9
    assert abs(pi_at(sr, 3) - pi3) < 1e-12


def test_stationary_errors():
    with pytest.raises(ValueError):
        stationary(constant_policy(0.5, 0.5))
    with pytest.raises(ValueError):
        stationary(constant_policy(0.4, 1.0), tail_tol=0.0)
    with pytest.raises(ValueError):
        stationary(constant_policy(0.4, 1.0), tail_tol=1e-3)


def test_stationary_cap_reported():
    # ratio so close to 1 the truncation cap is hit
    p = constant_policy(0.499999999, 0.5)
    with pytest.raises(ValueError) as err:
        stationary(p, max_states=10_000)
    assert "cap" in str(err.value)


def test_mm1_metrics_closed_forms():
    m = exact_metrics(constant_policy(0.4, 1.0), CSQ, IDENT)
    assert abs(m.qbar - 2.0 / 3.0) < 1e-10
    assert abs(m.cbar - 0.4) < 1e-10
    assert abs(m.ubar - 0.4) < 1e-10
    assert abs(m.dbar - 5.0 / 3.0) < 1e-10


def test_two_level_metrics_hand_values():
    m = exact_metrics(two_level(), CSQ)
    assert abs(m.qbar - float(Fraction(164, 129))) < 1e-10
    assert abs(m.cbar - float(Fraction(59, 215))) < 1e-10


def test_transient_offset():
    # dead states 1..3 shift the recurrent window up by three
    p = policy_from_pieces([], 0.4, [(1, 3, 0.0)], 1.0)
    m = exact_metrics(p, CSQ)
    base = exact_metrics(constant_policy(0.4, 1.0), CSQ)
    assert abs(m.qbar - (3.0 + base.qbar)) < 1e-10
    assert abs(m.cbar - base.cbar) < 1e-10


def test_degenerate_single_state():
    # arrivals stop at q>=1: recurrent window is {0, 1}
    p = policy_from_pieces([(1, 1, 0.0)], 0.4, [], 1.0)
    sr = stationary(p)
    z = 1.0 + 0.4
    assert abs(pi_at(sr, 0) - 1.0 / z) < 1e-12
    assert abs(pi_at(sr, 1) - 0.4 / z) < 1e-12
    m = exact_metrics(p, CSQ)
    assert abs(m.qbar - 0.4 / z) < 1e-12


def test_metrics_rate_domain_error():
    narrow = power_function(2.0, domain=(0.0, 0.5))
    with pytest.raises(ValueError):
        exact_metrics(constant_policy(0.4, 1.0), narrow)


@pytest.mark.parametrize("seed", range(10))
def test_dense_solve_agreement(seed):
    rng = np.random.default_rng(100 + seed)
    p = random_policy(rng, transient=seed % 3 == 0, finite=seed % 4 == 0)
    sr = stationary(p)
    n = 450 if math.isinf(recurrent_window(p)[1]) else p.horizon + 1
    dense = oracles.dense_stationary(p.arrival, p.service, n)
    for q in range(min(n, 200)):
        assert abs(pi_at(sr, q) - dense[q]) < 1e-10


@pytest.mark.parametrize("seed", range(8))
def test_stationary_invariants(seed):
    rng = np.random.default_rng(40 + seed)
    p = random_policy(rng, transient=seed % 2 == 0, finite=seed % 3 == 0)
    sr = stationary(p)
    lo, hi = sr.window
    assert sum(sr.pi) + sr.tail_mass == pytest.approx(1.0, abs=1e-12)
    # detailed balance on the stored window
    for q in range(lo, sr.q_max):
        lhs = pi_at(sr, q) * p.arrival(q)
        rhs = pi_at(sr, q + 1) * p.service(q + 1)
        if pi_at(sr, q) > 0:
            assert abs(lhs - rhs) / max(pi_at(sr, q), 1e-300) < 1e-10
    # log-concavity: successive ratios non-increasing for admissible policies
    if is_admissible(p):
        prev = math.inf
        for q in range(lo, sr.q_max):
            if pi_at(sr, q) > 1e-250:
                ratio = pi_at(sr, q + 1) / pi_at(sr, q)
                assert ratio <= prev + 1e-12
                prev = ratio


@pytest.mark.parametrize("seed", range(8))
def test_metrics_invariants(seed):
    rng = np.random.default_rng(70 + seed)
    p = random_policy(rng, finite=seed % 3 == 0)
    m = exact_metrics(p, CSQ, IDENT)
    assert abs(m.mean_arrival - m.mean_service) < 1e-8
    assert m.dbar * m.mean_arrival == pytest.approx(m.qbar, rel=1e-12)
    # Jensen both ways
    assert m.cbar >= evaluate(CSQ, m.mean_service) - 1e-10
    assert m.ubar <= evaluate(IDENT, m.mean_arrival) + 1e-10


def test_feasibility_verdicts():
    assert feasibility(CSQ, IDENT, 0.15, 0.4) == "infeasible"
    assert feasibility(CSQ, IDENT, 0.16, 0.4) == "boundary"
    assert feasibility(CSQ, IDENT, 0.2, 0.4) == "feasible"


def test_qlength_upper_bound_mm1():
    p = constant_policy(0.4, 1.0)
    b = qlength_upper_bound(p)
    assert abs(b - float(Fraction(17, 6))) < 1e-12
    assert b >= exact_metrics(p, CSQ).qbar


def test_qlength_upper_bound_two_level():
    p = two_level()
    b = qlength_upper_bound(p)
    assert b >= exact_metrics(p, CSQ).qbar
    assert b < math.inf


def test_qlength_upper_bound_error():
    with pytest.raises(ValueError):
        qlength_upper_bound(constant_policy(0.5, 0.5))


@given(seed=st.integers(0, 10 ** 6))
def test_upper_bound_dominates(seed):
    rng = np.random.default_rng(seed)
    p = random_policy(rng)
    assert qlength_upper_bound(p) >= exact_metrics(p, CSQ).qbar - 1e-9
