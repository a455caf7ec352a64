"""Average-cost MDP solver for the queue/cost/utility tradeoff.

The constrained problem (minimize mean queue length subject to a service
cost budget and a utility floor) is relaxed to an unconstrained one with
stage cost

    (q + beta1 c(mu) - beta2 u(lam)) / r_u

on the chain uniformized at rate r_u: from state q the next state is q+1
with probability lam(q)/r_u, q-1 with probability mu(q)/r_u, q otherwise.
The state space is truncated at state_cap with arrivals disabled there,
which keeps the birth-death structure.  Policy iteration with
relative-value evaluation solves it; sweeping (beta1, beta2) traces the
tradeoff curve.

Policy evaluation solves the (N+2)-unknown linear system

    (lam_q + mu_q)/r_u h(q) - lam_q/r_u h(q+1) - mu_q/r_u h(q-1) + g = cost(q)
    h(0) = 0

directly (sparse LU).  A singular system means the chain under the
evaluated policy has more than one recurrent class; that is reported, not
papered over.

Improvement tie-breaking: smallest service rate, largest arrival rate
among the minimizers.  Deterministic by construction.
"""

import math
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import spsolve

from .birth_death import Policy, exact_metrics, is_admissible

MAX_ITERATIONS = 500

SolveResult = namedtuple(
    "SolveResult",
    ["policy", "gain", "bias", "iterations", "converged", "monotone",
     "gain_history"])

TradeoffPoint = namedtuple(
    "TradeoffPoint",
    ["beta1", "beta2", "c_c", "u_c", "q_star", "policy", "dominated"])

TraceFailure = namedtuple("TraceFailure", ["beta1", "beta2", "error"])


class LagrangianProblem:
    """Relaxed control problem: multipliers, action sets, stage-cost pieces.

    service_actions / arrival_actions are finite rate sets (ascending
    order enforced here).  r_u defaults to max arrival + max service,
    the smallest valid uniformization rate.  utility_fn may be None when
    beta2 == 0.
    """

    def __init__(self, beta1, beta2, service_actions, arrival_actions,
                 cost_fn, utility_fn=None, state_cap=500, r_u=None):
        if beta1 < 0 or beta2 < 0:
            raise ValueError("multipliers must be non-negative")
        service_actions = sorted(float(a) for a in service_actions)
        arrival_actions = sorted(float(a) for a in arrival_actions)
        if not service_actions or not arrival_actions:
            raise ValueError("action sets must be non-empty")
        if service_actions[0] < 0 or arrival_actions[0] < 0:
            raise ValueError("rates must be non-negative")
        if state_cap < 10:
            raise ValueError("state_cap must be at least 10")
        r_min = service_actions[-1] + arrival_actions[-1]
        if r_u is None:
            r_u = r_min
        if r_u < r_min - 1e-12:
            raise ValueError(
                "r_u=%g below max arrival + max service = %g" % (r_u, r_min))
        if beta2 > 0 and utility_fn is None:
            raise ValueError("beta2 > 0 needs a utility function")
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.service_actions = service_actions
        self.arrival_actions = arrival_actions
        self.cost_fn = cost_fn
        self.utility_fn = utility_fn
        self.state_cap = int(state_cap)
        self.r_u = float(r_u)

    def with_multipliers(self, beta1, beta2):
        return LagrangianProblem(
            beta1, beta2, self.service_actions, self.arrival_actions,
            self.cost_fn, self.utility_fn, self.state_cap, self.r_u)


def uniform_actions(r_max, n=201):
    """Uniform discretization of the continuous action set [0, r_max]."""
    if n < 2 or r_max <= 0:
        raise ValueError("need n >= 2 and r_max > 0")
    return [r_max * i / (n - 1) for i in range(n)]


def _value_table(fn, actions):
    # rate 0 contributes 0 by definition; skips domain trouble when the
    # function's domain starts above 0
    from .rate_functions import evaluate
    out = np.empty(len(actions))
    for i, a in enumerate(actions):
        out[i] = 0.0 if (a == 0.0 or fn is None) else evaluate(fn, a)
    return out


def _evaluate_policy(lam, mu, stage, r_u):
    n = lam.shape[0]          # states 0..n-1
    rows, cols, vals = [], [], []
    for q in range(n):
        rows.append(q)
        cols.append(q)
        vals.append((lam[q] + mu[q]) / r_u)
        if lam[q] > 0.0:
            rows.append(q)
            cols.append(q + 1)
            vals.append(-lam[q] / r_u)
        if mu[q] > 0.0:
            rows.append(q)
            cols.append(q - 1)
            vals.append(-mu[q] / r_u)
        rows.append(q)
        cols.append(n)
        vals.append(1.0)
    rows.append(n)
    cols.append(0)
    vals.append(1.0)
    a = csr_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))
    b = np.append(stage, 0.0)
    x = spsolve(a.tocsc(), b)
    if not np.all(np.isfinite(x)):
        raise ValueError(
            "policy evaluation is singular: the chain under this policy "
            "has more than one recurrent class")
    return x[:n], x[n]


def solve(lp, tol=1e-9):
    """Policy iteration for the relaxed problem.  Returns a SolveResult.

    Stops when the improvement step leaves the policy unchanged or the
    span of the Bellman residual drops below tol; raises after
    MAX_ITERATIONS.  The returned Policy lives on states 0..state_cap
    with arrivals off at the cap, so its stationary window is finite and
    exact re-evaluation is cheap.
    """
    n = lp.state_cap + 1      # states 0..state_cap
    srv = np.asarray(lp.service_actions)
    arr = np.asarray(lp.arrival_actions)
    c_vals = _value_table(lp.cost_fn, lp.service_actions)
    u_vals = _value_table(lp.utility_fn, lp.arrival_actions)
    srv_cost = lp.beta1 * c_vals          # beta1 c(mu), per action
    arr_cost = -lp.beta2 * u_vals         # -beta2 u(lam), per action
    # with arrivals already off at the cap, zero service there would absorb
    # the chain at its most expensive state -- a truncation artifact the
    # unbounded problem has no counterpart for; the cap state is therefore
    # restricted to positive service rates
    cap_ok = srv > 0.0
    if not np.any(cap_ok):
        raise ValueError("service actions must include a positive rate")

    mu = np.full(n, srv[-1])
    mu[0] = 0.0
    lam = np.full(n, arr[-1])
    lam[-1] = 0.0
    mu_cost = np.full(n, srv_cost[-1])
    mu_cost[0] = 0.0
    lam_cost = np.full(n, arr_cost[-1])
    lam_cost[-1] = 0.0

    states = np.arange(n)
    gain_history = []
    converged = False
    iterations = 0
    h = None
    g = math.inf
    while iterations < MAX_ITERATIONS:
        iterations += 1
        stage = (states + mu_cost + lam_cost) / lp.r_u
        h, g = _evaluate_policy(lam, mu, stage, lp.r_u)
        gain_history.append(g)
        d = np.diff(h)        # d[q] = h(q+1) - h(q), q = 0..n-2

        # service improvement at q >= 1: minimize beta1 c(a) - a d(q-1)
        srv_vals = srv_cost[None, :] - np.outer(d, srv)
        srv_pick = np.argmin(srv_vals, axis=1)          # ties -> smallest
        new_mu = np.concatenate(([0.0], srv[srv_pick]))
        new_mu_cost = np.concatenate(([0.0], srv_cost[srv_pick]))
        srv_min = np.concatenate(([0.0], np.min(srv_vals, axis=1)))
        cap_vals = srv_cost[cap_ok] - d[-1] * srv[cap_ok]
        cap_pick = int(np.argmin(cap_vals))
        new_mu[-1] = srv[cap_ok][cap_pick]
        new_mu_cost[-1] = srv_cost[cap_ok][cap_pick]
        srv_min[-1] = float(np.min(cap_vals))

        # arrival improvement at q <= n-2: minimize -beta2 u(a) + a d(q)
        arr_vals = arr_cost[None, :] + np.outer(d, arr)
        flipped = np.argmax(arr_vals[:, ::-1] == np.min(
            arr_vals, axis=1, keepdims=True), axis=1)
        arr_pick = arr.shape[0] - 1 - flipped           # ties -> largest
        new_lam = np.concatenate((arr[arr_pick], [0.0]))
        new_lam_cost = np.concatenate((arr_cost[arr_pick], [0.0]))
        arr_min = np.concatenate((np.min(arr_vals, axis=1), [0.0]))

        residual = (states + srv_min + arr_min) / lp.r_u - g
        span = float(np.max(residual) - np.min(residual))
        unchanged = np.array_equal(new_mu, mu) and np.array_equal(new_lam, lam)
        if unchanged or span < tol:
            converged = True
            if not unchanged:
                mu, lam = new_mu, new_lam
                mu_cost, lam_cost = new_mu_cost, new_lam_cost
                stage = (states + mu_cost + lam_cost) / lp.r_u
                h, g = _evaluate_policy(lam, mu, stage, lp.r_u)
                gain_history.append(g)
            break
        mu, lam = new_mu, new_lam
        mu_cost, lam_cost = new_mu_cost, new_lam_cost
    if not converged:
        raise ValueError(
            "policy iteration did not converge in %d iterations" % MAX_ITERATIONS)

    policy = Policy(
        list(lam), list(mu), 0.0, float(mu[-1]),
        ra_max=float(arr[-1]), r_max=float(srv[-1]),
        meta={"source": "policy-iteration", "beta1": lp.beta1,
              "beta2": lp.beta2, "state_cap": lp.state_cap})
    return SolveResult(
        policy=policy, gain=float(g), bias=h, iterations=iterations,
        converged=converged, monotone=is_admissible(policy),
        gain_history=gain_history)


def _mark_dominated(points):
    out = []
    for i, p in enumerate(points):
        dom = False
        for j, o in enumerate(points):
            if j == i:
                continue
            if (o.c_c <= p.c_c and o.u_c >= p.u_c and o.q_star <= p.q_star
                    and (o.c_c < p.c_c or o.u_c > p.u_c or o.q_star < p.q_star)):
                dom = True
                break
        out.append(p._replace(dominated=dom))
    return out


def trace_tradeoff(base, beta1_grid, beta2_grid, tol=1e-9, workers=1):
    """Sweep the multiplier grid (Cartesian product) and collect the curve.

    Each grid point is solved independently; its policy is re-evaluated
    exactly through the stationary distribution (the DP's internal gain is
    not trusted for reporting).  Returns (points, failures): points sorted
    by achieved cost with dominated ones flagged, failures as
    (beta1, beta2, error) records for grid points whose solve raised.
    """
    b1 = [float(b) for b in beta1_grid]
    b2 = [float(b) for b in beta2_grid]
    if not b1 or not b2:
        raise ValueError("multiplier grids must be non-empty")
    if min(b1) < 0 or min(b2) < 0:
        raise ValueError("multipliers must be non-negative")
    pairs = [(x, y) for x in b1 for y in b2]

    def run(pair):
        beta1, beta2 = pair
        res = solve(base.with_multipliers(beta1, beta2), tol)
        m = exact_metrics(res.policy, base.cost_fn, base.utility_fn)
        return TradeoffPoint(
            beta1=beta1, beta2=beta2, c_c=m.cbar, u_c=m.ubar,
            q_star=m.qbar, policy=res.policy, dominated=False)

    results = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run, pair) for pair in pairs]
            for pair, fut in zip(pairs, futures):
                try:
                    results.append(fut.result())
                except ValueError as exc:
                    results.append(TraceFailure(pair[0], pair[1], str(exc)))
    else:
        for pair in pairs:
            try:
                results.append(run(pair))
            except ValueError as exc:
                results.append(TraceFailure(pair[0], pair[1], str(exc)))

    points = [r for r in results if isinstance(r, TradeoffPoint)]
    failures = [r for r in results if isinstance(r, TraceFailure)]
    points.sort(key=lambda p: p.c_c)
    return _mark_dominated(points), failures
