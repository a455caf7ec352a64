"""Event-driven Monte Carlo simulation of a policy.

Independent statistical oracle for the exact analytics: the queue is run
as a continuous-time chain with exponential holding times at total rate
lambda(q) + mu(q), and Qbar, Cbar, Ubar are time integrals over the
post-warmup window.  Replications use RNG streams spawned from one seed,
so results are reproducible bit for bit and replication order cannot
matter.
"""

import math
from collections import namedtuple

import numpy as np

from .rate_functions import evaluate

SimConfig = namedtuple("SimConfig", ["horizon", "replications", "seed", "warmup_fraction"])
SimConfig.__new__.__defaults__ = (10000.0, 10, 0, 0.1)

SimEstimate = namedtuple(
    "SimEstimate",
    ["qbar", "qbar_halfwidth", "cbar", "cbar_halfwidth",
     "ubar", "ubar_halfwidth", "replications"])


def _replicate(p, cfg, rng, c_of, u_of):
    warmup_end = cfg.warmup_fraction * cfg.horizon
    span = cfg.horizon - warmup_end
    q = 0
    t = 0.0
    acc_q = acc_c = acc_u = 0.0
    while t < cfg.horizon:
        lam = p.arrival(q)
        mu = p.service(q)
        total = lam + mu
        if total <= 0.0:
            raise ValueError("absorbing state q=%d: no arrivals, no service" % q)
        t_next = t + rng.exponential(1.0 / total)
        seg = min(t_next, cfg.horizon) - max(t, warmup_end)
        if seg > 0.0:
            acc_q += q * seg
            acc_c += c_of(mu) * seg
            acc_u += u_of(lam) * seg
        if t_next >= cfg.horizon:
            break
        q = q + 1 if rng.random() < lam / total else q - 1
        t = t_next
    return acc_q / span, acc_c / span, acc_u / span


def simulate(p, cfg, c, u=None):
    """Estimate (Qbar, Cbar, Ubar) with 95% normal CIs across replications.

    The first warmup fraction of each replication's horizon is discarded.
    A single replication yields infinite half-widths (no spread estimate),
    which the structure reports rather than hiding.
    """
    if cfg.horizon <= 0:
        raise ValueError("horizon must be positive")
    if cfg.replications < 1:
        raise ValueError("need at least one replication")
    if not (0.0 <= cfg.warmup_fraction < 1.0):
        raise ValueError("warmup_fraction must be in [0, 1)")

    cache_c = {}
    cache_u = {}

    def c_of(r):
        if r not in cache_c:
            cache_c[r] = 0.0 if r == 0.0 else evaluate(c, r)
        return cache_c[r]

    def u_of(r):
        if r not in cache_u:
            cache_u[r] = 0.0 if (u is None or r == 0.0) else evaluate(u, r)
        return cache_u[r]

    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    reps = np.array([
        _replicate(p, cfg, np.random.default_rng(s), c_of, u_of)
        for s in streams])

    means = reps.mean(axis=0)
    if cfg.replications == 1:
        halves = [math.inf, math.inf, math.inf]
    else:
        sd = reps.std(axis=0, ddof=1)
        halves = 1.96 * sd / math.sqrt(cfg.replications)
    return SimEstimate(
        qbar=float(means[0]), qbar_halfwidth=float(halves[0]),
        cbar=float(means[1]), cbar_halfwidth=float(halves[1]),
        ubar=float(means[2]), ubar_halfwidth=float(halves[2]),
        replications=cfg.replications)
