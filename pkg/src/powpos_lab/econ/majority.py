"""Closed-form majority-vote analytics for n-of-m ticket voting."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.stats import binom

# Search interval for the inverse; the ratio spans ~1e26 at the ends
_F_LO = 1e-9
_F_HI = 1.0 - 1e-9
MC_CHUNK = 1_000_000


def _check_quorum(m: int, n: int) -> None:
    if m < 1 or not 1 <= n <= m:
        raise ValueError(f"require 1 <= n <= m, got m={m} n={n}")


def vote_majority_prob(f: float, m: int = 5, n: int = 3) -> float:
    """P[at least n of m independently selected voters are controlled], each with probability f."""
    _check_quorum(m, n)
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"stake fraction must lie in [0, 1], got {f}")
    return float(binom.sf(n - 1, m, f))


def required_hash_ratio(f_s: float, m: int = 5, n: int = 3) -> float:
    """Attacker hashpower, as a multiple of honest hashpower, needed to match
    honest block production when the attacker holds stake fraction `f_s`."""
    if not 0.0 < f_s < 1.0:
        raise ValueError(f"stake fraction must lie in (0, 1), got {f_s}")
    return vote_majority_prob(1.0 - f_s, m, n) / vote_majority_prob(f_s, m, n)


def stake_for_hash_share(p: float, m: int = 5, n: int = 3, tol: float = 1e-12) -> float:
    """Stake fraction at which an attacker with share `p` of all hashpower keeps pace."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"hash share must lie in (0, 1), got {p}")
    target = math.log(p / (1.0 - p))

    def gap(f: float) -> float:
        return math.log(required_hash_ratio(f, m, n)) - target

    return float(brentq(gap, _F_LO, _F_HI, xtol=tol, maxiter=500))


def monte_carlo_majority(
    f_s: float, m: int = 5, n: int = 3, trials: int = 1_000_000, seed: int = 0
) -> float:
    """Empirical frequency of >= n attacker-controlled votes among m drawn voters."""
    _check_quorum(m, n)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0.0 <= f_s <= 1.0:
        raise ValueError(f"stake fraction must lie in [0, 1], got {f_s}")
    chunks = -(-trials // MC_CHUNK)
    hits = 0
    remaining = trials
    for child in np.random.SeedSequence(seed).spawn(chunks):
        size = min(MC_CHUNK, remaining)
        counts = np.random.default_rng(child).binomial(m, f_s, size=size)
        hits += int(np.count_nonzero(counts >= n))
        remaining -= size
    return hits / trials
