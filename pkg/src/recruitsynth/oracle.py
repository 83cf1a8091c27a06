"""Brute-force reference for the ranking metrics, by literal set enumeration.

Deliberately slow and loop-based; it shares no code with :mod:`ranking` so
the two can check each other.
"""

from __future__ import annotations

import math


def _ranks_from_scores(scores):
    return [1 + sum(1 for other in scores if other > s) for s in scores]


def _discounted_sum(rank_of, protected_set, n, thresholds):
    share = len(protected_set) / n
    total = 0.0
    for i in thresholds:
        top = {c for c in range(n) if rank_of[c] <= i}
        total += abs(len(top & protected_set) / len(top) - share) / math.log2(i)
    return total


def oracle_metrics(pool, k, thresholds):
    """Return ``(DP, rND)`` for ``pool`` computed from first principles.

    Ranks are recomputed from the scores when the pool carries them.
    """
    n = len(pool.ranks)
    if pool.scores is not None:
        ranks = _ranks_from_scores([float(s) for s in pool.scores])
    else:
        ranks = [int(r) for r in pool.ranks]
    everyone = set(range(n))
    prot = {c for c in everyone if bool(pool.protected[c])}
    unprot = everyone - prot

    top_k = {c for c in everyone if ranks[c] <= k}
    if prot and unprot:
        dp = 1 - (len(top_k & prot) / len(prot) - len(top_k & unprot) / len(unprot))
    else:
        dp = math.nan

    thresholds = [int(t) for t in thresholds]
    first_order = sorted(prot) + sorted(unprot)
    last_order = sorted(unprot) + sorted(prot)
    rank_first = {c: pos + 1 for pos, c in enumerate(first_order)}
    rank_last = {c: pos + 1 for pos, c in enumerate(last_order)}
    z = max(
        _discounted_sum(rank_first, prot, n, thresholds),
        _discounted_sum(rank_last, prot, n, thresholds),
    )
    rnd = 0.0 if z == 0 else _discounted_sum(dict(enumerate(ranks)), prot, n, thresholds) / z
    return dp, rnd
