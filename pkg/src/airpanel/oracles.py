"""Literal reference implementations of the market measures.

These evaluate the defining sums by direct loops over carriers, regionals and
markets, with no shared indexing with the vectorized pipeline code. Each
instance is one period: ``usage`` has columns (market, major, regional,
passengers, share), ``presence`` has (market, major), ``traffic`` has
(market, major, passengers). Meant for small instances and used only by
tests.
"""

from __future__ import annotations

import pandas as pd


def _usage_rows(usage: pd.DataFrame) -> list:
    return list(
        zip(usage["market"], usage["major"], usage["regional"],
            usage["passengers"], usage["share"])
    )


def _links_from_usage(usage: pd.DataFrame) -> set:
    return {(j, k) for _, j, k, _, s in _usage_rows(usage) if s > 0}


def _markets(presence: pd.DataFrame) -> list:
    return sorted(set(presence["market"]))


def _majors_in(presence: pd.DataFrame) -> dict:
    served: dict = {}
    for m, j in zip(presence["market"], presence["major"]):
        served.setdefault(m, set()).add(j)
    return {m: sorted(js) for m, js in served.items()}


def oracle_csc(usage: pd.DataFrame, presence: pd.DataFrame) -> dict:
    """Baseline overlap index per market by the literal triple sum."""
    links = _links_from_usage(usage)
    rows = _usage_rows(usage)
    values: dict = {}
    for market, majors in _majors_in(presence).items():
        share_of = {}
        for m, j, k, _, s in rows:
            if m == market and s > 0:
                share_of[(k, j)] = s
        regionals = sorted({k for k, _ in share_of})
        n = len(majors)
        if n < 2 or not regionals:
            values[market] = 0.0
            continue
        total = 0.0
        for i in majors:
            for j in majors:
                if i == j:
                    continue
                for k in regionals:
                    if (i, k) in links:
                        total += share_of.get((k, j), 0.0)
        values[market] = total / (n * (n - 1) * len(regionals))
    return values


def oracle_csc_count(usage: pd.DataFrame, presence: pd.DataFrame) -> dict:
    """Count-based overlap index per market by pair enumeration."""
    links = _links_from_usage(usage)
    rows = _usage_rows(usage)
    values: dict = {}
    for market, majors in _majors_in(presence).items():
        used_by = {}
        for m, j, k, _, s in rows:
            if m == market and s > 0:
                used_by.setdefault(j, set()).add(k)
        n = len(majors)
        if n < 2:
            values[market] = 0.0
            continue
        overlapping = 0
        for i in majors:
            for j in majors:
                if i == j:
                    continue
                if any((i, k) in links for k in used_by.get(j, ())):
                    overlapping += 1
        values[market] = overlapping / (n * (n - 1))
    return values


def oracle_csc_weighted(
    usage: pd.DataFrame, presence: pd.DataFrame, traffic: pd.DataFrame
) -> dict:
    """Market-share-weighted overlap index."""
    links = _links_from_usage(usage)
    rows = _usage_rows(usage)
    pax = {}
    for m, j, p in zip(traffic["market"], traffic["major"], traffic["passengers"]):
        pax[(m, j)] = pax.get((m, j), 0.0) + float(p)
    values: dict = {}
    for market, majors in _majors_in(presence).items():
        share_rows = [(j, k, s) for m, j, k, _, s in rows if m == market and s > 0]
        n = len(majors)
        if n < 2 or not share_rows:
            values[market] = 0.0
            continue
        total_pax = sum(pax.get((market, j), 0.0) for j in majors)
        acc = 0.0
        for j in majors:
            overlapped = 0.0
            for jj, k, s in share_rows:
                if jj != j:
                    continue
                if any((i, k) in links for i in majors if i != j):
                    overlapped += s
            acc += (pax.get((market, j), 0.0) / total_pax) * overlapped
        values[market] = acc / n
    return values


def oracle_mmc(presence: pd.DataFrame) -> dict:
    """Average pairwise contact per market (divided by 1,000), by loops."""
    served = {m: set(js) for m, js in _majors_in(presence).items()}
    markets = sorted(served)
    carriers = sorted({j for js in served.values() for j in js})
    r = {}
    for i in carriers:
        for j in carriers:
            if i == j:
                continue
            r[(i, j)] = sum(1 for m in markets if i in served[m] and j in served[m])
    values: dict = {}
    for m in markets:
        majors = sorted(served[m])
        n = len(majors)
        if n < 2:
            values[m] = float("nan")
            continue
        total = 0
        count = 0
        for i in majors:
            for j in majors:
                if i == j:
                    continue
                total += r[(i, j)]
                count += 1
        values[m] = total / count / 1000.0
    return values


def oracle_regional_hhi(usage: pd.DataFrame) -> dict:
    """Concentration index per market from per-regional passenger counts."""
    per_market: dict = {}
    for m, _, k, p, s in _usage_rows(usage):
        if p > 0:
            per_market.setdefault(m, {})
            per_market[m][k] = per_market[m].get(k, 0.0) + float(p)
    values: dict = {}
    for m, counts in sorted(per_market.items()):
        total = sum(counts.values())
        values[m] = sum((p / total) ** 2 for p in counts.values())
    return values
