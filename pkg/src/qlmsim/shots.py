"""Post-selection of measured bitstrings against the physical sector.

Hard post-selection keeps only exact sector members.  The soft schemes
additionally accept bitstrings within Hamming distance 1 (flip1) or 2
(flip2) of some member; an accepted-but-invalid string is replaced by
its nearest member so observables can be evaluated, with ties broken by
the smallest packed value (a deterministic, auditable rule).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import ShotTable
from .configspace import SectorBasis

SCHEMES = ("hard", "flip1", "flip2")


@dataclass(frozen=True)
class PostSelectionScheme:
    kind: str
    sector: SectorBasis

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {SCHEMES}")


@dataclass
class PostSelectResult:
    kept: ShotTable
    retention: float
    n_kept: int
    n_total: int


def _nearest_at_one_flip(bits: np.uint64, width: int, sector: SectorBasis) -> int | None:
    cands = bits ^ (np.uint64(1) << np.arange(width, dtype=np.uint64))
    idx = sector.lookup_many(cands)
    hits = cands[idx >= 0]
    return int(hits.min()) if hits.size else None


def _nearest_at_two_flips(bits: np.uint64, width: int, sector: SectorBasis) -> int | None:
    one = np.uint64(1)
    singles = bits ^ (one << np.arange(width, dtype=np.uint64))
    best = None
    # single flip of a single flip, skipping the identity pairs
    for i, s in enumerate(singles):
        cands = s ^ (one << np.arange(i + 1, width, dtype=np.uint64))
        if cands.size == 0:
            continue
        idx = sector.lookup_many(cands)
        hits = cands[idx >= 0]
        if hits.size:
            m = int(hits.min())
            if best is None or m < best:
                best = m
    return best


def post_select(table: ShotTable, scheme: PostSelectionScheme) -> PostSelectResult:
    """Filter (and, for soft schemes, repair) a shot table.

    Returns the kept table and the retention ratio kept/total.
    """
    sector = scheme.sector
    if table.width != sector.width:
        raise ValueError(f"shot width {table.width} does not match sector width {sector.width}")
    kept_configs: list[int] = []
    kept_counts: list[int] = []
    member = sector.lookup_many(table.configs) >= 0
    for bits, count, ok in zip(table.configs, table.counts, member):
        if ok:
            kept_configs.append(int(bits))
            kept_counts.append(int(count))
            continue
        if scheme.kind == "hard":
            continue
        repl = _nearest_at_one_flip(bits, table.width, sector)
        if repl is None and scheme.kind == "flip2":
            repl = _nearest_at_two_flips(bits, table.width, sector)
        if repl is not None:
            kept_configs.append(repl)
            kept_counts.append(int(count))
    if kept_configs:
        configs = np.array(kept_configs, dtype=np.uint64)
        counts = np.array(kept_counts, dtype=np.int64)
        order = np.argsort(configs, kind="stable")
        configs, counts = configs[order], counts[order]
        # merge duplicates created by replacement
        uniq, inverse = np.unique(configs, return_inverse=True)
        merged = np.zeros(uniq.size, dtype=np.int64)
        np.add.at(merged, inverse, counts)
        kept = ShotTable(width=table.width, configs=uniq, counts=merged,
                         meta={**table.meta, "post_selection": scheme.kind})
    else:
        kept = ShotTable(width=table.width, configs=np.empty(0, dtype=np.uint64),
                         counts=np.empty(0, dtype=np.int64),
                         meta={**table.meta, "post_selection": scheme.kind})
    n_total = table.total
    n_kept = kept.total
    return PostSelectResult(kept=kept, retention=n_kept / n_total if n_total else 0.0,
                            n_kept=n_kept, n_total=n_total)


def state_probabilities(kept: ShotTable) -> dict[int, float]:
    """Normalized post-selected frequencies p(config) summing to one."""
    if kept.total == 0:
        raise ValueError("empty post-selected table")
    n = kept.total
    return {int(c): int(k) / n for c, k in zip(kept.configs, kept.counts)}


def expected_success(n1q: int, n2q: int, steps: int, p1q: float, p2q: float) -> float:
    """Probability that no gate error occurred over the whole circuit:
    ((1-p1q)^n1q (1-p2q)^n2q)^steps."""
    if min(n1q, n2q, steps) < 0:
        raise ValueError("gate counts and steps must be nonnegative")
    return float(((1.0 - p1q) ** n1q * (1.0 - p2q) ** n2q) ** steps)
