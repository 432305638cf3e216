"""Provenance labels for unique crashes."""

from __future__ import annotations

from typing import Iterator, Mapping, Set

from ..fuzzer.engine import SAMPLE, SOLVE, Seed

RB = "RB"
RB_ANCESTOR = "RB-ancestor"
SAMPLING = "Sampling"
SAMPLING_ANCESTOR = "Sampling-ancestor"
LABELS = (RB, RB_ANCESTOR, SAMPLING, SAMPLING_ANCESTOR)


class MissingLineage(KeyError):
    pass


def _is_rb(seed: Seed) -> bool:
    return seed.origin == SOLVE and seed.retrieved


def ancestors(seed: Seed, lineage: Mapping[int, Seed]) -> Iterator[Seed]:
    seen = {seed.id}
    cur = seed
    while cur.parent is not None:
        parent = lineage.get(cur.parent)
        if parent is None:
            raise MissingLineage(f"seed {cur.id} names unknown parent {cur.parent}")
        if parent.id in seen:
            raise MissingLineage(f"lineage cycle at seed {parent.id}")
        seen.add(parent.id)
        yield parent
        cur = parent


def label_crash(trigger: Seed, lineage: Mapping[int, Seed]) -> Set[str]:
    """Labels of a crash given the seed that triggered it and the full lineage."""
    labels: Set[str] = set()
    if _is_rb(trigger):
        labels.add(RB)
    if trigger.origin == SAMPLE:
        labels.add(SAMPLING)
    for anc in ancestors(trigger, lineage):
        if _is_rb(anc):
            labels.add(RB_ANCESTOR)
        if anc.origin == SAMPLE:
            labels.add(SAMPLING_ANCESTOR)
    return labels
