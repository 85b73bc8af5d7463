"""Post-processing that delays whole pair schedules to cut augmentation."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from .checker import assess
from .netmodel import TOL, Instance, UpdateSchedule


@dataclass(frozen=True)
class DelayConfig:
    threshold: int = 3
    objective: str = "mult"

    def __post_init__(self) -> None:
        if self.threshold < 0:
            raise ValueError("delay threshold must be non-negative")
        if self.objective not in ("mult", "add"):
            raise ValueError("objective must be 'mult' or 'add'")


def apply_offsets(schedule: UpdateSchedule, offsets: Mapping[int, int]) -> UpdateSchedule:
    """Set start offsets by pair position; unspecified pairs keep theirs."""
    new = list(schedule.offsets)
    for pos, off in offsets.items():
        if off < 0:
            raise ValueError("offsets must be non-negative")
        new[pos] = off
    return schedule.with_offsets(new)


def delay_optimize(
    instance: Instance, schedule: UpdateSchedule, config: DelayConfig = DelayConfig()
) -> UpdateSchedule:
    """Repeatedly apply the single (pair, delay) move with the best improvement.

    Each pair may be delayed by at most ``config.threshold`` rounds in total.
    The primary score is the decrease of alpha_min ("mult") or beta_min
    ("add"); the other one breaks ties, then lower pair position, then the
    shorter delay. Stops when no move strictly improves the primary score.
    """
    base = schedule.offsets
    current = schedule
    rep = assess(instance, current)
    cur = (rep.alpha_min, rep.beta_min)
    primary = 0 if config.objective == "mult" else 1
    while True:
        best = None
        for pos in range(instance.k):
            if not current.rounds[pos]:
                continue
            used = current.offsets[pos] - base[pos]
            for d in range(1, config.threshold - used + 1):
                cand = apply_offsets(current, {pos: current.offsets[pos] + d})
                r = assess(instance, cand)
                score = (r.alpha_min, r.beta_min)
                gain = cur[primary] - score[primary]
                if gain <= TOL:
                    continue
                key = (-gain, -(cur[1 - primary] - score[1 - primary]), pos, d)
                if best is None or key < best[0]:
                    best = (key, cand, score)
        if best is None:
            return current
        _, current, cur = best
