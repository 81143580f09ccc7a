"""Synthetic access logs with planted session communities.

Each synthetic user produces exactly one session drawing objects from its
group's pool, with a configurable per-request chance of hitting another
group's pool instead.  The planted assignment is the ground truth for
recovery tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import AccessRecord

__all__ = ["PlantedConfig", "generate_planted_log"]

# Requests inside a session are 1 s apart; users start 10_000 s apart, well
# beyond the default 1800 s inactivity threshold.
_REQUEST_GAP = 1
_USER_SPACING = 10_000


@dataclass(frozen=True)
class PlantedConfig:
    groups: int
    sessions_per_group: int
    objects_per_group: int = 100
    accesses_min: int = 10
    accesses_max: int = 30
    cross_group_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("groups", "sessions_per_group", "objects_per_group", "accesses_min"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.accesses_max < self.accesses_min:
            raise ValueError("accesses_max must be >= accesses_min")
        if not (0.0 <= self.cross_group_noise < 0.5):
            raise ValueError(
                f"cross_group_noise must be in [0, 0.5), got {self.cross_group_noise}"
            )
        if self.groups == 1 and self.cross_group_noise > 0.0:
            raise ValueError("cross_group_noise needs at least 2 groups")


def generate_planted_log(config: PlantedConfig) -> tuple[list[AccessRecord], dict[str, int]]:
    """Generate records plus the user -> group ground truth.

    Deterministic for a fixed seed.  Records come out time-ordered, one
    user block after another, so each user sessionizes into a single session
    and session order matches user order.
    """
    rng = np.random.default_rng(config.seed)
    pools = [
        [f"g{g:03d}o{j:05d}" for j in range(config.objects_per_group)]
        for g in range(config.groups)
    ]
    records: list[AccessRecord] = []
    truth: dict[str, int] = {}
    user_index = 0
    for group in range(config.groups):
        for _ in range(config.sessions_per_group):
            user_id = f"u{user_index:06d}"
            truth[user_id] = group
            start = user_index * _USER_SPACING
            n_requests = int(rng.integers(config.accesses_min, config.accesses_max + 1))
            for j in range(n_requests):
                if config.cross_group_noise > 0.0 and rng.random() < config.cross_group_noise:
                    other = int(rng.integers(config.groups - 1))
                    pool = pools[other if other < group else other + 1]
                else:
                    pool = pools[group]
                object_id = pool[int(rng.integers(len(pool)))]
                records.append(AccessRecord(start + j * _REQUEST_GAP, user_id, object_id))
            user_index += 1
    return records, truth
