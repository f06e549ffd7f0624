from __future__ import annotations

import math
from dataclasses import dataclass

MAX_STEPS = 10**7


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    dt: float
    divergence_cap: float = 1e6
    record_stride: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ValueError(f"t_end must be positive, got {self.t_end!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.dt < self.t_end:
            raise ValueError("dt must be smaller than t_end")
        if self.t_end / self.dt > MAX_STEPS:
            raise ValueError(f"t_end / dt exceeds {MAX_STEPS} steps")
        if not self.divergence_cap > 0:
            raise ValueError(f"divergence_cap must be positive, got {self.divergence_cap!r}")
        if not (isinstance(self.record_stride, int) and self.record_stride >= 1):
            raise ValueError(f"record_stride must be a positive integer, got {self.record_stride!r}")

    @property
    def steps(self) -> int:
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))
