"""Uniform grids on an interval."""
import math
from dataclasses import dataclass

import numpy as np

from .errors import GridTooLarge

DEFAULT_MAX_POINTS = 4096
_SLACK = 1e-9


@dataclass(frozen=True)
class GridSpec:
    start: float
    end: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        if not self.start <= self.end:
            raise ValueError(f"grid start {self.start} exceeds end {self.end}")

    @property
    def count(self):
        return int(math.floor((self.end - self.start) / self.step + _SLACK)) + 1

    def points(self):
        return self.start + self.step * np.arange(self.count)

    def check_size(self, cap=DEFAULT_MAX_POINTS):
        if self.count > cap:
            raise GridTooLarge(
                f"grid has {self.count} points (cap {cap}); coarsen the step or shorten the interval"
            )
        return self

    def refined(self, factor=2):
        return GridSpec(self.start, self.end, self.step / factor)
