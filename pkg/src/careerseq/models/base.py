"""Common surface for occupation models.

An occupation model maps (career history, transition index) to a vector of
values over the taxonomy, in taxonomy entry order. Proper models return a
probability distribution; the as-written empirical baseline returns
unnormalized values, which downstream perplexity consumes as-is.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from ..corpus import CareerHistory


@runtime_checkable
class OccupationModel(Protocol):
    def predict(self, history: CareerHistory, t: int) -> np.ndarray: ...

    def log_prob(self, history: CareerHistory, t: int, code: int) -> float: ...
