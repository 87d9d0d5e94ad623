"""scikit-learn style wrappers: build CFI structures, refine with k-WL, decide IM equivalence.

The estimators are stateless apart from validated parameters, so ``fit`` only
checks parameters and records them; ``transform`` / ``predict`` do the work.
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .algebra import DEFAULT_EXHAUSTIVE, DEFAULT_TRIALS
from .cfi import TwistAssignment, build, strip_labels
from .errors import UsageError
from .graphs import BaseGraph
from .im import ImConfig, im_equivalent
from .structures import Structure
from .wl import DEFAULT_MEMORY, refine_joint, wl_equivalent


def check_structures(X) -> list[Structure]:
    """Validate a non-empty sequence of structures sharing one relation schema."""
    if isinstance(X, Structure):
        X = [X]
    items = list(X)
    if not items:
        raise UsageError("expected at least one structure")
    for s in items:
        if not isinstance(s, Structure):
            raise UsageError(f"expected Structure, got {type(s).__name__}")
    return items


def check_pairs(X) -> list[tuple[Structure, Structure]]:
    """Validate a sequence of (s, t) structure pairs."""
    pairs = []
    for item in X:
        if not isinstance(item, (tuple, list)) or len(item) != 2:
            raise UsageError("expected pairs of structures")
        s, t = check_structures(item)
        pairs.append((s, t))
    return pairs


def _check_int(name: str, value, low: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < low:
        raise UsageError(f"{name} must be an integer >= {low}, got {value!r}")
    return int(value)


class CfiBuilder(TransformerMixin, BaseEstimator):
    """Map base graphs to CFI structures; ``twist`` is the ``"e0=1,e3=2"`` edge text."""

    def __init__(self, variant: str = "inner", modulus: int = 2, twist: str = "", strip: bool = False,
                 seed: int = 0):
        self.variant = variant
        self.modulus = modulus
        self.twist = twist
        self.strip = strip
        self.seed = seed

    def fit(self, X=None, y=None):
        if self.variant not in ("inner", "outer"):
            raise UsageError(f"unknown variant {self.variant!r}; expected inner or outer")
        self.modulus_ = _check_int("modulus", self.modulus, 2)
        return self

    def transform(self, X: Iterable[BaseGraph]) -> list[Structure]:
        check_is_fitted(self, "modulus_")
        out = []
        for g in ([X] if isinstance(X, BaseGraph) else X):
            lam = TwistAssignment.parse(g, self.modulus_, self.twist)
            s = build(self.variant, g, self.modulus_, lam)
            out.append(strip_labels(s, self.seed) if self.strip else s)
        return out


class WLRefiner(TransformerMixin, BaseEstimator):
    """Joint stable k-WL coloring; ``transform`` returns one TupleColoring per structure."""

    def __init__(self, k: int = 2, threads: int = 1, memory: int = DEFAULT_MEMORY):
        self.k = k
        self.threads = threads
        self.memory = memory

    def fit(self, X=None, y=None):
        self.k_ = _check_int("k", self.k, 1)
        _check_int("threads", self.threads, 1)
        return self

    def transform(self, X):
        check_is_fitted(self, "k_")
        colorings, _ = refine_joint(check_structures(X), self.k_, self.threads, self.memory)
        return colorings

    def predict(self, X) -> np.ndarray:
        """k-WL equivalence of each (s, t) pair."""
        check_is_fitted(self, "k_")
        return np.array([wl_equivalent(s, t, self.k_, self.threads, self.memory) for s, t in check_pairs(X)])


class IMEquivalence(BaseEstimator):
    """Invertible-map equivalence; ``predict`` gives one verdict string per (s, t) pair.

    The full verdicts of the last call are kept in ``verdicts_``.
    """

    def __init__(self, k: int = 2, primes: tuple[int, ...] = (2,), positions: str = "all",
                 trials: int = DEFAULT_TRIALS, exhaustive: int = DEFAULT_EXHAUSTIVE, seed: int = 0,
                 threads: int = 1, max_rounds: int | None = None, memory: int = DEFAULT_MEMORY):
        self.k = k
        self.primes = primes
        self.positions = positions
        self.trials = trials
        self.exhaustive = exhaustive
        self.seed = seed
        self.threads = threads
        self.max_rounds = max_rounds
        self.memory = memory

    def fit(self, X=None, y=None):
        self.config_ = ImConfig(_check_int("k", self.k, 2), tuple(self.primes), self.positions,
                                _check_int("trials", self.trials, 0), _check_int("exhaustive", self.exhaustive, 0),
                                int(self.seed), _check_int("threads", self.threads, 1), self.max_rounds,
                                self.memory)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "config_")
        c = self.config_
        self.verdicts_ = [im_equivalent(s, t, c.k, c.primes, c.positions, c.trials, c.exhaustive, c.seed,
                                        c.threads, c.max_rounds, c.memory)
                          for s, t in check_pairs(X)]
        return np.array([v.verdict for v in self.verdicts_])
