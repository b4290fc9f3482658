"""Concept extractors over a finite input space.

Inputs are symbolic: input ``x`` is identified with its ground-truth concept
vector ``g``. An extractor gives ``p(c | x)`` for every input and every
concept vector, either as one softmax over whole vectors (joint) or as a
product of per-dimension softmaxes whose value tables are indexed by the
input's own component (factorized), which makes the learned map
disentangled by construction.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..autodiff import Tensor, as_tensor, parameter
from ..census.alpha import AlphaMap
from ..knowledge.task import ConceptSpace


class Extractor:
    """Common interface: log joint ``[n, |C|]`` and per-dimension marginals."""

    space: ConceptSpace
    inputs: np.ndarray

    def __init__(self, space: ConceptSpace, inputs):
        self.space = space
        self.inputs = np.atleast_2d(np.asarray(inputs, dtype=np.int64))
        self.grid = space.enumerate()

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[0]

    @property
    def parameters(self) -> list[Tensor]:
        return []

    def log_joint(self) -> Tensor:
        raise NotImplementedError

    def marginals(self) -> list[Tensor]:
        """``p(c_j = v | x)`` as one ``[n, m_j]`` tensor per dimension."""
        joint = self.log_joint().exp()
        if getattr(self, "_projections", None) is None:
            self._projections = [_onehot(self.grid[:, j], m) for j, m in enumerate(self.space.cardinalities)]
        return [joint @ proj for proj in self._projections]

    def log_marginals(self) -> list[Tensor]:
        return [p.log() for p in self.marginals()]

    def probs(self) -> np.ndarray:
        return np.exp(self.log_joint().data)

    def head_features(self) -> Tensor:
        """Joint concept probabilities fed to a label head.

        The joint (rather than per-dimension logits) lets an affine head
        represent any function of the concept vector; probabilities keep
        the features bounded.
        """
        return self.log_joint().exp()

    def argmax_vectors(self) -> np.ndarray:
        """Most likely concept vector per input; ties go to the lexicographically first."""
        return self.grid[np.argmax(self.log_joint().data, axis=1)]

    def extract(self) -> AlphaMap:
        return AlphaMap.entangled(self.space, self.inputs, self.argmax_vectors())


def _onehot(values: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros((len(values), m))
    out[np.arange(len(values)), values] = 1.0
    return out


class ConceptExtractor(Extractor):
    """Logit-parameterized extractor.

    ``mode="joint"`` keeps one logit per (input, concept vector).
    ``mode="factorized"`` keeps value tables ``T[v] -> logits over m``; the
    distribution of ``c_j`` for input ``x`` is ``softmax(T_j[g_j(x)])``. With
    ``shared=True`` (the default when every dimension has the same
    cardinality) a single table serves all dimensions, as when one digit
    classifier reads every digit of an input.
    """

    def __init__(self, space: ConceptSpace, inputs, mode: str = "joint", shared: bool | None = None,
                 rng: np.random.Generator | None = None, sigma: float = 0.5):
        super().__init__(space, inputs)
        if mode not in ("joint", "factorized"):
            raise ValueError(f"unknown extractor mode {mode!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.mode = mode
        cards = space.cardinalities
        if shared is None:
            shared = len(set(cards)) == 1
        if shared and len(set(cards)) != 1:
            raise ValueError("a shared table needs equal cardinalities")
        self.shared = bool(shared) and mode == "factorized"
        if mode == "joint":
            self.weights = [parameter(rng.normal(0.0, sigma, size=(self.n_inputs, space.size)))]
        elif self.shared:
            self.weights = [parameter(rng.normal(0.0, sigma, size=(cards[0], cards[0])))]
        else:
            self.weights = [parameter(rng.normal(0.0, sigma, size=(m, m))) for m in cards]

    @property
    def parameters(self) -> list[Tensor]:
        return list(self.weights)

    @contextmanager
    def evaluation(self):
        """Share intermediate tensors across one loss evaluation.

        Parameters must not change inside the block; outside it nothing is
        cached, so in-place parameter edits are always seen.
        """
        self._memo = {}
        try:
            yield self
        finally:
            self._memo = None

    def _cached(self, key: str, build):
        memo = getattr(self, "_memo", None)
        if memo is None:
            return build()
        if key not in memo:
            memo[key] = build()
        return memo[key]

    def _table(self, j: int) -> Tensor:
        return self.weights[0] if self.shared else self.weights[j]

    def dim_logits(self) -> list[Tensor]:
        return [self._table(j).take(self.inputs[:, j], axis=0) for j in range(self.space.k)]

    def log_marginals(self) -> list[Tensor]:
        if self.mode == "joint":
            return self._cached("log_marginals", super().log_marginals)
        return self._cached("log_marginals", lambda: [z.log_softmax(axis=1) for z in self.dim_logits()])

    def marginals(self) -> list[Tensor]:
        if self.mode == "joint":
            return self._cached("marginals", super().marginals)
        return self._cached("marginals", lambda: [lp.exp() for lp in self.log_marginals()])

    def log_joint(self) -> Tensor:
        return self._cached("log_joint", self._log_joint)

    def head_features(self) -> Tensor:
        return self._cached("head_features", super().head_features)

    def _log_joint(self) -> Tensor:
        if self.mode == "joint":
            return self.weights[0].log_softmax(axis=1)
        out = None
        for j, lp in enumerate(self.log_marginals()):
            term = lp.take(self.grid[:, j], axis=1)
            out = term if out is None else out + term
        return out

    def snapshot(self) -> list[np.ndarray]:
        return [w.data.copy() for w in self.weights]


class DistributionExtractor(Extractor):
    """A fixed ``p(c | x)`` given as an ``[n, |C|]`` probability table."""

    def __init__(self, space: ConceptSpace, inputs, probs):
        super().__init__(space, inputs)
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (self.n_inputs, space.size):
            raise ValueError(f"expected probabilities of shape {(self.n_inputs, space.size)}")
        if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1) > 1e-9):
            raise ValueError("each row must be a probability distribution")
        self.table = probs

    def log_joint(self) -> Tensor:
        with np.errstate(divide="ignore"):
            return as_tensor(np.log(self.table))

    def marginals(self) -> list[Tensor]:
        return [as_tensor(self.table @ _onehot(self.grid[:, j], m))
                for j, m in enumerate(self.space.cardinalities)]

    def probs(self) -> np.ndarray:
        return self.table.copy()

    def argmax_vectors(self) -> np.ndarray:
        return self.grid[np.argmax(self.table, axis=1)]

    @classmethod
    def deterministic(cls, space: ConceptSpace, inputs, images) -> "DistributionExtractor":
        """Point masses at ``images[i]`` for input ``i``."""
        images = np.atleast_2d(np.asarray(images, dtype=np.int64))
        probs = np.zeros((len(images), space.size))
        probs[np.arange(len(images)), np.atleast_1d(space.index_of(images))] = 1.0
        return cls(space, inputs, probs)

    @classmethod
    def from_alpha(cls, alpha: AlphaMap, inputs) -> "DistributionExtractor":
        return cls.deterministic(alpha.space, inputs, alpha.apply(inputs))

    @classmethod
    def uniform(cls, space: ConceptSpace, inputs) -> "DistributionExtractor":
        n = np.atleast_2d(np.asarray(inputs)).shape[0]
        return cls(space, inputs, np.full((n, space.size), 1.0 / space.size))

    @classmethod
    def mixture(cls, parts: list["DistributionExtractor"], weights) -> "DistributionExtractor":
        probs = sum(w * p.table for w, p in zip(weights, parts))
        return cls(parts[0].space, parts[0].inputs, probs)
