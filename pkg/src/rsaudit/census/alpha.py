"""Deterministic maps from ground-truth concepts to predicted concepts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch
from ..knowledge.task import ConceptSpace


@dataclass(frozen=True)
class AlphaMap:
    """A map ``g -> c``.

    Entangled maps are tables over a domain of concept vectors (the support
    in every census; outside the domain they are undefined). Disentangled
    maps are per-dimension value tables, ``alpha(g)_j = tables[j][g_j]``,
    and are defined on the whole concept space.
    """

    space: ConceptSpace
    mode: str
    domain: tuple[tuple[int, ...], ...] = ()
    image: tuple[tuple[int, ...], ...] = ()
    tables: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        if self.mode == "entangled":
            if len(self.domain) != len(self.image):
                raise ValueError("domain and image differ in length")
            for c in self.image:
                if not self.space.contains(c):
                    raise DimensionMismatch(f"image vector {c} lies outside the concept space")
        elif self.mode == "disentangled":
            if len(self.tables) != self.space.k:
                raise DimensionMismatch("one value table per concept dimension is required")
            for t, m in zip(self.tables, self.space.cardinalities):
                if len(t) != m or any(not 0 <= v < m for v in t):
                    raise DimensionMismatch("value table does not match its dimension")
        else:
            raise ValueError(f"unknown alpha mode {self.mode!r}")

    @classmethod
    def entangled(cls, space: ConceptSpace, domain, image) -> "AlphaMap":
        return cls(space, "entangled", tuple(map(_tup, domain)), tuple(map(_tup, image)))

    @classmethod
    def _trusted(cls, space: ConceptSpace, domain: tuple, image: tuple) -> "AlphaMap":
        """Entangled map from already-validated tuples (used for bulk listings)."""
        obj = object.__new__(cls)
        for name, value in (("space", space), ("mode", "entangled"), ("domain", domain),
                            ("image", image), ("tables", ())):
            object.__setattr__(obj, name, value)
        return obj

    @classmethod
    def disentangled(cls, space: ConceptSpace, tables: Sequence[Sequence[int]]) -> "AlphaMap":
        return cls(space, "disentangled", tables=tuple(tuple(int(v) for v in t) for t in tables))

    @classmethod
    def identity(cls, space: ConceptSpace, domain=None) -> "AlphaMap":
        if domain is None:
            return cls.disentangled(space, [range(m) for m in space.cardinalities])
        return cls.entangled(space, domain, domain)

    def apply(self, vectors) -> np.ndarray:
        """Images of an ``[n, k]`` array of ground-truth vectors."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.int64))
        if self.mode == "disentangled":
            return np.stack([np.asarray(t)[vectors[:, j]] for j, t in enumerate(self.tables)], axis=1)
        if len(vectors) == len(self.domain) and np.array_equal(vectors, self.domain):
            return np.asarray(self.image, dtype=np.int64).reshape(-1, self.space.k)
        lookup = dict(zip(self.domain, self.image))
        try:
            return np.asarray([lookup[_tup(g)] for g in vectors], dtype=np.int64).reshape(-1, self.space.k)
        except KeyError as e:
            raise KeyError(f"alpha is undefined at {e.args[0]}") from None

    def __call__(self, g: Sequence[int]) -> tuple[int, ...]:
        return _tup(self.apply([g])[0])

    def restricted(self, domain) -> "AlphaMap":
        """The entangled table of this map over ``domain``."""
        domain = [_tup(g) for g in domain]
        return AlphaMap.entangled(self.space, domain, [_tup(c) for c in self.apply(domain)])

    def is_identity_on(self, domain) -> bool:
        arr = np.asarray(domain, dtype=np.int64)
        return bool(np.array_equal(self.apply(arr), arr))

    def to_json(self) -> dict:
        if self.mode == "disentangled":
            return {"mode": "disentangled", "tables": [list(t) for t in self.tables]}
        return {"mode": "entangled",
                "map": [{"g": list(g), "c": list(c)} for g, c in zip(self.domain, self.image)]}


def _tup(v) -> tuple[int, ...]:
    return tuple(int(x) for x in v)
