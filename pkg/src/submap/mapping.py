"""Linear and piecewise-linear maps between embedding spaces.

A LinearMap holds a d x d matrix W applied to row vectors as v -> W v
(rows(X) -> X @ W.T).  A PiecewiseMap owns one LinearMap per source
subspace plus the subspace pairing that says which map applies to which
word on either side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import NumericError, ParseError

if TYPE_CHECKING:
    from .alignment import SubspacePairing

MapFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LinearMap:
    w: np.ndarray
    orthogonal_hint: bool = False

    def __post_init__(self):
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ParseError(f"map matrix must be square, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise NumericError("map matrix contains non-finite entries")
        object.__setattr__(self, "w", w)

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors) @ self.w.T

    def transposed(self) -> "LinearMap":
        return LinearMap(self.w.T, self.orthogonal_hint)

    def orthogonality_defect(self) -> float:
        return float(np.linalg.norm(self.w.T @ self.w - np.eye(self.dim)))


def identity_map(dim: int) -> LinearMap:
    return LinearMap(np.eye(dim), orthogonal_hint=True)


@dataclass(frozen=True)
class PiecewiseMap:
    """One LinearMap per subspace id, with per-subspace mixing weights."""

    pairing: "SubspacePairing"
    maps: tuple[LinearMap, ...]
    lambdas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        ids = self.pairing.cluster_ids()
        if len(self.maps) != len(ids):
            raise ParseError(f"{len(self.maps)} maps for {len(ids)} subspace ids")
        if len(self.lambdas) != len(self.maps):
            raise ParseError("one lambda per subspace map required")

    @property
    def dim(self) -> int:
        return self.maps[0].dim

    def map_for(self, cluster_id: int) -> LinearMap:
        return self.maps[cluster_id]

    def apply_source(self, vectors: np.ndarray, indices: np.ndarray) -> np.ndarray:
        """Map source rows, each by the map of its source-side subspace."""
        ids = self.pairing.source_partition.assignments[indices]
        return self._apply_by_id(vectors, ids, transpose=False)

    def apply_target_back(self, vectors: np.ndarray, indices: np.ndarray) -> np.ndarray:
        """Map target rows back to the source space by per-subspace transposes."""
        ids = self.pairing.target_assignments[indices]
        return self._apply_by_id(vectors, ids, transpose=True)

    def _apply_by_id(self, vectors, ids, transpose):
        vectors = np.asarray(vectors, dtype=np.float64)
        out = np.empty_like(vectors)
        for cid in np.unique(ids):
            w = self.maps[cid].w
            rows = ids == cid
            out[rows] = vectors[rows] @ (w if transpose else w.T)
        return out

    def transformed_source(self, source_vectors: np.ndarray) -> np.ndarray:
        """The whole source space with every word mapped by its subspace map."""
        return self.apply_source(source_vectors, np.arange(len(source_vectors)))

    def compose_global(self, outer: LinearMap) -> "PiecewiseMap":
        """Left-compose one linear map onto every subspace map."""
        composed = tuple(LinearMap(outer.w @ m.w) for m in self.maps)
        return PiecewiseMap(self.pairing, composed, self.lambdas)


def forward_fn(m: LinearMap | PiecewiseMap) -> MapFn:
    """(vectors, indices) -> vectors mapped into the target space."""
    if isinstance(m, LinearMap):
        return lambda vectors, indices: m.apply(vectors)
    return m.apply_source


def backward_fn(m: LinearMap | PiecewiseMap) -> MapFn:
    """(vectors, indices) -> target vectors mapped back into the source space.

    Near-orthogonal maps invert by transposition, so the backward
    direction reuses the forward matrices transposed.
    """
    if isinstance(m, LinearMap):
        t = m.transposed()
        return lambda vectors, indices: t.apply(vectors)
    return m.apply_target_back


def save_linear_map(path, m: LinearMap) -> None:
    """Text format: first line d, then d rows of d floats (full precision)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{m.dim}\n")
        for row in m.w:
            f.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def load_linear_map(path, orthogonal_hint: bool = False) -> LinearMap:
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        try:
            d = int(header)
        except ValueError:
            raise ParseError(f"{path}: expected dimension on first line, got {header!r}") from None
        rows = []
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != d:
                raise ParseError(f"{path} line {lineno}: expected {d} floats")
            rows.append([float(x) for x in fields])
    if len(rows) != d:
        raise ParseError(f"{path}: expected {d} rows, got {len(rows)}")
    return LinearMap(np.array(rows, dtype=np.float64), orthogonal_hint=orthogonal_hint)
