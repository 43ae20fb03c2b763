"""Loading, normalizing and persisting monolingual embedding spaces.

The on-disk format is the word2vec text format: a header line
"<count> <dim>" followed by one "<token> <f1> ... <fd>" line per word,
single-space separated, UTF-8.  Vectors are held as float64 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVectorError, EmptySpaceError, ParseError, TooFewSamplesError

NORM_TOL = 1e-6


@dataclass(frozen=True)
class EmbeddingSpace:
    """A ranked vocabulary plus its dense vector matrix.

    Row order is frequency order: row 0 is the most frequent word.
    Instances are immutable and safe to share across workers.
    """

    words: tuple[str, ...]
    vectors: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ParseError(f"vector matrix must be 2-d, got shape {vectors.shape}")
        n, d = vectors.shape
        if n < 1 or d < 2:
            raise EmptySpaceError(f"space must have n >= 1 and d >= 2, got {n}x{d}")
        if len(self.words) != n:
            raise ParseError(f"{len(self.words)} words but {n} vector rows")
        index = {}
        for i, w in enumerate(self.words):
            if w in index:
                raise ParseError(f"duplicate token {w!r}")
            index[w] = i
        vectors.flags.writeable = False
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "_index", index)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index_of(self, word: str) -> int | None:
        return self._index.get(word)

    def __contains__(self, word: str) -> bool:
        return word in self._index


def load_embeddings(path, max_vocab: int) -> EmbeddingSpace:
    """Read the first `max_vocab` distinct words of a word2vec text file.

    Duplicate tokens after their first occurrence are skipped and do not
    count against `max_vocab`.  Reading stops after the header's declared
    row count even if the file is longer.
    """
    if max_vocab < 1:
        raise ParseError(f"max_vocab must be positive, got {max_vocab}")
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        header = f.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ParseError(f"malformed header {header!r}: expected '<count> <dim>'")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"malformed header {header!r}: non-integer fields") from None
        if count < 0 or dim < 2:
            raise ParseError(f"malformed header {header!r}: need count >= 0, dim >= 2")
        for lineno, line in enumerate(f, start=2):
            if lineno - 1 > count:
                break
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(" ")
            token = fields[0]
            if len(fields) != dim + 1:
                raise ParseError(
                    f"line {lineno}: expected {dim} floats for {token!r}, got {len(fields) - 1}"
                )
            try:
                vec = np.array([float(x) for x in fields[1:]], dtype=np.float64)
            except ValueError:
                raise ParseError(f"line {lineno}: unparseable float for {token!r}") from None
            if token in seen:
                continue
            seen.add(token)
            words.append(token)
            rows.append(vec)
            if len(words) >= max_vocab:
                break
    if not rows:
        raise EmptySpaceError(f"{path}: no usable rows")
    return EmbeddingSpace(tuple(words), np.vstack(rows))


def save_embeddings(path, space: EmbeddingSpace) -> None:
    """Write a space in the same text format, floats at 9 significant digits."""
    for w in space.words:
        if " " in w or "\n" in w:
            raise ParseError(f"token {w!r} contains whitespace and cannot be serialized")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{space.n} {space.dim}\n")
        for word, row in zip(space.words, space.vectors):
            f.write(word + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


def unit_rows(vectors: np.ndarray, words=None) -> np.ndarray:
    """Scale each row to unit Euclidean norm; zero rows are an error."""
    norms = np.linalg.norm(vectors, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        i = int(bad[0])
        name = words[i] if words is not None else f"row {i}"
        raise DegenerateVectorError(f"zero vector for {name}")
    return vectors / norms[:, None]


def iterative_normalize(space: EmbeddingSpace, iterations: int = 5) -> EmbeddingSpace:
    """Alternate unit-norm scaling and mean centering, ending unit-norm.

    Each round scales rows to unit length and then subtracts the column
    mean; a final unit-norm pass guarantees the output rows have norm 1,
    which cosine and CSLS retrieval rely on.
    """
    if iterations < 1:
        raise ParseError(f"iterations must be positive, got {iterations}")
    if space.n < 2:
        raise TooFewSamplesError(f"iterative normalization needs n >= 2, got {space.n}")
    x = np.array(space.vectors)
    for _ in range(iterations):
        x = unit_rows(x, space.words)
        x -= x.mean(axis=0)
    x = unit_rows(x, space.words)
    return EmbeddingSpace(space.words, x)
