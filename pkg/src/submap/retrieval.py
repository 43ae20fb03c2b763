"""Translation retrieval (cosine and CSLS), the unsupervised model
selection criterion, and bidirectional seed-dictionary induction.

All retrieval assumes unit-norm rows on both sides, breaks score ties
toward the lowest target index, and is deterministic given an rng.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSpace, unit_rows
from .errors import ConfigError, EmptyDictionaryError, ParseError
from .mapping import MapFn

# cap on elements per similarity block, keeps memory bounded on big vocabularies
_BLOCK_ELEMENTS = 2 ** 24


def _rows(x) -> np.ndarray:
    return x.vectors if isinstance(x, EmbeddingSpace) else np.asarray(x, dtype=np.float64)


def _block_rows(n_cols: int) -> int:
    return max(1, _BLOCK_ELEMENTS // max(1, n_cols))


def topk_mean(queries: np.ndarray, corpus: np.ndarray, k: int) -> np.ndarray:
    """Mean cosine of each query row to its k most similar corpus rows."""
    out = np.empty(queries.shape[0])
    step = _block_rows(corpus.shape[0])
    for i in range(0, queries.shape[0], step):
        sims = queries[i:i + step] @ corpus.T
        out[i:i + step] = np.partition(sims, -k, axis=1)[:, -k:].mean(axis=1)
    return out


def _drop_scores(scores: np.ndarray, keep_prob: float, rng) -> np.ndarray:
    if keep_prob >= 1.0:
        return scores
    scores[rng.random(scores.shape) >= keep_prob] = -np.inf
    return scores


def csls_translate(queries, target, k: int, keep_prob: float = 1.0,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Top-1 target index per query under 2*cos - r_t - r_s.

    r_t is the mean cosine of the query to its k nearest target rows and
    r_s the mean cosine of the target to its k nearest query rows; the
    query set itself serves as the source-side neighborhood.  With
    keep_prob < 1 each score survives with that probability and dropped
    scores count as -inf (stochastic dictionary induction).
    """
    q_vecs = _rows(queries)
    t_vecs = _rows(target)
    n_q, n_t = q_vecs.shape[0], t_vecs.shape[0]
    if not 1 <= k <= n_t:
        raise ConfigError(f"k={k} out of range for {n_t} target rows")
    if k > n_q:
        raise ConfigError(f"k={k} exceeds query count {n_q} for the r_s neighborhood")
    if keep_prob < 1.0 and rng is None:
        raise ConfigError("keep_prob < 1 requires an rng")
    r_t = topk_mean(q_vecs, t_vecs, k)
    r_s = topk_mean(t_vecs, q_vecs, k)
    out = np.empty(n_q, dtype=np.int64)
    step = _block_rows(n_t)
    for i in range(0, n_q, step):
        scores = 2.0 * (q_vecs[i:i + step] @ t_vecs.T)
        scores -= r_t[i:i + step, None]
        scores -= r_s[None, :]
        out[i:i + step] = _drop_scores(scores, keep_prob, rng).argmax(axis=1)
    return out


def nn_translate(queries, target) -> np.ndarray:
    """Top-1 target index per query by plain cosine, lowest index on ties."""
    q_vecs = _rows(queries)
    t_vecs = _rows(target)
    out = np.empty(q_vecs.shape[0], dtype=np.int64)
    step = _block_rows(t_vecs.shape[0])
    for i in range(0, q_vecs.shape[0], step):
        out[i:i + step] = (q_vecs[i:i + step] @ t_vecs.T).argmax(axis=1)
    return out


def selection_criterion(forward: MapFn, source: EmbeddingSpace, target: EmbeddingSpace,
                        vocab_limit: int = 10000, k: int = 10) -> float:
    """Mean cosine between mapped frequent source words and their CSLS
    translations; higher correlates with mapping quality."""
    if vocab_limit < 1:
        raise ConfigError(f"vocab_limit must be positive, got {vocab_limit}")
    v = min(vocab_limit, source.n)
    idx = np.arange(v)
    mapped = unit_rows(forward(source.vectors[idx], idx))
    kk = min(k, v, target.n)
    translated = csls_translate(mapped, target, kk)
    return float(np.sum(mapped * target.vectors[translated], axis=1).mean())


@dataclass(frozen=True)
class SeedDictionary:
    """Induced (source_index, target_index) pairs, one per source word."""

    pairs: np.ndarray  # [m x 2] int
    source_space_id: str = "source"
    target_space_id: str = "target"

    def __post_init__(self):
        pairs = np.ascontiguousarray(self.pairs, dtype=np.int64)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ParseError(f"pairs must be m x 2, got {pairs.shape}")
        src = pairs[:, 0]
        if len(np.unique(src)) != len(src):
            raise ParseError("duplicate source index in seed dictionary")
        pairs.flags.writeable = False
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return self.pairs.shape[0]


def induce_seed_dictionary(forward: MapFn, backward: MapFn, source: EmbeddingSpace,
                           target: EmbeddingSpace, vocab_limit: int = 10000, k: int = 10,
                           keep_prob: float = 1.0,
                           rng: np.random.Generator | None = None) -> SeedDictionary:
    """Mutual-translation pairs over the top `vocab_limit` source words.

    Each source word's CSLS translation is back-translated through the
    backward map over the full source vocabulary; the pair is kept only
    when the round trip returns the original word.  With keep_prob < 1
    the forward choice is randomized by score dropout while the
    backward re-check stays deterministic, so the dictionary thins to
    roughly keep_prob of its deterministic size instead of vanishing.
    """
    if vocab_limit < 1:
        raise ConfigError(f"vocab_limit must be positive, got {vocab_limit}")
    v = min(vocab_limit, source.n)
    src_idx = np.arange(v)
    mapped = unit_rows(forward(source.vectors[src_idx], src_idx))
    k_fwd = min(k, v, target.n)
    translations = csls_translate(mapped, target, k_fwd, keep_prob, rng)

    unique_targets = np.unique(translations)
    back_mapped = unit_rows(backward(target.vectors[unique_targets], unique_targets))
    k_bwd = min(k, len(unique_targets), source.n)
    back = csls_translate(back_mapped, source, k_bwd)
    back_of = dict(zip(unique_targets.tolist(), back.tolist()))

    keep = [(i, int(t)) for i, t in enumerate(translations.tolist()) if back_of[t] == i]
    if not keep:
        raise EmptyDictionaryError(
            f"no mutual translations among the top {v} source words")
    return SeedDictionary(np.array(keep, dtype=np.int64))


def save_dictionary(path, dictionary: SeedDictionary, source: EmbeddingSpace,
                    target: EmbeddingSpace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s, t in dictionary.pairs:
            f.write(f"{source.words[s]}\t{target.words[t]}\n")


def load_dictionary_tokens(path) -> list[tuple[str, str]]:
    """Token pairs from a text dictionary, tab- or space-separated."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" in line:
                fields = line.split("\t")
            else:
                fields = line.split(" ")
            if len(fields) != 2 or not fields[0] or not fields[1]:
                raise ParseError(f"{path} line {lineno}: expected 'source<TAB>target'")
            out.append((fields[0], fields[1]))
    return out


def gold_multimap(pairs: list[tuple[str, str]]) -> dict[str, set[str]]:
    gold: dict[str, set[str]] = {}
    for s, t in pairs:
        gold.setdefault(s, set()).add(t)
    return gold
