"""Procrustes refinement driven by stochastic dictionary induction.

Each round induces a bidirectional seed dictionary (randomly dropping
similarity scores to escape local optima), solves the orthogonal
Procrustes problem on it, and keeps the best mapping by mean pair
cosine.  The keep probability starts low and doubles whenever the
objective stalls, ending with a deterministic pass.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .embeddings import EmbeddingSpace, unit_rows
from .errors import ConfigError, EmptyDictionaryError
from .mapping import LinearMap, PiecewiseMap, backward_fn, forward_fn
from .retrieval import SeedDictionary, induce_seed_dictionary


@dataclass(frozen=True)
class RefineConfig:
    p0: float = 0.1
    multiplier: float = 2.0
    threshold: float = 1e-6
    max_iters: int = 50
    vocab_limit: int = 10000
    csls_k: int = 10
    seed: int = 0

    def validate(self) -> "RefineConfig":
        if not 0.0 < self.p0 <= 1.0:
            raise ConfigError(f"p0 must be in (0, 1], got {self.p0}")
        if self.multiplier <= 1.0:
            raise ConfigError(f"multiplier must exceed 1, got {self.multiplier}")
        if self.max_iters < 1 or self.vocab_limit < 1 or self.csls_k < 1:
            raise ConfigError("max_iters, vocab_limit and csls_k must be positive")
        return self


def procrustes(dictionary: SeedDictionary, source, target) -> LinearMap:
    """Closed-form orthogonal map minimizing summed squared distances
    over the dictionary pairs, via SVD of Y^T X."""
    if len(dictionary) == 0:
        raise EmptyDictionaryError("cannot refine from an empty dictionary")
    src = source.vectors if isinstance(source, EmbeddingSpace) else np.asarray(source)
    tgt = target.vectors if isinstance(target, EmbeddingSpace) else np.asarray(target)
    x = src[dictionary.pairs[:, 0]]
    y = tgt[dictionary.pairs[:, 1]]
    u, _, vt = np.linalg.svd(y.T @ x)
    return LinearMap(u @ vt, orthogonal_hint=True)


@dataclass(frozen=True)
class RefineStep:
    iteration: int
    keep_prob: float
    objective: float
    pairs: int


def _pair_objective(m: LinearMap, src_vectors, tgt_vectors,
                    dictionary: SeedDictionary) -> float:
    mapped = unit_rows(m.apply(src_vectors[dictionary.pairs[:, 0]]))
    return float(np.sum(mapped * tgt_vectors[dictionary.pairs[:, 1]], axis=1).mean())


def stochastic_refine(initial_fwd, initial_bwd, source: EmbeddingSpace,
                      target: EmbeddingSpace, cfg: RefineConfig
                      ) -> tuple[LinearMap, list[RefineStep]]:
    """Iterated induce-and-Procrustes from an initial mapping pair.

    Returns the best-objective map and the step log.  The first
    induction uses the provided mapping functions; later rounds propose
    from the best Procrustes solution so far (an orthogonal map,
    inverted by its transpose for the backward direction).
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    fwd, bwd = initial_fwd, initial_bwd
    keep_prob = cfg.p0
    best_map: LinearMap | None = None
    best_objective = -np.inf
    fallback: tuple[float, LinearMap] | None = None
    log: list[RefineStep] = []
    for iteration in range(1, cfg.max_iters + 1):
        try:
            dictionary = induce_seed_dictionary(fwd, bwd, source, target,
                                                vocab_limit=cfg.vocab_limit,
                                                k=cfg.csls_k, keep_prob=keep_prob,
                                                rng=rng)
        except EmptyDictionaryError as e:
            raise EmptyDictionaryError(
                f"induction produced no pairs at refinement iteration {iteration}: {e}"
            ) from None
        m = procrustes(dictionary, source, target)
        objective = _pair_objective(m, source.vectors, target.vectors, dictionary)
        log.append(RefineStep(iteration, keep_prob, objective, len(dictionary)))
        # dictionaries below d pairs are fit exactly by an orthogonal map,
        # so their objective says nothing; they may not claim the snapshot
        if len(dictionary) >= source.dim:
            improved = objective - best_objective >= cfg.threshold
            if objective > best_objective:
                best_map, best_objective = m, objective
        else:
            improved = False
            if fallback is None or objective > fallback[0]:
                fallback = (objective, m)
        if not improved:
            if keep_prob >= 1.0:
                break
            keep_prob = min(1.0, keep_prob * cfg.multiplier)
        # propose the next dictionary from the best map found so far; a
        # chain through an unlucky stochastic draw would walk away from
        # solutions it already had
        if best_map is not None:
            fwd, bwd = forward_fn(best_map), backward_fn(best_map)
    if best_map is None:
        assert fallback is not None
        best_map = fallback[1]
    return best_map, log


def refine_linear(initial: LinearMap, source: EmbeddingSpace, target: EmbeddingSpace,
                  cfg: RefineConfig) -> tuple[LinearMap, list[RefineStep]]:
    """Stochastic refinement of a single linear map."""
    return stochastic_refine(forward_fn(initial), backward_fn(initial),
                             source, target, cfg)


def global_refine(pm: PiecewiseMap, source: EmbeddingSpace, target: EmbeddingSpace,
                  cfg: RefineConfig) -> tuple[PiecewiseMap, list[RefineStep]]:
    """Refine one linear map between the piecewise-transformed source
    space and the target space, then compose it onto every subspace map
    (the combination stays piecewise linear)."""
    transformed = EmbeddingSpace(source.words,
                                 unit_rows(pm.transformed_source(source.vectors)))
    identity = LinearMap(np.eye(source.dim), orthogonal_hint=True)
    w_g, log = stochastic_refine(forward_fn(identity), backward_fn(identity),
                                 transformed, target, cfg)
    return pm.compose_global(w_g), log


def local_refine(pm: PiecewiseMap, source: EmbeddingSpace, target: EmbeddingSpace,
                 cfg: RefineConfig) -> tuple[PiecewiseMap, dict[int, list[RefineStep]]]:
    """Refine each subspace map against its own target subspace only.

    Subspaces whose local induction degenerates (too few words, or an
    empty dictionary at some iteration) keep their current map.
    """
    pairing = pm.pairing
    new_maps = list(pm.maps)
    logs: dict[int, list[RefineStep]] = {}
    for cluster_id in pairing.cluster_ids():
        cid = int(cluster_id)
        src_rows = pairing.source_members(cid)
        tgt_rows = pairing.target_members(cid)
        if len(src_rows) < 2 or len(tgt_rows) < 2:
            continue
        sub_source = EmbeddingSpace(tuple(source.words[i] for i in src_rows),
                                    source.vectors[src_rows])
        sub_target = EmbeddingSpace(tuple(target.words[i] for i in tgt_rows),
                                    target.vectors[tgt_rows])
        local_cfg = replace(cfg, seed=cfg.seed + cid,
                            csls_k=min(cfg.csls_k, len(src_rows), len(tgt_rows)))
        initial = pm.maps[cid]
        try:
            refined, log = refine_linear(initial, sub_source, sub_target, local_cfg)
        except EmptyDictionaryError:
            continue
        new_maps[cid] = refined
        logs[cid] = log
    return PiecewiseMap(pairing, tuple(new_maps), pm.lambdas), logs
