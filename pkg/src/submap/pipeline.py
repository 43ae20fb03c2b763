"""Batch orchestration: ordered stages, persisted artifacts, and a run
manifest.

Every stage reads its inputs from the run directory and writes its
outputs back there, so `pipeline` and the per-stage subcommands produce
identical artifacts.  Stage seeds derive from the master seed and the
stage name; timings live in their own manifest key and are the only
nondeterministic field.
"""

from __future__ import annotations

import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .alignment import SubspacePairing, partition_target_with_merge, save_assignments
from .clustering import (Partition, finch_hierarchy, kmeans, load_assignments,
                         merge_small_clusters, save_partition, select_level)
from .config import PipelineConfig, config_digest, derive_seed
from .embeddings import (EmbeddingSpace, iterative_normalize, load_embeddings,
                         save_embeddings, unit_rows)
from .errors import ConfigError, EmptyDictionaryError
from .evaluation import (evaluate_bli, format_report, per_subspace_accuracy,
                         per_subspace_table, report_to_json)
from .gan import random_restart_train
from .mapping import (LinearMap, PiecewiseMap, backward_fn, forward_fn, load_linear_map,
                      save_linear_map)
from .multigan import train_multi_gan
from .refinement import global_refine, local_refine, refine_linear
from .retrieval import (gold_multimap, induce_seed_dictionary, load_dictionary_tokens,
                        save_dictionary)

STAGES = ("normalize", "single_gan", "cluster", "align", "multi_gan",
          "refine", "induce_dict", "eval")


def stages_for(cfg: PipelineConfig) -> tuple[str, ...]:
    """The stage sequence a config implies; single-map refinement skips
    the clustering and multi-GAN stages entirely."""
    order = list(STAGES)
    if cfg.refine_mode == "single":
        for name in ("cluster", "align", "multi_gan"):
            order.remove(name)
    if not cfg.data.gold:
        order.remove("eval")
    if cfg.stop_after:
        if cfg.stop_after not in order:
            raise ConfigError(f"stop_after names unknown or skipped stage {cfg.stop_after!r}")
        order = order[:order.index(cfg.stop_after) + 1]
    return tuple(order)


class RunDir:
    """Artifact paths and the manifest for one run directory."""

    def __init__(self, out: str | Path):
        self.root = Path(out)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.root / name

    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def read_manifest(self) -> dict:
        p = self.manifest_path()
        if p.exists():
            return json.loads(p.read_text(encoding="utf-8"))
        return {"stages": {}, "timings": {}}

    def update_manifest(self, **top_level) -> None:
        doc = self.read_manifest()
        doc.update(top_level)
        self.manifest_path().write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def record_stage(self, name: str, seed: int, artifacts: list[str],
                     metrics: dict, seconds: float) -> None:
        doc = self.read_manifest()
        doc.setdefault("stages", {})[name] = {
            "seed": seed,
            "status": "ok",
            "artifacts": artifacts,
            "metrics": metrics,
        }
        doc.setdefault("timings", {})[name] = round(seconds, 3)
        self.manifest_path().write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def record_failure(self, name: str, error: Exception) -> None:
        doc = self.read_manifest()
        doc["failure_stage"] = name
        doc["failure"] = f"{type(error).__name__}: {error}"
        self.manifest_path().write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _save_matrix(path: Path, m: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{m.shape[0]} {m.shape[1]}\n")
        for row in m:
            f.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def _load_matrix(path: Path) -> np.ndarray:
    with open(path, encoding="utf-8") as f:
        rows, cols = (int(x) for x in f.readline().split())
        m = np.loadtxt(f, dtype=np.float64, ndmin=2)
    if m.shape != (rows, cols):
        raise ConfigError(f"{path}: expected {rows}x{cols} matrix, got {m.shape}")
    return m


def _load_normalized(run: RunDir, cfg: PipelineConfig):
    src = load_embeddings(run.path("source.norm.vec"), cfg.data.max_vocab)
    tgt = load_embeddings(run.path("target.norm.vec"), cfg.data.max_vocab)
    return src, tgt


def _load_partition(run: RunDir, source: EmbeddingSpace) -> Partition:
    assignments = load_assignments(run.path("source_partition.tsv"), source.words)
    centroids = _load_matrix(run.path("source_centroids.txt"))
    return Partition(assignments, centroids)


def _load_pairing(run: RunDir, source: EmbeddingSpace, target: EmbeddingSpace) -> SubspacePairing:
    partition = _load_partition(run, source)
    target_assignments = load_assignments(run.path("target_assignments.tsv"), target.words)
    return SubspacePairing(partition, target_assignments)


def _save_mapset(run: RunDir, subdir: str, kind: str, maps: list[LinearMap],
                 meta: dict) -> list[str]:
    d = run.path(subdir)
    d.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for i, m in enumerate(maps):
        name = f"{subdir}/map_{i:03d}.txt"
        save_linear_map(run.path(name), m)
        artifacts.append(name)
    doc = {"kind": kind, "count": len(maps), **meta}
    meta_name = f"{subdir}/meta.json"
    run.path(meta_name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                   encoding="utf-8")
    artifacts.append(meta_name)
    return artifacts


def _load_mapset(run: RunDir, subdir: str):
    meta = json.loads(run.path(f"{subdir}/meta.json").read_text(encoding="utf-8"))
    maps = [load_linear_map(run.path(f"{subdir}/map_{i:03d}.txt"))
            for i in range(meta["count"])]
    return meta, maps


def load_final_mapping(run: RunDir, source: EmbeddingSpace, target: EmbeddingSpace):
    """The mapping produced by the refine stage, as forward/backward fns."""
    meta, maps = _load_mapset(run, "final")
    if meta["kind"] == "single":
        return forward_fn(maps[0]), backward_fn(maps[0]), None
    pairing = _load_pairing(run, source, target)
    pm = PiecewiseMap(pairing, tuple(maps), tuple(meta["lambdas"]))
    return forward_fn(pm), backward_fn(pm), pm


def stage_normalize(run: RunDir, cfg: PipelineConfig) -> dict:
    if not cfg.data.source or not cfg.data.target:
        raise ConfigError("data.source and data.target must name embedding files")
    source = load_embeddings(cfg.data.source, cfg.data.max_vocab)
    target = load_embeddings(cfg.data.target, cfg.data.max_vocab)
    if cfg.data.normalize:
        source = iterative_normalize(source, cfg.data.normalize_iterations)
        target = iterative_normalize(target, cfg.data.normalize_iterations)
    else:
        source = EmbeddingSpace(source.words, unit_rows(source.vectors, source.words))
        target = EmbeddingSpace(target.words, unit_rows(target.vectors, target.words))
    save_embeddings(run.path("source.norm.vec"), source)
    save_embeddings(run.path("target.norm.vec"), target)
    return {"artifacts": ["source.norm.vec", "target.norm.vec"],
            "metrics": {"source_n": source.n, "target_n": target.n, "dim": source.dim}}


def stage_single_gan(run: RunDir, cfg: PipelineConfig, seed: int) -> dict:
    source, target = _load_normalized(run, cfg)
    gan_cfg = replace(cfg.single_gan, seed=seed)
    best, criterion = random_restart_train(source, target, gan_cfg,
                                           restarts=cfg.single_restarts)
    save_linear_map(run.path("single_map.txt"), best)
    return {"artifacts": ["single_map.txt"],
            "metrics": {"criterion": criterion,
                        "orthogonal_hint": best.orthogonal_hint,
                        "orthogonality_defect": best.orthogonality_defect(),
                        "restarts": cfg.single_restarts}}


def stage_cluster(run: RunDir, cfg: PipelineConfig) -> dict:
    source, _ = _load_normalized(run, cfg)
    hierarchy = finch_hierarchy(source.vectors)
    partition = select_level(hierarchy, cfg.cluster.level)
    min_size = cfg.cluster.min_cluster_size or max(2 * source.dim, 32)
    partition = merge_small_clusters(partition, source.vectors, min_size)
    save_partition(run.path("source_partition.tsv"), partition, source.words)
    _save_matrix(run.path("source_centroids.txt"), partition.centroids)
    return {"artifacts": ["source_partition.tsv", "source_centroids.txt"],
            "metrics": {"level_sizes": [p.c for p in hierarchy.levels],
                        "selected_level": cfg.cluster.level,
                        "clusters": partition.c,
                        "cluster_sizes": partition.sizes().tolist()}}


def stage_align(run: RunDir, cfg: PipelineConfig) -> dict:
    source, target = _load_normalized(run, cfg)
    single = load_linear_map(run.path("single_map.txt"))
    partition = _load_partition(run, source)
    pairing, merged = partition_target_with_merge(single, partition, source, target,
                                                  k=cfg.cluster.align_csls_k)
    save_partition(run.path("source_partition.tsv"), pairing.source_partition, source.words)
    _save_matrix(run.path("source_centroids.txt"), pairing.source_partition.centroids)
    save_assignments(run.path("target_assignments.tsv"), target.words,
                     pairing.target_assignments)
    return {"artifacts": ["target_assignments.tsv", "source_partition.tsv",
                          "source_centroids.txt"],
            "metrics": {"pair_sizes": pairing.pair_sizes(),
                        "merged_empty_clusters": merged}}


def stage_multi_gan(run: RunDir, cfg: PipelineConfig, seed: int) -> dict:
    source, target = _load_normalized(run, cfg)
    single = load_linear_map(run.path("single_map.txt"))
    pairing = _load_pairing(run, source, target)
    gan_cfg = replace(cfg.multi_gan, seed=seed)
    lambda_fixed = cfg.multi.lambda_fixed if cfg.multi.lambda_mode == "fixed" else None
    pm, criteria = train_multi_gan(single, pairing, source, target, gan_cfg,
                                   lambda_fixed=lambda_fixed)
    artifacts = _save_mapset(run, "multi", "piecewise", list(pm.maps),
                             {"lambdas": list(pm.lambdas), "criteria": criteria})
    return {"artifacts": artifacts,
            "metrics": {"criteria": criteria, "lambdas": list(pm.lambdas)}}


def _write_refine_log(path: Path, steps) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("iteration\tkeep_prob\tobjective\tpairs\n")
        for s in steps:
            f.write(f"{s.iteration}\t{s.keep_prob:.6g}\t{s.objective:.12g}\t{s.pairs}\n")


def stage_refine(run: RunDir, cfg: PipelineConfig, seed: int) -> dict:
    source, target = _load_normalized(run, cfg)
    refine_cfg = replace(cfg.refine, seed=seed)
    metrics: dict = {"mode": cfg.refine_mode}
    artifacts: list[str]
    if cfg.refine_mode == "single":
        single = load_linear_map(run.path("single_map.txt"))
        refined, log = refine_linear(single, source, target, refine_cfg)
        _write_refine_log(run.path("refine_log.tsv"), log)
        artifacts = _save_mapset(run, "final", "single", [refined],
                                 {"objective": log[-1].objective if log else None})
        artifacts.append("refine_log.tsv")
        metrics["objective"] = max(s.objective for s in log)
        return {"artifacts": artifacts, "metrics": metrics}

    meta, maps = _load_mapset(run, "multi")
    pairing = _load_pairing(run, source, target)
    pm = PiecewiseMap(pairing, tuple(maps), tuple(meta["lambdas"]))
    if cfg.refine_mode == "none":
        artifacts = _save_mapset(run, "final", "piecewise", list(pm.maps),
                                 {"lambdas": list(pm.lambdas)})
        return {"artifacts": artifacts, "metrics": metrics}
    if cfg.refine_mode == "global":
        refined, log = global_refine(pm, source, target, refine_cfg)
        _write_refine_log(run.path("refine_log.tsv"), log)
        metrics["objective"] = max(s.objective for s in log)
        extra = ["refine_log.tsv"]
    else:
        refined, logs = local_refine(pm, source, target, refine_cfg)
        extra = []
        for cid, log in sorted(logs.items()):
            name = f"refine_log_{cid:03d}.tsv"
            _write_refine_log(run.path(name), log)
            extra.append(name)
        metrics["refined_subspaces"] = sorted(int(c) for c in logs)
    artifacts = _save_mapset(run, "final", "piecewise", list(refined.maps),
                             {"lambdas": list(refined.lambdas)})
    artifacts.extend(extra)
    return {"artifacts": artifacts, "metrics": metrics}


def stage_induce_dict(run: RunDir, cfg: PipelineConfig) -> dict:
    source, target = _load_normalized(run, cfg)
    fwd, bwd, _ = load_final_mapping(run, source, target)
    dictionary = induce_seed_dictionary(fwd, bwd, source, target,
                                        vocab_limit=cfg.refine.vocab_limit,
                                        k=cfg.refine.csls_k)
    save_dictionary(run.path("seed_dict.tsv"), dictionary, source, target)
    return {"artifacts": ["seed_dict.tsv"], "metrics": {"pairs": len(dictionary)}}


def stage_eval(run: RunDir, cfg: PipelineConfig) -> dict:
    if not cfg.data.gold:
        raise ConfigError("eval stage needs data.gold")
    source, target = _load_normalized(run, cfg)
    fwd, _, pm = load_final_mapping(run, source, target)
    gold = gold_multimap(load_dictionary_tokens(cfg.data.gold))
    artifacts = []
    partition = None
    if cfg.evaluation.kmeans_k > 0:
        partition = kmeans(source.vectors, cfg.evaluation.kmeans_k,
                           seed=derive_seed(cfg.seed, "eval_kmeans", "0"))
    elif cfg.evaluation.per_subspace and run.path("source_partition.tsv").exists():
        partition = _load_partition(run, source)
    if partition is not None:
        report = per_subspace_accuracy(fwd, partition, gold, source, target,
                                       vocab_limit=cfg.evaluation.vocab_limit,
                                       k=cfg.evaluation.csls_k)
        run.path("per_subspace.tsv").write_text(per_subspace_table(report),
                                                encoding="utf-8")
        artifacts.append("per_subspace.tsv")
    else:
        report = evaluate_bli(fwd, gold, source, target, k=cfg.evaluation.csls_k)
    run.path("report.json").write_text(report_to_json(report), encoding="utf-8")
    run.path("report.txt").write_text(format_report(report), encoding="utf-8")
    artifacts.extend(["report.json", "report.txt"])
    return {"artifacts": artifacts,
            "metrics": {"p_at_1": report.p_at_1, "evaluated": report.evaluated,
                        "skipped_oov": report.skipped_oov}}


def run_stage(run: RunDir, cfg: PipelineConfig, name: str, attempt: int = 0) -> dict:
    seed = derive_seed(cfg.seed, name, str(attempt))
    started = time.monotonic()
    if name == "normalize":
        result = stage_normalize(run, cfg)
    elif name == "single_gan":
        result = stage_single_gan(run, cfg, seed)
    elif name == "cluster":
        result = stage_cluster(run, cfg)
    elif name == "align":
        result = stage_align(run, cfg)
    elif name == "multi_gan":
        result = stage_multi_gan(run, cfg, seed)
    elif name == "refine":
        result = stage_refine(run, cfg, seed)
    elif name == "induce_dict":
        result = stage_induce_dict(run, cfg)
    elif name == "eval":
        result = stage_eval(run, cfg)
    else:
        raise ConfigError(f"unknown stage {name!r}")
    run.record_stage(name, seed, result["artifacts"], result["metrics"],
                     time.monotonic() - started)
    return result


def _stage_complete(run: RunDir, name: str) -> bool:
    doc = run.read_manifest()
    stage = doc.get("stages", {}).get(name)
    if not stage or stage.get("status") != "ok":
        return False
    return all(run.path(a).exists() for a in stage.get("artifacts", []))


def run_pipeline(cfg: PipelineConfig, out: str | Path, resume: bool = False) -> RunDir:
    """Run all configured stages in order, restarting from the single map
    with fresh stage seeds when dictionary induction comes up empty."""
    run = RunDir(out)
    run.update_manifest(config_hash=config_digest(cfg), master_seed=cfg.seed,
                        stage_order=list(stages_for(cfg)))
    attempt = 0
    while True:
        name = "?"
        try:
            for name in stages_for(cfg):
                if resume and attempt == 0 and _stage_complete(run, name):
                    continue
                run_stage(run, cfg, name, attempt=attempt)
            run.update_manifest(attempt=attempt)
            return run
        except EmptyDictionaryError as e:
            if attempt >= cfg.restart_budget:
                run.record_failure(name, e)
                raise
            attempt += 1
            resume = False
