"""Pipeline configuration: a flat INI file with one section per stage.

Every hyperparameter the training pipeline consumes appears here with
its default, so a config file only needs the keys it overrides.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .gan import GanConfig
from .refinement import RefineConfig


@dataclass(frozen=True)
class DataConfig:
    source: str = ""
    target: str = ""
    gold: str = ""
    max_vocab: int = 200000
    normalize_iterations: int = 5
    normalize: bool = True


@dataclass(frozen=True)
class ClusterConfig:
    level: str = "last"          # last | second_to_last | <index>
    min_cluster_size: int = 0    # 0 -> max(2 d, 32)
    align_csls_k: int = 10


@dataclass(frozen=True)
class MultiGanConfig:
    lambda_mode: str = "dynamic"  # dynamic | fixed
    lambda_fixed: float = 0.5


@dataclass(frozen=True)
class EvalConfig:
    csls_k: int = 10
    per_subspace: bool = True
    vocab_limit: int = 50000
    kmeans_k: int = 0   # > 0: per-subspace table over a k-means split instead


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    restart_budget: int = 2      # automatic reruns after empty-dictionary failures
    single_restarts: int = 10
    refine_mode: str = "global"  # none | global | local | single
    stop_after: str = ""         # empty = run everything
    data: DataConfig = field(default_factory=DataConfig)
    single_gan: GanConfig = field(default_factory=GanConfig)
    multi_gan_overrides: GanConfig | None = None
    multi: MultiGanConfig = field(default_factory=MultiGanConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    @property
    def multi_gan(self) -> GanConfig:
        return self.multi_gan_overrides if self.multi_gan_overrides is not None \
            else self.single_gan


_SECTIONS = {
    "run": None,
    "data": DataConfig,
    "single_gan": GanConfig,
    "multi_gan": GanConfig,
    "clustering": ClusterConfig,
    "multi": MultiGanConfig,
    "refinement": RefineConfig,
    "evaluation": EvalConfig,
}


def _coerce(value: str, to_type):
    if to_type is bool:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    try:
        return to_type(value)
    except ValueError:
        raise ConfigError(f"expected {to_type.__name__}, got {value!r}") from None


def _apply_section(cfg_obj, parser: configparser.ConfigParser, section: str):
    if not parser.has_section(section):
        return cfg_obj
    known = {f.name: f.type for f in fields(cfg_obj)}
    updates = {}
    for key, raw in parser.items(section):
        if key not in known:
            raise ConfigError(f"[{section}] has unknown key {key!r}")
        current = getattr(cfg_obj, key)
        to_type = type(current) if current is not None else str
        updates[key] = _coerce(raw, to_type)
    return replace(cfg_obj, **updates)


def load_config(path) -> PipelineConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
    cfg = PipelineConfig()
    run_updates = {}
    if parser.has_section("run"):
        allowed = {"seed": int, "restart_budget": int, "single_restarts": int,
                   "refine_mode": str, "stop_after": str}
        for key, raw in parser.items("run"):
            if key not in allowed:
                raise ConfigError(f"[run] has unknown key {key!r}")
            run_updates[key] = _coerce(raw, allowed[key])
    cfg = replace(cfg, **run_updates)
    cfg = replace(cfg, data=_apply_section(cfg.data, parser, "data"))
    cfg = replace(cfg, single_gan=_apply_section(cfg.single_gan, parser, "single_gan"))
    if parser.has_section("multi_gan"):
        base = cfg.multi_gan_overrides or cfg.single_gan
        cfg = replace(cfg, multi_gan_overrides=_apply_section(base, parser, "multi_gan"))
    cfg = replace(cfg, cluster=_apply_section(cfg.cluster, parser, "clustering"))
    cfg = replace(cfg, multi=_apply_section(cfg.multi, parser, "multi"))
    cfg = replace(cfg, refine=_apply_section(cfg.refine, parser, "refinement"))
    cfg = replace(cfg, evaluation=_apply_section(cfg.evaluation, parser, "evaluation"))
    validate_config(cfg)
    return cfg


def validate_config(cfg: PipelineConfig) -> None:
    if cfg.refine_mode not in ("none", "global", "local", "single"):
        raise ConfigError(f"refine_mode must be none|global|local|single, got {cfg.refine_mode!r}")
    if cfg.multi.lambda_mode not in ("dynamic", "fixed"):
        raise ConfigError(f"lambda_mode must be dynamic|fixed, got {cfg.multi.lambda_mode!r}")
    if not 0.0 <= cfg.multi.lambda_fixed <= 1.0:
        raise ConfigError(f"lambda_fixed must be in [0, 1], got {cfg.multi.lambda_fixed}")
    if cfg.single_restarts < 1:
        raise ConfigError(f"single_restarts must be >= 1, got {cfg.single_restarts}")
    if cfg.restart_budget < 0:
        raise ConfigError(f"restart_budget must be >= 0, got {cfg.restart_budget}")
    cfg.single_gan.validate()
    cfg.multi_gan.validate()
    cfg.refine.validate()


def config_digest(cfg: PipelineConfig) -> str:
    """Stable hash of the fully resolved configuration."""
    return hashlib.sha256(repr(cfg).encode("utf-8")).hexdigest()[:16]


def derive_seed(master: int, *labels: str) -> int:
    """Stable per-stage seed so toggling one stage cannot shift another's
    randomness."""
    text = ":".join([str(master), *labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
