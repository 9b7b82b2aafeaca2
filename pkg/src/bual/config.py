"""Run configuration: INI file (or a run manifest) + environment + command-line overrides.

Precedence, lowest first: built-in defaults, config file, ``BUAL_OUTPUT_DIR``
(output directory only), explicit overrides.
"""

from __future__ import annotations

import configparser
import io
import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .data import ring_spec
from .errors import ConfigurationError
from .loop import CsvSource, ExperimentPlan
from .nn import OptimizerConfig
from .strategies import STRATEGIES
from .trainer import TrainSchedule

OUTPUT_ENV = "BUAL_OUTPUT_DIR"


def _floats(text):
    return None if text.strip().lower() in ("", "none") else float(text)


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text):
    return tuple(int(t) for t in str(text).split(",") if t.strip())


def _strs(text):
    return tuple(t.strip() for t in str(text).split(",") if t.strip())


# field -> (section, parser, help)
SCHEMA = {
    "openness": ("data", float, "fraction of source classes that are unknown, in [0, 1)"),
    "n_known": ("data", int, "number of known synthetic classes; unknown classes are added to reach the openness"),
    "dim": ("data", int, "synthetic feature dimension (>= 2)"),
    "radius": ("data", float, "radius of the known-class ring"),
    "unknown_radius": ("data", _floats, "radius of the unknown-class ring ('none' = same ring)"),
    "cluster_std": ("data", float, "standard deviation of every synthetic cluster"),
    "n_train_per_class": ("data", int, "synthetic training examples per class, known or unknown"),
    "n_test_per_class": ("data", int, "synthetic test examples per known class"),
    "csv_path": ("data", str, "optional CSV dataset; replaces the synthetic generator"),
    "label_column": ("data", str, "label column of the CSV dataset"),
    "known_classes": ("data", _strs, "comma-separated known labels of the CSV dataset"),
    "test_fraction": ("data", float, "held-out fraction of each known class in the CSV dataset"),
    "hidden": ("train", _ints, "hidden layer widths, comma-separated"),
    "epochs_positive": ("train", int, "positive classifier epochs before scaling"),
    "epochs_negative": ("train", int, "negative fine-tuning epochs before scaling"),
    "epochs_aux": ("train", int, "auxiliary classifier epochs before scaling"),
    "epoch_scale": ("train", float, "multiplier applied to every epoch count"),
    "snapshot_count": ("train", int, "number of negative-head snapshots averaged"),
    "snapshot_interval": ("train", int, "epochs between snapshots (0 = negative epochs / count)"),
    "subset_size": ("train", int, "unlabeled examples drawn for negative fine-tuning"),
    "freeze_backbone": ("train", _bool, "fine-tune only the new head during negative learning"),
    "warm_start": ("train", _bool, "start each round's positive classifier from the previous one"),
    "learning_rate": ("optimizer", float, "SGD learning rate"),
    "momentum": ("optimizer", float, "SGD momentum"),
    "weight_decay": ("optimizer", float, "L2 weight decay"),
    "batch_size": ("optimizer", int, "minibatch size"),
    "strategy": ("experiment", str, f"query strategy for 'run': {', '.join(STRATEGIES)}"),
    "strategies": ("experiment", _strs, "comma-separated strategies for 'compare'"),
    "rounds": ("experiment", int, "query rounds per seed"),
    "budget": ("experiment", int, "examples queried per round"),
    "seeds": ("experiment", _ints, "comma-separated seeds"),
    "initial_per_class": ("experiment", int, "initially labeled examples per known class"),
    "literal_eq4": ("experiment", _bool, "use the raw top-two probability gap as margin score"),
    "full_entropy": ("experiment", _bool, "use full Shannon entropy instead of the top-class term"),
    "output_dir": ("output", str, f"directory for CSVs and manifest (env {OUTPUT_ENV} overrides the file)"),
    "audit": ("output", _bool, "write per-round score audit CSVs"),
    "record_wall_time": ("output", _bool, "fill the wall_s column (makes metrics CSVs non-reproducible)"),
}


@dataclass(frozen=True)
class RunConfig:
    openness: float = 0.5
    n_known: int = 8
    dim: int = 2
    radius: float = 4.0
    unknown_radius: float | None = 16.0
    cluster_std: float = 1.0
    n_train_per_class: int = 200
    n_test_per_class: int = 100
    csv_path: str = ""
    label_column: str = "label"
    known_classes: tuple = ()
    test_fraction: float = 0.2
    hidden: tuple = (64, 64)
    epochs_positive: int = 100
    epochs_negative: int = 100
    epochs_aux: int = 100
    epoch_scale: float = 0.3
    snapshot_count: int = 5
    snapshot_interval: int = 0
    subset_size: int = 200
    freeze_backbone: bool = False
    warm_start: bool = False
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 32
    strategy: str = "B-Margin"
    strategies: tuple = ("Random", "Margin", "B-Margin")
    rounds: int = 8
    budget: int = 40
    seeds: tuple = (0, 1, 2)
    initial_per_class: int = 5
    literal_eq4: bool = False
    full_entropy: bool = False
    output_dir: str = "runs"
    audit: bool = False
    record_wall_time: bool = False

    def sections(self) -> dict:
        """Nested ``{section: {key: value}}`` form, as echoed into manifests."""
        out = {}
        for k, v in asdict(self).items():
            out.setdefault(SCHEMA[k][0], {})[k] = list(v) if isinstance(v, tuple) else v
        return out


def _key(name):
    return f"{SCHEMA[name][0]}.{name}"


def _convert(name, value):
    if not isinstance(value, str):
        if isinstance(value, list):
            value = tuple(value)
        return value
    try:
        return SCHEMA[name][1](value)
    except ValueError as exc:
        raise ConfigurationError(f"{_key(name)}: {exc}", key=_key(name)) from None


def _read_file(path: Path) -> dict:
    if path.suffix == ".json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        sections = doc.get("config", doc)
        pairs = [(sec, k, v) for sec, body in sections.items() for k, v in body.items()]
    else:
        parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
        parser.optionxform = str
        if not parser.read(path, encoding="utf-8"):
            raise ConfigurationError(f"cannot read config file {path}")
        pairs = [(sec, k, v) for sec in parser.sections() for k, v in parser.items(sec)]
    values = {}
    for sec, k, v in pairs:
        if k not in SCHEMA or SCHEMA[k][0] != sec:
            raise ConfigurationError(f"unknown config key '{sec}.{k}'", key=f"{sec}.{k}")
        values[k] = _convert(k, v)
    return values


def validate(cfg: RunConfig) -> RunConfig:
    def bad(name, why):
        raise ConfigurationError(f"{_key(name)} = {getattr(cfg, name)!r}: {why}", key=_key(name))

    for name, want in ((f.name, type(f.default)) for f in fields(cfg) if f.name != "unknown_radius"):
        v = getattr(cfg, name)
        if want is float and isinstance(v, int) and not isinstance(v, bool):
            continue
        if not isinstance(v, want) or (want is int and isinstance(v, bool)):
            bad(name, f"expected {want.__name__}")
    if not 0.0 <= cfg.openness < 1.0:
        bad("openness", "must be in [0, 1)")
    for name in ("n_known", "dim", "n_train_per_class", "rounds", "budget", "initial_per_class",
                 "epochs_positive", "epochs_negative", "epochs_aux", "snapshot_count", "batch_size"):
        if getattr(cfg, name) < 1:
            bad(name, "must be >= 1")
    if cfg.dim < 2:
        bad("dim", "must be >= 2")
    if cfg.strategy not in STRATEGIES:
        bad("strategy", f"choose from {', '.join(STRATEGIES)}")
    if not cfg.strategies or any(s not in STRATEGIES for s in cfg.strategies):
        bad("strategies", f"choose from {', '.join(STRATEGIES)}")
    if not cfg.seeds:
        bad("seeds", "at least one seed is required")
    if not 0.0 < cfg.test_fraction < 1.0:
        bad("test_fraction", "must be in (0, 1)")
    if cfg.csv_path and len(cfg.known_classes) < 2:
        bad("known_classes", "a CSV dataset needs at least 2 known classes")
    if not cfg.hidden or min(cfg.hidden) < 1:
        bad("hidden", "need at least one positive width")
    try:
        to_plan(cfg)
    except ConfigurationError as exc:
        name = exc.key if exc.key in SCHEMA else None
        if name:
            bad(name, str(exc))
        raise
    return cfg


def parse_config(path=None, overrides: dict | None = None, env=None) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    ``path`` may be an INI file or a JSON run manifest. ``overrides`` maps
    field names to raw strings or typed values.
    """
    env = os.environ if env is None else env
    values = {}
    if path:
        values.update(_read_file(Path(path)))
    if env.get(OUTPUT_ENV):
        values["output_dir"] = env[OUTPUT_ENV]
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in SCHEMA:
            raise ConfigurationError(f"unknown config key '{k}'", key=k)
        values[k] = _convert(k, v)
    return validate(RunConfig(**values))


def to_plan(cfg: RunConfig, strategy: str | None = None) -> ExperimentPlan:
    if cfg.csv_path:
        data = CsvSource(cfg.csv_path, cfg.label_column, tuple(cfg.known_classes), cfg.test_fraction)
    else:
        data = ring_spec(n_known=cfg.n_known, openness=cfg.openness, dim=cfg.dim, radius=cfg.radius,
                         unknown_radius=cfg.unknown_radius, cluster_std=cfg.cluster_std,
                         n_train=cfg.n_train_per_class, n_test=cfg.n_test_per_class)
    schedule = TrainSchedule(cfg.epochs_positive, cfg.epochs_negative, cfg.epochs_aux, cfg.epoch_scale,
                             cfg.snapshot_count, cfg.snapshot_interval, cfg.subset_size, tuple(cfg.hidden))
    opt = OptimizerConfig(cfg.learning_rate, cfg.momentum, cfg.weight_decay, cfg.batch_size)
    return ExperimentPlan(data=data, strategy=strategy or cfg.strategy, rounds=cfg.rounds, budget=cfg.budget,
                          seeds=tuple(cfg.seeds), initial_per_class=cfg.initial_per_class, schedule=schedule,
                          optimizer=opt, literal_eq4=cfg.literal_eq4, full_entropy=cfg.full_entropy,
                          freeze_backbone=cfg.freeze_backbone, warm_start=cfg.warm_start)


def dump_ini(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for sec, body in cfg.sections().items():
        parser[sec] = {k: ("none" if v is None else ",".join(map(str, v)) if isinstance(v, list) else str(v).lower()
                           if isinstance(v, bool) else str(v)) for k, v in body.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
