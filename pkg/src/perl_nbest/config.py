"""Pipeline configuration: one ``[perl]`` section of ``key = value`` lines.

Unknown keys are rejected so a typo cannot silently fall back to a
default. Paths are resolved relative to the config file's directory.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .corpus import NOISE_PRESETS
from .errors import ConfigError

SECTION = "perl"


@dataclass(frozen=True)
class PipelineConfig:
    # paths (empty lexicon = bundled table; empty pretrain_sentences = train corpus golds)
    lexicon: str = ""
    train_corpus: str = "data/train.jsonl"
    heldout_corpus: str = "data/heldout.jsonl"
    pretrain_sentences: str = ""
    checkpoint_dir: str = "checkpoints"
    seed: int = 0
    # shared
    n_best: int = 5
    l_max: int = 128
    noise: str = "default"
    # pinyin encoder
    pinyin_dim: int = 64
    pinyin_layers: int = 2
    pinyin_epochs: int = 10
    pinyin_lr: float = 5e-4
    pinyin_batch: int = 16
    # length predictor
    length_dim: int = 64
    length_layers: int = 2
    length_epochs: int = 4
    length_lr: float = 1e-3
    length_batch: int = 32
    # rephraser
    rephraser_dim: int = 64
    rephraser_layers: int = 2
    predictor_layers: int = 1
    gate_hidden: int = 64
    rephraser_epochs: int = 8
    rephraser_lr: float = 1e-3
    rephraser_batch: int = 32
    mask_rate: float = 0.2
    pool: str = "l_max"

    def validate(self):
        def need(cond, key, why):
            if not cond:
                raise ConfigError(f"{key}: {why} (got {getattr(self, key)!r})")

        for f in fields(self):
            v = getattr(self, f.name)
            if f.type == "int" and f.name != "seed":
                need(v >= 1, f.name, "must be a positive integer")
            if f.name.endswith("_lr"):
                need(0 < v < 1, f.name, "must be in (0, 1)")
        need(self.seed >= 0, "seed", "must be non-negative")
        need(0 <= self.mask_rate < 1, "mask_rate", "must be in [0, 1)")
        need(self.noise in NOISE_PRESETS, "noise", f"must be one of {sorted(NOISE_PRESETS)}")
        need(self.pool in ("l_max", "length"), "pool", "must be 'l_max' or 'length'")
        need(self.l_max >= 2, "l_max", "must be at least 2")
        for key in ("pinyin_dim", "length_dim", "rephraser_dim"):
            need(getattr(self, key) % max(1, getattr(self, key) // 16) == 0, key,
                 "must be divisible by its head count (width // 16)")
        return self

    def path(self, key) -> Path:
        return Path(getattr(self, key))

    def ckpt(self, name) -> Path:
        return Path(self.checkpoint_dir) / name


_TYPES = {"int": int, "float": float, "str": str}


def _coerce(key, raw, typ):
    try:
        return _TYPES[typ](raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {typ}, got {raw!r}") from None


def load_config(path=None, overrides=None) -> PipelineConfig:
    """Read ``path`` (optional) and apply ``overrides`` (key -> string)."""
    types = {f.name: f.type for f in fields(PipelineConfig)}
    values = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        extra = [s for s in parser.sections() if s != SECTION]
        if extra:
            raise ConfigError(f"{path}: unknown section(s) {extra}; use [{SECTION}]")
        if parser.has_section(SECTION):
            values.update(parser.items(SECTION))
        base = path.parent
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = str(raw)
    unknown = sorted(set(values) - set(types))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    typed = {k: _coerce(k, v.strip(), types[k]) for k, v in values.items()}
    for key in ("lexicon", "train_corpus", "heldout_corpus", "pretrain_sentences", "checkpoint_dir"):
        if key in typed and typed[key] and path is not None:
            typed[key] = str((base / typed[key]))
    return replace(PipelineConfig(), **typed).validate()


def dump_config(cfg: PipelineConfig) -> str:
    lines = [f"[{SECTION}]"]
    lines += [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"
