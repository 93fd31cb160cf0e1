"""Run configuration: one JSON document with optional sections, strict keys.

Layout (every section optional, unknown keys rejected):

    {
      "seed": 7,
      "generate": { GenConfig fields },
      "train":    { TrainParams fields },
      "split":    { "fraction": 0.5, "seed": 7 },
      "grid":     { GridSpec fields }
    }

Seed precedence: CLI flag > CLICKTREE_SEED env var > config "seed" > default.
Sections that carry their own "seed" keep it; otherwise they inherit the
resolved global seed.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .data_model import ProblemType
from .errors import ConfigInvalid, MissingFile
from .evaluation import GridSpec
from .gbdt import TrainParams
from .synthgen import DEFAULT_TYPE_OFFSETS, GenConfig

DEFAULT_SEED = 7
SEED_ENV_VAR = "CLICKTREE_SEED"

#: Desk-scale defaults for the end-to-end pipeline's training stage; the
#: full TrainParams defaults (5000 iterations at learning rate 0.01 etc.)
#: remain available through the "train" config section.
DEFAULT_PIPELINE_TRAIN = {
    "n_iterations": 1200,
    "learning_rate": 0.1,
    "l2_leaf_reg": 50.0,
    "early_stopping_rounds": 300,
}

_TOP_LEVEL_KEYS = {"seed", "generate", "train", "split", "grid"}


@dataclass
class RunConfig:
    seed: int = DEFAULT_SEED
    generate: GenConfig = field(default_factory=GenConfig)
    train: TrainParams = field(default_factory=TrainParams)
    split_fraction: float = 0.5
    split_seed: int = DEFAULT_SEED
    grid: GridSpec = field(default_factory=GridSpec)


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigInvalid(f"unknown keys in {where}: {sorted(unknown)}")


def _dataclass_from(section: dict, cls, where: str, **fixed):
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(section, names, where)
    return cls(**{**section, **fixed})


def _parse_offsets(raw: dict) -> dict[ProblemType, float]:
    by_value = {t.value: t for t in ProblemType}
    offsets = dict(DEFAULT_TYPE_OFFSETS)
    for key, value in raw.items():
        if key not in by_value:
            raise ConfigInvalid(f"unknown problem type in type_difficulty_offsets: {key!r}")
        offsets[by_value[key]] = float(value)
    return offsets


def resolve_seed(cli_seed: Optional[int], config_seed: Optional[int]) -> int:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigInvalid(f"{SEED_ENV_VAR} must be an integer, got {env!r}")
    if config_seed is not None:
        return config_seed
    return DEFAULT_SEED


def parse_run_config(doc: dict, cli_seed: Optional[int] = None) -> RunConfig:
    _check_keys(doc, _TOP_LEVEL_KEYS, "config")
    seed = resolve_seed(cli_seed, doc.get("seed"))

    gen_section = dict(doc.get("generate", {}))
    if "type_difficulty_offsets" in gen_section:
        gen_section["type_difficulty_offsets"] = _parse_offsets(
            gen_section["type_difficulty_offsets"]
        )
    gen_section.setdefault("seed", seed)
    generate = _dataclass_from(gen_section, GenConfig, "generate")
    generate.validate()

    train_section = dict(doc.get("train", {}))
    train_section.setdefault("seed", seed)
    for key, value in DEFAULT_PIPELINE_TRAIN.items():
        train_section.setdefault(key, value)
    train = _dataclass_from(train_section, TrainParams, "train")
    train.validate()

    split_section = dict(doc.get("split", {}))
    _check_keys(split_section, {"fraction", "seed"}, "split")
    fraction = float(split_section.get("fraction", 0.5))
    split_seed = int(split_section.get("seed", seed))

    grid = _dataclass_from(dict(doc.get("grid", {})), GridSpec, "grid")
    grid.validate()

    return RunConfig(
        seed=seed,
        generate=generate,
        train=train,
        split_fraction=fraction,
        split_seed=split_seed,
        grid=grid,
    )


def load_run_config(path: Optional[str], cli_seed: Optional[int] = None) -> RunConfig:
    doc: dict = {}
    if path is not None:
        if not os.path.isfile(path):
            raise MissingFile(f"no such config file: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigInvalid(f"{path}: config must be a JSON object")
    return parse_run_config(doc, cli_seed)


def load_train_params(path: Optional[str], seed: Optional[int] = None) -> TrainParams:
    """TrainParams from a bare params.json (TrainParams fields only)."""
    if path is None:
        params = TrainParams()
        if seed is not None:
            params = dataclasses.replace(params, seed=seed)
        return params
    if not os.path.isfile(path):
        raise MissingFile(f"no such params file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: invalid JSON: {exc}") from exc
    if seed is not None:
        doc.setdefault("seed", seed)
    params = _dataclass_from(doc, TrainParams, "params")
    params.validate()
    return params


def load_grid_spec(path: Optional[str]) -> GridSpec:
    if path is None:
        return GridSpec()
    if not os.path.isfile(path):
        raise MissingFile(f"no such grid file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: invalid JSON: {exc}") from exc
    grid = _dataclass_from(doc, GridSpec, "grid")
    grid.validate()
    return grid
