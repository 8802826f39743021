"""Experiment configuration: one JSON file drives the CLI.

The file has four sections. `dataset` points at a rating file (or asks for
the synthetic generator), `split` defines the holdout, `model` picks a
model family and its knobs, `evaluation` sets the metric parameters. Any
numeric model knob may be a list, which turns the config into a grid for
`bemf grid-search`; everything else treats lists as an error.

Validation is eager and fails fast with the offending key path in the
message, so a typo dies before hours of training do.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from .baselines import KNNConfig, MFBaselineConfig
from .model import Hyperparams
from .scores import ScoreSet

MODEL_TYPES = ("bemf", "pmf", "biasedmf", "knn-user", "knn-item")

# knobs each model family accepts, with defaults supplied by the dataclasses
MODEL_FIELDS = {
    "bemf": ("factors", "learning_rate", "regularization", "iterations",
             "activation", "seed"),
    "pmf": ("factors", "learning_rate", "regularization", "iterations", "seed"),
    "biasedmf": ("factors", "learning_rate", "regularization", "iterations",
                 "seed"),
    "knn-user": ("neighbors", "cache_similarities"),
    "knn-item": ("neighbors", "cache_similarities"),
}

# model knobs that may carry a list of values for grid search
GRIDABLE = ("factors", "learning_rate", "regularization", "iterations",
            "seed", "neighbors")

DEFAULT_THRESHOLDS = [round(0.1 * i, 1) for i in range(10)]

SYNTHETIC_FIELDS = ("num_users", "num_items", "num_scores", "rank",
                    "density", "noise", "seed")


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the key path."""


def _as_dict(value, path):
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object")
    return value


def _as_bool(value, path):
    if not isinstance(value, bool):
        raise ConfigError(f"{path}: expected true or false")
    return value


def _as_number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    return value


def _as_string(value, path):
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string")
    return value


@dataclass
class ExperimentConfig:
    """Validated view over the raw JSON dict."""
    raw: dict

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(raw, source=str(path))

    @classmethod
    def from_dict(cls, raw: dict, source: str = "config") -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: top level must be an object")
        cfg = cls(raw=raw)
        cfg.validate()
        return cfg

    def to_json(self) -> str:
        """Canonical serialization; parsing it back gives an equal config."""
        return json.dumps(self.raw, sort_keys=True, indent=2)

    # -- validation -----------------------------------------------------

    def validate(self) -> None:
        known = {"dataset", "split", "model", "evaluation", "output_dir"}
        for key in self.raw:
            if key not in known:
                raise ConfigError(f"{key}: unknown section")
        self._validate_dataset()
        self._validate_split()
        self._validate_model()
        self._validate_evaluation()
        if "output_dir" in self.raw:
            _as_string(self.raw["output_dir"], "output_dir")

    def _validate_dataset(self) -> None:
        if "dataset" not in self.raw:
            raise ConfigError("dataset: section is required")
        ds = _as_dict(self.raw["dataset"], "dataset")
        has_path = "path" in ds
        has_synth = "synthetic" in ds
        if has_path == has_synth:
            raise ConfigError(
                "dataset: exactly one of 'path' or 'synthetic' is required")
        known = {"path", "synthetic", "separator", "header", "score_set"}
        for key in ds:
            if key not in known:
                raise ConfigError(f"dataset.{key}: unknown key")
        if has_path:
            _as_string(ds["path"], "dataset.path")
            if "score_set" not in ds:
                raise ConfigError("dataset.score_set: required with dataset.path")
            try:
                ScoreSet.from_spec(ds["score_set"])
            except ValueError as exc:
                raise ConfigError(f"dataset.score_set: {exc}") from None
        else:
            synth = _as_dict(ds["synthetic"], "dataset.synthetic")
            for key in synth:
                if key not in SYNTHETIC_FIELDS:
                    raise ConfigError(f"dataset.synthetic.{key}: unknown key")
                _as_number(synth[key], f"dataset.synthetic.{key}")
            if "score_set" in ds:
                raise ConfigError(
                    "dataset.score_set: implied by dataset.synthetic")
        sep = ds.get("separator", "tab")
        if sep not in ("tab", "comma"):
            raise ConfigError(
                f"dataset.separator: expected 'tab' or 'comma', got {sep!r}")
        if "header" in ds:
            _as_bool(ds["header"], "dataset.header")

    def _validate_split(self) -> None:
        if "split" not in self.raw:
            raise ConfigError("split: section is required")
        sp = _as_dict(self.raw["split"], "split")
        by_ratio = "test_ratio" in sp
        by_files = "train_path" in sp or "test_path" in sp
        if by_ratio == by_files:
            raise ConfigError("split: give either test_ratio+seed "
                              "or train_path+test_path")
        if by_ratio:
            ratio = _as_number(sp["test_ratio"], "split.test_ratio")
            if not 0.0 < ratio < 1.0:
                raise ConfigError(
                    f"split.test_ratio: must be in (0, 1), got {ratio}")
            seed = sp.get("seed", 0)
            if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
                raise ConfigError("split.seed: expected an integer >= 0")
            for key in sp:
                if key not in ("test_ratio", "seed"):
                    raise ConfigError(f"split.{key}: unknown key")
        else:
            for key in ("train_path", "test_path"):
                if key not in sp:
                    raise ConfigError(f"split.{key}: required")
                _as_string(sp[key], f"split.{key}")
            for key in sp:
                if key not in ("train_path", "test_path"):
                    raise ConfigError(f"split.{key}: unknown key")
            if "synthetic" in self.raw["dataset"]:
                raise ConfigError(
                    "split: synthetic datasets require a test_ratio split")

    def _validate_model(self) -> None:
        if "model" not in self.raw:
            raise ConfigError("model: section is required")
        model = _as_dict(self.raw["model"], "model")
        mtype = model.get("type")
        if mtype not in MODEL_TYPES:
            raise ConfigError(
                f"model.type: expected one of {list(MODEL_TYPES)}, got {mtype!r}")
        allowed = MODEL_FIELDS[mtype]
        for key, value in model.items():
            if key == "type":
                continue
            if key not in allowed:
                raise ConfigError(
                    f"model.{key}: not a knob of model type {mtype!r}")
            if isinstance(value, list):
                if key not in GRIDABLE:
                    raise ConfigError(f"model.{key}: cannot be a grid axis")
                if not value:
                    raise ConfigError(f"model.{key}: grid axis must not be empty")
                for j, v in enumerate(value):
                    _as_number(v, f"model.{key}[{j}]")
        # a scalar config must instantiate cleanly
        if not self.grid_axes():
            try:
                self.model_config()
            except ValueError as exc:
                raise ConfigError(f"model: {exc}") from None

    def _validate_evaluation(self) -> None:
        if "evaluation" not in self.raw:
            return
        ev = _as_dict(self.raw["evaluation"], "evaluation")
        known = {"top_n", "like_threshold", "reliability_thresholds",
                 "reliability_addon", "addon"}
        for key in ev:
            if key not in known:
                raise ConfigError(f"evaluation.{key}: unknown key")
        if "top_n" in ev:
            n = ev["top_n"]
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise ConfigError("evaluation.top_n: expected an integer >= 1")
        if "like_threshold" in ev:
            _as_number(ev["like_threshold"], "evaluation.like_threshold")
        if "reliability_thresholds" in ev:
            ts = ev["reliability_thresholds"]
            if not isinstance(ts, list) or not ts:
                raise ConfigError(
                    "evaluation.reliability_thresholds: expected a non-empty list")
            for j, t in enumerate(ts):
                t = _as_number(t, f"evaluation.reliability_thresholds[{j}]")
                if not 0.0 <= t <= 1.0:
                    raise ConfigError(
                        f"evaluation.reliability_thresholds[{j}]: "
                        f"must be in [0, 1], got {t}")
        if "reliability_addon" in ev:
            _as_bool(ev["reliability_addon"], "evaluation.reliability_addon")
        if "addon" in ev:
            addon = _as_dict(ev["addon"], "evaluation.addon")
            valid = ("variant", "factors", "learning_rate", "regularization",
                     "iterations", "seed")
            for key in addon:
                if key not in valid:
                    raise ConfigError(f"evaluation.addon.{key}: unknown key")
            try:
                self.addon_config()
            except ValueError as exc:
                raise ConfigError(f"evaluation.addon: {exc}") from None

    # -- typed accessors ---------------------------------------------------

    @property
    def dataset_section(self) -> dict:
        return self.raw["dataset"]

    @property
    def split_section(self) -> dict:
        return self.raw["split"]

    @property
    def model_section(self) -> dict:
        return self.raw["model"]

    @property
    def evaluation_section(self) -> dict:
        return self.raw.get("evaluation", {})

    @property
    def model_type(self) -> str:
        return self.model_section["type"]

    @property
    def output_dir(self) -> str:
        return self.raw.get("output_dir", "bemf_out")

    @property
    def separator(self) -> str:
        return {"tab": "\t", "comma": ","}[self.dataset_section.get("separator", "tab")]

    @property
    def header(self) -> bool:
        return bool(self.dataset_section.get("header", False))

    def score_set(self) -> ScoreSet | None:
        """Score set for file datasets; synthetic ones carry their own."""
        if "score_set" in self.dataset_section:
            return ScoreSet.from_spec(self.dataset_section["score_set"])
        return None

    @property
    def top_n(self) -> int:
        return int(self.evaluation_section.get("top_n", 10))

    @property
    def like_threshold(self) -> float | None:
        v = self.evaluation_section.get("like_threshold")
        return None if v is None else float(v)

    @property
    def reliability_thresholds(self) -> list:
        return [float(t) for t in self.evaluation_section.get(
            "reliability_thresholds", DEFAULT_THRESHOLDS)]

    @property
    def reliability_addon(self) -> bool:
        return bool(self.evaluation_section.get("reliability_addon", False))

    def addon_config(self) -> MFBaselineConfig:
        addon = dict(self.evaluation_section.get("addon", {}))
        addon.setdefault("variant", "pmf")
        return MFBaselineConfig(**addon)

    def model_config(self, overrides: dict | None = None):
        """Instantiate the typed model config (grid axes must be resolved).

        Returns a Hyperparams, MFBaselineConfig or KNNConfig depending on
        model.type.
        """
        knobs = {k: v for k, v in self.model_section.items() if k != "type"}
        if overrides:
            knobs.update(overrides)
        for key, value in knobs.items():
            if isinstance(value, list):
                raise ConfigError(
                    f"model.{key}: grid axis given; use grid-search or pass "
                    "an override")
        mtype = self.model_type
        if mtype == "bemf":
            return Hyperparams(**knobs)
        if mtype in ("pmf", "biasedmf"):
            return MFBaselineConfig(variant=mtype, **knobs)
        return KNNConfig(variant=mtype.removeprefix("knn-"), **knobs)

    # -- grid expansion ----------------------------------------------------

    def grid_axes(self) -> list:
        """(knob, values) pairs for list-valued knobs, knob-name order."""
        return [(k, list(v)) for k, v in sorted(self.model_section.items())
                if isinstance(v, list)]

    def grid_size(self) -> int:
        size = 1
        for _, values in self.grid_axes():
            size *= len(values)
        return size

    def grid_cells(self):
        """Yield (index, {knob: value}) in deterministic order.

        The rightmost axis (by knob name) varies fastest, like an odometer,
        so cell index i is reproducible across runs and machines.
        """
        axes = self.grid_axes()
        if not axes:
            yield 0, {}
            return
        names = [k for k, _ in axes]
        for idx, combo in enumerate(itertools.product(*(v for _, v in axes))):
            yield idx, dict(zip(names, combo))
