"""JSON run configuration with schema validation and defaults."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import jsonschema

from .dataset import WindowSpec
from .embedding import EmbeddingConfig
from .pdv import PdvBetas, PdvKernels, ILLUSTRATIVE_KERNELS
from .synthesis import SynthesisConfig

__all__ = ["DEFAULTS", "SCHEMA", "RunConfig", "load_config"]

_num = {"type": "number"}
_int = {"type": "integer"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "J": {"type": ["integer", "null"], "minimum": 1},
        "synthesis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon_rel": {"type": "number", "exclusiveMinimum": 0},
                "max_iterations": {"type": "integer", "minimum": 0},
                "lbfgs_memory": {"type": "integer", "minimum": 1},
                "modulus_smoothing": {"type": "number", "minimum": 0},
            },
        },
        "embedding": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 1},
                "beta": {"type": "number", "minimum": 0},
                "eta_hat": {"type": "number", "exclusiveMinimum": 0},
                "horizon": {"type": "integer", "minimum": 1},
            },
        },
        "window": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "past_length": {"type": "integer", "minimum": 1},
                "future_length": {"type": "integer", "minimum": 1},
                "stride": {"type": "integer", "minimum": 1},
            },
        },
        "k": {"type": "integer", "minimum": 1},
        "vol_horizons": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "option_maturities": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "moneyness": {"type": "array", "items": _num, "minItems": 1},
        "hedge_vol": {"type": "number", "exclusiveMinimum": 0},
        "strike_anchor": {"enum": ["model", "counterparty"]},
        "pdv": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kernels": {
                    "type": "object",
                    "properties": {
                        "k1_weights": {"type": "array", "items": _num},
                        "k1_rates": {"type": "array", "items": _num},
                        "k2_weights": {"type": "array", "items": _num},
                        "k2_rates": {"type": "array", "items": _num},
                        "dt": _num,
                    },
                    "required": ["k1_weights", "k1_rates", "k2_weights", "k2_rates"],
                },
                "betas": {
                    "type": "object",
                    "patternProperties": {
                        "^(default|[0-9]+)$": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
                    },
                    "additionalProperties": False,
                },
                "burn_in": {"type": "integer", "minimum": 0},
            },
        },
        "date_range": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"start": {"type": "string"}, "end": {"type": "string"}},
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "J": None,
    "synthesis": {"epsilon_rel": 1e-3, "max_iterations": 1000, "lbfgs_memory": 10, "modulus_smoothing": 1e-8},
    "embedding": {"alpha": 1.15, "beta": 0.9, "eta_hat": 0.075, "horizon": 126},
    "window": {"past_length": 126, "future_length": 150, "stride": 1},
    "k": 50_000,
    "vol_horizons": [7, 25, 75, 150],
    "option_maturities": [8, 25, 50, 75, 150],
    "moneyness": [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
    "hedge_vol": 0.2,
    "strike_anchor": "model",
    "pdv": {
        "kernels": ILLUSTRATIVE_KERNELS.to_dict(),
        "betas": {"default": [0.050, -0.13, 0.56]},
        "burn_in": 1000,
    },
    "date_range": {},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "betas":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        jsonschema.validate(self.raw, SCHEMA)
        self.raw = _merge(DEFAULTS, self.raw)
        self._check()

    def _check(self) -> None:
        w, e = self.window, self.embedding
        if e.horizon > w.past_length:
            raise ValueError("embedding horizon exceeds the window past length")
        for name in ("vol_horizons", "option_maturities"):
            if max(self.raw[name]) > w.future_length:
                raise ValueError(f"{name} exceed the window future length {w.future_length}")
        self.synthesis  # validates ranges
        self.kernels

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def J(self):
        return self.raw["J"]

    @property
    def synthesis(self) -> SynthesisConfig:
        return SynthesisConfig(seed=self.seed, **self.raw["synthesis"])

    @property
    def embedding(self) -> EmbeddingConfig:
        return EmbeddingConfig(**self.raw["embedding"])

    @property
    def window(self) -> WindowSpec:
        return WindowSpec(**self.raw["window"])

    @property
    def kernels(self) -> PdvKernels:
        return PdvKernels.from_dict(self.raw["pdv"]["kernels"])

    def betas(self, T: int | None = None) -> PdvBetas:
        table = self.raw["pdv"]["betas"]
        key = str(T) if T is not None and str(T) in table else "default"
        return PdvBetas(*table[key])

    def __getitem__(self, key):
        return self.raw[key]

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.raw, f, indent=2)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig({})
    with open(path) as f:
        return RunConfig(json.load(f))
