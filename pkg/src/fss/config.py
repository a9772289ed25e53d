"""Run configuration: strict JSON parsing with materialized defaults.

Unknown keys are rejected with their dotted path so typos fail loudly;
the echoed config always contains every field so a run can be reproduced
from its own output directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .field import TrainConfig
from .labels import LabelConfig
from .schemes import FssConfig, SchemeConfig, SpatialConfig


@dataclass
class MeshConfig:
    path: str = ""
    region_weights: str = ""  # optional ASCII weight file
    normalize: bool = False
    fin_region: dict | None = None  # {"lo": [x,y,z], "hi": [x,y,z]}

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "region_weights": self.region_weights,
            "normalize": self.normalize,
            "fin_region": self.fin_region,
        }


@dataclass
class EvalConfig:
    n: int = 10000
    normal_resolution: int = 256
    extract_resolution: int = 128
    grid_resolution: int = 128
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])

    def validate(self, path="eval"):
        for name in ("n", "normal_resolution", "extract_resolution", "grid_resolution"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{path}.{name}", "must be >= 2")
        if not self.seeds:
            raise ConfigError(f"{path}.seeds", "need at least one seed")
        return self

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "normal_resolution": self.normal_resolution,
            "extract_resolution": self.extract_resolution,
            "grid_resolution": self.grid_resolution,
            "seeds": list(self.seeds),
        }


@dataclass
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    out_dir: str = "out"

    def validate(self) -> "RunConfig":
        self.scheme.validate("scheme")
        self.train.validate("train")
        self.eval.validate("eval")
        return self

    def to_dict(self) -> dict:
        d = self.scheme.to_dict()
        labels = d.pop("label")
        return {
            "mesh": self.mesh.to_dict(),
            "scheme": d,
            "labels": labels,
            "train": self.train.to_dict(),
            "eval": self.eval.to_dict(),
            "out_dir": self.out_dir,
        }

    def echo(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _take(section: dict, path: str, known: dict) -> dict:
    """Pop known keys with type coercion; reject the rest."""
    out = {}
    for key, value in section.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown key")
        caster = known[key]
        try:
            out[key] = caster(value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.{key}", str(exc)) from exc
    return out


def _expect_dict(value, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(path, "expected an object")
    return value


def _int_list(v):
    return [int(x) for x in v]


def _str_list(v):
    return [str(x) for x in v]


def _dims(v):
    out = tuple(int(x) for x in v)
    if len(out) != 3:
        raise ValueError("need exactly three dims")
    return out


def parse_run_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("", "top-level config must be an object")
    for key in doc:
        if key not in ("mesh", "scheme", "labels", "train", "eval", "out_dir"):
            raise ConfigError(key, "unknown key")

    mesh = MeshConfig(**_take(_expect_dict(doc.get("mesh"), "mesh"), "mesh", {
        "path": str, "region_weights": str, "normalize": bool,
        "fin_region": lambda v: v if v is None else {
            "lo": [float(x) for x in v["lo"]], "hi": [float(x) for x in v["hi"]]},
    }))

    scheme_doc = _expect_dict(doc.get("scheme"), "scheme")
    scheme_known = {"total_budget": int, "spatial": dict, "fss": dict}
    scheme_fields = _take({k: v for k, v in scheme_doc.items() if k in ("total_budget",)},
                          "scheme", scheme_known)
    for key in scheme_doc:
        if key not in scheme_known:
            raise ConfigError(f"scheme.{key}", "unknown key")
    spatial = SpatialConfig(**_take(_expect_dict(scheme_doc.get("spatial"), "scheme.spatial"),
                                    "scheme.spatial", {"sigma": float, "uniform_ratio": float}))
    fss = FssConfig(**_take(_expect_dict(scheme_doc.get("fss"), "scheme.fss"), "scheme.fss", {
        "beta": float, "tau_thin": float, "child_count": int, "counter_fraction": float,
        "counter_gap_near": float, "counter_gap_far": float, "thin_weight": float,
        "anchor_share": float, "ablate": _str_list,
    }))
    labels = LabelConfig(**_take(_expect_dict(doc.get("labels"), "labels"), "labels",
                                 {"delta_omni": float, "delta_z": float}))
    scheme = SchemeConfig(spatial=spatial, fss=fss, label=labels, **scheme_fields)

    train = TrainConfig(**_take(_expect_dict(doc.get("train"), "train"), "train", {
        "learning_rate": float, "steps": int, "beta1": float, "beta2": float, "eps": float,
        "lambda_nsp": float, "lambda_mtl": float, "minibatch": int, "seed": int,
        "variant": str, "grid_dims": _dims, "feature_channels": int,
        "feature_resolution": int, "init_logit": float,
    }))

    eval_cfg = EvalConfig(**_take(_expect_dict(doc.get("eval"), "eval"), "eval", {
        "n": int, "normal_resolution": int, "extract_resolution": int,
        "grid_resolution": int, "seeds": _int_list,
    }))

    out_dir = doc.get("out_dir", "out")
    if not isinstance(out_dir, str):
        raise ConfigError("out_dir", "expected a string")
    return RunConfig(mesh=mesh, scheme=scheme, train=train, eval=eval_cfg,
                     out_dir=out_dir).validate()


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError("", f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON in {path}: {exc}") from exc
    return parse_run_config(doc)
