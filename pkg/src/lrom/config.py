"""Experiment configuration: JSON schema validation and conversion to RomConfig."""

import copy
import json
import logging
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .rom import RomConfig

log = logging.getLogger(__name__)

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_expr = {"type": ["string", "number"]}
_seed = {"type": "integer", "minimum": 0}
_kind = {"enum": ["latin_hypercube", "uniform_random", "tensor_grid"]}
_edges = {"type": "array", "items": {"enum": ["left", "right", "bottom", "top"]}, "uniqueItems": True}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj({
    "geometry": _obj({
        "box": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
        "parameter_domain": _obj({
            "lower": {"type": "array", "items": _num, "minItems": 1},
            "upper": {"type": "array", "items": _num, "minItems": 1},
        }, ["lower", "upper"]),
        "holes": {"type": "array", "items": _obj({
            "center": {"type": "array", "items": _expr, "minItems": 2, "maxItems": 2},
            "radius": _expr,
        }, ["center", "radius"])},
    }, ["box", "parameter_domain"]),
    "problem": _obj({
        "kind": {"enum": ["poisson", "elasticity"]},
        "source": _expr,
        "body_force": {"type": "array", "items": _expr, "minItems": 2, "maxItems": 2},
        "young_E": {"type": "number", "exclusiveMinimum": 0},
        "poisson_nu": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "dirichlet": _edges,
    }, ["kind"]),
    "mesh": _obj({"nx": {"type": "integer", "minimum": 2}, "ny": {"type": "integer", "minimum": 2},
                  "quadrature_depth": _pos_int}, ["nx", "ny"]),
    "sampling": _obj({
        "n_train_deim": _pos_int, "n_train_rb": _pos_int, "n_test": _pos_int,
        "seed_deim": _seed, "seed_rb": _seed, "seed_test": _seed,
        "kind_deim": _kind, "kind_rb": _kind, "kind_test": _kind,
    }, ["n_train_deim", "n_train_rb"]),
    "tolerances": _obj({"eps_pod": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "eps_pod_d": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}},
                       ["eps_pod", "eps_pod_d"]),
    "clustering": _obj({"n_clusters": _pos_int, "n_clusters_deim": _pos_int, "seed": _seed,
                        "elbow_k": {"type": "array", "items": _pos_int, "minItems": 1}},
                       ["n_clusters", "n_clusters_deim"]),
    "rom": _obj({"error_norm": {"enum": ["l2", "h1"]}, "exact_snapshots": {"type": "boolean"},
                 "train_global": {"type": "boolean"}}),
    "output": _obj({"model_dir": {"type": "string"}, "report_dir": {"type": "string"}}),
}, ["geometry", "problem", "mesh", "sampling", "tolerances", "clustering"])

DEFAULT_TEST = {"n_test": 100, "seed_test": 3, "kind_test": "uniform_random"}


def validate(doc):
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    d, u = doc["geometry"]["parameter_domain"]["lower"], doc["geometry"]["parameter_domain"]["upper"]
    if len(d) != len(u):
        raise ConfigError("parameter_domain lower/upper lengths differ")
    return doc


def apply_seed_override(doc, seed):
    """Replace every seed with one derived from ``seed`` (DEIM, RB, test, clustering)."""
    doc = copy.deepcopy(doc)
    s = int(seed)
    doc["sampling"].update({"seed_deim": s, "seed_rb": s + 1, "seed_test": s + 2})
    doc["clustering"]["seed"] = s
    return doc


def load(path, seed_override=None):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate(doc)
    if seed_override is not None:
        doc = apply_seed_override(doc, seed_override)
    return doc


def to_rom_config(doc, threads=1):
    return RomConfig.from_dict(doc, threads=threads)


def test_spec(doc):
    s = {**DEFAULT_TEST, **{k: v for k, v in doc["sampling"].items() if k in DEFAULT_TEST}}
    return s["kind_test"], int(s["n_test"]), int(s["seed_test"])


def builtin(name):
    """Bundled benchmark configs: ``poisson_1d``, ``poisson_2d``, ``plate``."""
    try:
        text = resources.files("lrom").joinpath("configs", f"{name}.json").read_text()
    except (FileNotFoundError, OSError) as exc:
        raise ConfigError(f"no bundled config named {name!r}") from exc
    return validate(json.loads(text))
