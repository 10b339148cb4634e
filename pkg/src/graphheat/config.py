"""Experiment configuration: JSON schema, loading, and object builders."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from .barriers import DensitySpec
from .exhaustion import InitialDatum
from .graph_core import WeightedGraph, make_antitree, make_lattice, make_spherical_tree, parse_rule

KINDS = ("identities", "spectrum", "solve", "certify", "exhaust", "nonuniqueness", "table1")


class ConfigError(Exception):
    pass


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 0}
_rule = {"type": "string", "pattern": "^(const|affine|list):"}
_vertex = {"type": "array", "items": {"type": "integer"}, "minItems": 1}

GRAPH = {"oneOf": [
    {"type": "object", "additionalProperties": False, "required": ["family", "n"],
     "properties": {"family": {"const": "lattice"}, "n": {"type": "integer", "minimum": 1}}},
    {"type": "object", "additionalProperties": False, "required": ["family", "branching"],
     "properties": {"family": {"const": "tree"}, "branching": _rule, "depth": _int}},
    {"type": "object", "additionalProperties": False, "required": ["family", "sphere", "convention"],
     "properties": {"family": {"const": "antitree"}, "sphere": _rule,
                    "convention": {"enum": ["A", "B"]}, "depth": _int}},
]}

DENSITY = {"type": "object", "additionalProperties": False, "required": ["family"],
           "properties": {"family": {"enum": ["power_decay", "outer_degree_scaled", "log_power", "constant"]},
                          "c0": _pos, "alpha": {"type": "number", "minimum": 0}, "rho0": _pos,
                          "beta": _pos, "value": _pos, "metric": {"enum": ["combinatorial", "euclidean"]},
                          "side": {"enum": ["lower", "upper"]}}}

INITIAL = {"type": "object", "additionalProperties": False, "required": ["type"],
           "properties": {"type": {"enum": ["indicator", "shells", "constant"]},
                          "vertices": {"type": "array", "items": _vertex}, "height": _num,
                          "heights": {"type": "array", "items": _num}, "gamma": _num, "rhat": _pos}}

BARRIER = {"type": "object", "additionalProperties": False, "required": ["family"],
           "properties": {"family": {"enum": ["thm34", "thm35", "lattice", "z2_loglog", "antitree_linear"]},
                          "A": _pos, "Q": {"oneOf": [_pos, {"const": "auto"}]}, "rho0": _pos,
                          "beta": {"oneOf": [_pos, {"const": "auto"}]}, "alpha": {"type": "number", "minimum": 0},
                          "K": {"oneOf": [_pos, {"const": "auto"}]}, "log_shift": {"enum": [1, 2]},
                          "q_start": _pos, "gamma_factor": _pos, "scan_radius": {"type": "integer", "minimum": 8}}}

RADIUS = {"type": "number", "exclusiveMinimum": 0}
METRIC = {"enum": ["combinatorial", "euclidean"]}

PARAMS = {
    "identities": {"radius": RADIUS, "samples": {"type": "integer", "minimum": 1},
                   "max_shell": {"type": "integer", "minimum": 2}, "points": {"type": "integer", "minimum": 1}},
    "spectrum": {"radius": RADIUS, "metric": METRIC, "method": {"enum": ["lapack", "jacobi"]}},
    "solve": {"radius": RADIUS, "metric": METRIC, "T": _pos, "dt": _pos,
              "solver": {"enum": ["spectral", "euler"]}, "initial": INITIAL, "boundary": _num, "source": _num},
    "certify": {"barrier": BARRIER, "radius": RADIUS, "metric": METRIC,
                "time_nodes": {"type": "integer", "minimum": 2}},
    "exhaust": {"initial": INITIAL, "j_list": {"type": "array", "items": RADIUS, "minItems": 1},
                "T": _pos, "dt": _pos, "solver": {"enum": ["spectral", "euler", "radial"]},
                "metric": METRIC, "mode": {"enum": ["shift", "boundary"]}, "c": _num,
                "profile_times": {"type": "array", "items": _num}},
    "nonuniqueness": {"initial": INITIAL, "c": _num, "j_list": {"type": "array", "items": RADIUS, "minItems": 1},
                      "T": _pos, "dt": _pos, "t0": _pos, "eps": _pos,
                      "solver": {"enum": ["spectral", "euler", "radial"]}, "svg": {"type": "boolean"}},
    "table1": {"rows": {"type": "array", "items": {"type": "string"}}, "tree_rho0_scale": _pos,
               "antitree_convention": {"enum": ["A", "B"]}},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "graph": GRAPH,
        "density": DENSITY,
        "params": {"type": "object"},
        "output": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "self_test_corrupt": {"enum": ["weight", "measure"]},
        "description": {"type": "string"},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": k}}},
         "then": {"properties": {"params": {"type": "object", "additionalProperties": False,
                                            "properties": props}}}}
        for k, props in PARAMS.items()
    ] + [
        {"if": {"properties": {"kind": {"not": {"const": "table1"}}}},
         "then": {"required": ["graph"]}},
    ],
}


def validate(config: dict) -> dict:
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    return config


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return validate(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def preset_names() -> list[str]:
    root = resources.files("graphheat") / "presets"
    return sorted(Path(p.name).stem for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    path = resources.files("graphheat") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return validate(json.loads(path.read_text(encoding="utf-8")))


def build_graph(desc: dict) -> WeightedGraph:
    fam = desc["family"]
    if fam == "lattice":
        return make_lattice(desc["n"])
    if fam == "tree":
        return make_spherical_tree(parse_rule(desc["branching"]), desc.get("depth", 64), desc["branching"])
    return make_antitree(parse_rule(desc["sphere"]), desc["convention"], desc.get("depth", 64), desc["sphere"])


def build_density(desc: dict | None) -> DensitySpec:
    if desc is None:
        return DensitySpec.constant(1.0)
    d = dict(desc)
    fam, side = d.pop("family"), d.pop("side", None)
    try:
        if fam == "power_decay":
            return DensitySpec.power_decay(d.get("c0", 1.0), d.get("alpha", 0.0),
                                           d.get("metric", "combinatorial"), side)
        if fam == "outer_degree_scaled":
            return DensitySpec.outer_degree_scaled(d.get("rho0", 1.0), side or "lower")
        if fam == "log_power":
            return DensitySpec.log_power(d.get("rho0", 1.0), d.get("beta", 1.0), side or "lower")
        return DensitySpec.constant(d.get("value", 1.0), side)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_initial(desc: dict) -> InitialDatum:
    gamma = desc.get("gamma", 0.0)
    if desc["type"] == "indicator":
        verts = desc.get("vertices")
        if not verts:
            raise ConfigError("indicator data need vertices")
        return InitialDatum.indicator(gamma, verts, desc.get("height", 1.0), desc.get("rhat", 1.0))
    if desc["type"] == "shells":
        return InitialDatum.shells(gamma, desc.get("heights", []), desc.get("rhat"))
    return InitialDatum.constant(gamma)
