"""Run configuration: a JSON file validated against a closed schema."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from . import fatgraph as fg
from .groups import GroupContext


class ConfigError(ValueError):
    pass


_INT_OR_VECTOR = {"oneOf": [{"type": "integer"}, {"type": "array", "items": {"type": "integer"}, "minItems": 1}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["group"],
    "properties": {
        "group": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["U1", "SU2", "SO3"]},
                "m": {"type": "integer", "minimum": 1},
            },
        },
        "graph": {"type": "string", "minLength": 1},
        "measure": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "z": _INT_OR_VECTOR,
                "areas": {
                    "type": "object",
                    "patternProperties": {"^-?[0-9]+$": {"type": "number", "exclusiveMinimum": 0}},
                    "additionalProperties": False,
                },
            },
        },
        "task": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "suite": {"enum": ["heat", "gauge", "moves", "subdivision", "abelian", "sectors"]},
                "trials": {"type": "integer", "minimum": 0},
                "samples": {"type": "integer", "minimum": 1},
                "kind": {"enum": ["config", "loop"]},
                "method": {"enum": ["auto", "exact", "mh"]},
                "burn_in": {"type": "integer", "minimum": 0},
                "thin": {"type": "integer", "minimum": 1},
                "chains": {"type": "integer", "minimum": 1},
                "step": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "genus": {"type": "integer", "minimum": 0},
                "total_area": {"type": "number", "exclusiveMinimum": 0},
                "grid_points": {"type": "integer", "minimum": 2},
                "quadrature_nodes": {"type": "integer", "minimum": 2},
                "z_values": {"type": "array", "items": _INT_OR_VECTOR, "minItems": 1},
                "graphs": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "effort": {"type": "integer", "minimum": 1},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "series_tol": {"type": "number", "exclusiveMinimum": 0},
                "nsigma": {"type": "number", "exclusiveMinimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string", "minLength": 1}},
        },
    },
}


def bundled_graphs() -> list[str]:
    root = resources.files("ymlattice") / "data" / "graphs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_graph(ref: str, base: Path | None = None) -> Path:
    """``bundled:NAME`` names a packaged graph; other paths are relative to ``base``."""
    if ref.startswith("bundled:"):
        name = ref.split(":", 1)[1]
        path = resources.files("ymlattice") / "data" / "graphs" / f"{name}.json"
        if not path.is_file():
            raise ConfigError(f"no bundled graph {name!r}; available: {', '.join(bundled_graphs())}")
        return Path(str(path))
    p = Path(ref)
    if not p.is_absolute() and base is not None:
        p = base / p
    if not p.is_file():
        raise ConfigError(f"graph file {p} not found")
    return p


def load_graph_ref(ref: str, base: Path | None = None):
    try:
        return fg.load_graph(resolve_graph(ref, base))
    except (fg.GraphError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid graph {ref}: {exc}") from exc


@dataclass
class RunConfig:
    raw: dict
    base: Path

    @classmethod
    def from_dict(cls, data: dict, base: Path | None = None) -> "RunConfig":
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {path}: {exc.message}") from exc
        cfg = cls(data, base or Path.cwd())
        cfg.context()  # group parameters are checked eagerly
        cfg.center()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data, path.parent)

    def override(self, seed=None, effort=None, out=None) -> None:
        if seed is not None:
            self.raw["seed"] = int(seed)
        if effort is not None:
            self.raw["effort"] = int(effort)
        if out is not None:
            self.raw.setdefault("output", {})["dir"] = str(out)

    # -- accessors --

    def context(self) -> GroupContext:
        grp = self.raw["group"]
        tol = self.raw.get("tolerances", {}).get("series_tol", 1e-10)
        try:
            return GroupContext(grp["kind"], grp.get("m", 1), series_tol=tol)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def center(self):
        try:
            return self.context().center(self.raw.get("measure", {}).get("z"))
        except ValueError as exc:
            raise ConfigError(f"measure.z: {exc}") from exc

    def graph(self):
        if "graph" not in self.raw:
            raise ConfigError("this command needs a graph")
        graph, areas = load_graph_ref(self.raw["graph"], self.base)
        override = self.raw.get("measure", {}).get("areas")
        if override:
            # keys name any dart of the face; faces not mentioned keep their area
            merged = dict(areas.face_area)
            try:
                for k, v in override.items():
                    merged[graph.face_key(graph.face_of[int(k)])] = float(v)
                areas = fg.AreaMap.for_graph(graph, merged)
            except (fg.GraphError, IndexError) as exc:
                raise ConfigError(f"measure.areas: {exc}") from exc
        return graph, areas

    @property
    def T(self) -> float:
        return float(self.raw.get("measure", {}).get("T", 1.0))

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def effort(self) -> int:
        return int(self.raw.get("effort", 100000))

    @property
    def task(self) -> dict:
        return self.raw.get("task", {})

    @property
    def tolerances(self) -> dict:
        t = {"series_tol": 1e-10, "nsigma": 3.0, "rtol": 1e-8}
        t.update(self.raw.get("tolerances", {}))
        return t

    @property
    def out_dir(self) -> Path:
        d = Path(self.raw.get("output", {}).get("dir", "ym_out"))
        return d if d.is_absolute() else Path.cwd() / d
