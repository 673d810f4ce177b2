"""Experiment configuration: INI file sections plus command-line overrides.

Example file::

    [graph]
    kind = torus
    d = 2
    n = 20

    [sim]
    alpha = 0.4
    t_max = 10000
    seeds = 1, 2, 3
    t0 = 1.5625
    ratio = 2

    [solver]
    tol = 1e-12
    damping = 0.5

    [analysis]
    window_fraction = 0.5
    delta_threshold = 0.5
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import graph as graphs

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


# builder name -> (callable, {param: type})
BUILDERS = {
    "cycle": (graphs.build_cycle, {"n": int}),
    "path": (graphs.build_path, {"n_edges": int}),
    "star": (graphs.build_star, {"leaves": int}),
    "torus": (graphs.build_torus, {"d": int, "n": int}),
    "grid": (graphs.build_grid, {"d": int, "n": int}),
    "random_regular": (graphs.build_random_regular, {"n": int, "delta": int, "seed": int}),
    "edgelist": (graphs.read_edge_list, {"path": str}),
}


def parse_graph_spec(text: str) -> dict:
    """``"torus:d=2,n=20"`` -> ``{"kind": "torus", "d": 2, "n": 20}``."""
    kind, _, rest = text.partition(":")
    spec: dict = {"kind": kind.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"graph parameter {item!r} is not key=value")
        spec[key.strip()] = value.strip()
    return normalize_graph_spec(spec)


def normalize_graph_spec(spec: dict) -> dict:
    kind = spec.get("kind")
    if kind not in BUILDERS:
        raise ConfigError(f"unknown graph kind {kind!r}; choose from {sorted(BUILDERS)}")
    _, params = BUILDERS[kind]
    out = {"kind": kind}
    for name, typ in params.items():
        if name not in spec:
            raise ConfigError(f"graph kind {kind!r} needs parameter {name!r}")
        try:
            out[name] = typ(spec[name])
        except ValueError:
            raise ConfigError(f"graph parameter {name}={spec[name]!r} is not {typ.__name__}") from None
    extra = set(spec) - set(out)
    if extra:
        raise ConfigError(f"unexpected graph parameters {sorted(extra)} for kind {kind!r}")
    if kind == "edgelist":
        path = Path(out["path"])
        if not path.is_file():
            raise ConfigError(f"edge-list file {path} does not exist")
        out["sha256"] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def build_graph(spec: dict) -> graphs.Graph:
    builder, params = BUILDERS[spec["kind"]]
    try:
        return builder(**{k: spec[k] for k in params})
    except graphs.GraphError as exc:
        raise ConfigError(f"cannot build graph {spec}: {exc}") from exc


@dataclass
class ExperimentConfig:
    graph: dict | None = None
    alpha: float | None = None
    t_max: float = 1e4
    seeds: list[int] = field(default_factory=list)
    t0: float = 1.0
    ratio: float = 2.0
    override_strong_alpha: bool = False
    tol: float = 1e-12
    damping: float = 0.5
    max_iter: int = 100_000
    restarts: int = 0
    restart_seed: int = 0
    agree_tol: float = 1e-8
    window_fraction: float = 0.5
    delta_threshold: list[float] = field(default_factory=lambda: [0.5])
    out: str = "runs"

    def check_alpha(self) -> None:
        if self.alpha is None:
            raise ConfigError("alpha is required")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.alpha >= 1 and not self.override_strong_alpha:
            raise ConfigError(
                f"alpha={self.alpha} >= 1 is strong reinforcement; the homogenization results "
                "only cover weak reinforcement (alpha < 1). Pass --override-strong-alpha to run anyway."
            )

    def require_graph(self) -> dict:
        if self.graph is None:
            raise ConfigError("a graph is required (--graph or [graph] section)")
        return self.graph

    def resolved(self, keys) -> dict:
        full = asdict(self)
        return {k: full[k] for k in keys}


def _split_list(text: str, typ):
    try:
        return [typ(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


_SECTION_KEYS = {
    "sim": {
        "alpha": float, "t_max": float, "seeds": lambda s: _split_list(s, int),
        "t0": float, "ratio": float, "override_strong_alpha": "bool",
    },
    "solver": {
        "tol": float, "damping": float, "max_iter": int, "restarts": int,
        "restart_seed": int, "agree_tol": float,
    },
    "analysis": {"window_fraction": float, "delta_threshold": lambda s: _split_list(s, float)},
    "output": {"dir": str},
}


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section == "graph":
            cfg.graph = normalize_graph_spec(dict(parser[section]))
            continue
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        allowed = _SECTION_KEYS[section]
        for key, raw in parser[section].items():
            if key not in allowed:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            conv = allowed[key]
            try:
                if conv == "bool":
                    value = parser[section].getboolean(key)
                else:
                    value = conv(raw)
            except ValueError:
                raise ConfigError(f"{path}: bad value {raw!r} for {section}.{key}") from None
            setattr(cfg, "out" if key == "dir" else key, value)
    return cfg


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
