"""Experiment configuration: a dataclass read from an INI file.

Example::

    [mesh]
    nx = 12

    [problem]
    name = thermal-block-phi1
    affine_terms = 3

    [sampling]
    seed = 0
    n_train_es = 60
    n_train_eq = 20
    n_test = 20

    [methods]
    names = ATI, ATI+ES, l1-EQ+ES, EIM-EQ+ES, MIO-EQ+ES
    jes = 10, 15
    delta = 1e-2, 1e-3
    m = 4, 8, 16
    eim_q = 20, 40, 80
    n_part = 8
    mio_time_budget = 600
    mio_node_limit = 100

    [output]
    dir = runs/default
    record_runtime = false
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, replace
from pathlib import Path

PROBLEMS = ("thermal-block-phi1", "thermal-block-phi2", "affine-synthetic")
METHODS = ("ATI", "ATI+ES", "l1-EQ+ES", "EIM-EQ+ES", "MIO-EQ+ES")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    nx: int = 12
    problem: str = "thermal-block-phi1"
    affine_terms: int = 3
    seed: int = 0
    n_train_es: int = 60
    n_train_eq: int = 20
    n_test: int = 20
    methods: tuple = METHODS
    jes: tuple = (10, 15)
    delta: tuple = (1e-2, 1e-3)
    m: tuple = (4, 8, 16)
    eim_q: tuple = (20, 40, 80)
    n_part: int = 8
    mio_time_budget: float = 600.0
    mio_node_limit: int = 100
    output_dir: str = "runs/default"
    record_runtime: bool = False

    def __post_init__(self):
        counts = {"nx": self.nx, "affine_terms": self.affine_terms, "n_train_es": self.n_train_es,
                  "n_train_eq": self.n_train_eq, "n_test": self.n_test, "n_part": self.n_part}
        for name, v in counts.items():
            if int(v) < 1:
                raise ConfigError(f"{name} must be >= 1, got {v}")
        if self.n_train_eq > self.n_train_es:
            raise ConfigError("n_train_eq cannot exceed n_train_es (the EQ set is a prefix of the ES set)")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        if any(d <= 0 for d in self.delta):
            raise ConfigError("every delta must be positive")
        for name in ("jes", "m", "eim_q"):
            vals = getattr(self, name)
            if not vals or any(int(v) < 1 for v in vals):
                raise ConfigError(f"{name} needs positive integers")
        if self.mio_time_budget <= 0 or self.mio_node_limit < 1:
            raise ConfigError("MIO budgets must be positive")

    @property
    def train_seed(self) -> int:
        return 2 * self.seed

    @property
    def test_seed(self) -> int:
        return 2 * self.seed + 1

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def to_ini(self) -> str:
        cp = _to_parser(self)
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in cp[sec].items()]
            lines.append("")
        return "\n".join(lines)


_LAYOUT = {
    "mesh": {"nx": int},
    "problem": {"name": str, "affine_terms": int},
    "sampling": {"seed": int, "n_train_es": int, "n_train_eq": int, "n_test": int},
    "methods": {"names": "strs", "jes": "ints", "delta": "floats", "m": "ints", "eim_q": "ints",
                "n_part": int, "mio_time_budget": float, "mio_node_limit": int},
    "output": {"dir": str, "record_runtime": bool},
}
_RENAME = {"name": "problem", "names": "methods", "dir": "output_dir"}


def _parse(kind, raw: str):
    if kind == "ints":
        return tuple(int(s) for s in raw.split(",") if s.strip())
    if kind == "floats":
        return tuple(float(s) for s in raw.split(",") if s.strip())
    if kind == "strs":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if kind is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return kind(raw.strip())


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    kw = {}
    for sec in cp.sections():
        if sec not in _LAYOUT:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp[sec].items():
            if key not in _LAYOUT[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            try:
                kw[_RENAME.get(key, key)] = _parse(_LAYOUT[sec][key], raw)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}") from exc
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text())


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _to_parser(cfg: ExperimentConfig) -> configparser.ConfigParser:
    values = asdict(cfg)
    cp = configparser.ConfigParser()
    for sec, keys in _LAYOUT.items():
        cp[sec] = {k: _fmt(values[_RENAME.get(k, k)]) for k in keys}
    return cp
