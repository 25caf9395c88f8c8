"""Flat key = value experiment configs with [section] headers, and run
manifests. The config format is deliberately line-diffable; its sha256 hash
is stamped into every output file so each emitted number traces back to the
exact configuration (and snapshot seed) that produced it."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError

PIPELINES = ("surface", "scales", "fs", "rw", "tension", "levellines", "endtoend")

_DEFAULTS = {
    "model": {"p": 2.0, "beta": 2.0, "boundary": "all:0", "floor": "none",
              "ceiling": "none"},
    "lattice": {"L": 64},
    "run": {"sweeps": 2000, "burnin": 200, "thinning": 10, "seed": 1,
            "levels": 1, "extended": False},
    "pipeline": {"name": "surface"},
    "rw": {"q": 0.25, "tilt_n": 3000.0, "law": "basic", "kmax": 6,
           "samples": 4000},
    "fs": {"sigma": 1.0, "dt": 1e-3, "steps": 200000, "paths": 50, "x0": 1.0},
    "tension": {"beta": 2.5, "n": 0},
    "out": {"dir": "out"},
}

_TYPES = {
    ("model", "p"): float, ("model", "beta"): float,
    ("lattice", "L"): int,
    ("run", "sweeps"): int, ("run", "burnin"): int, ("run", "thinning"): int,
    ("run", "seed"): int, ("run", "levels"): int, ("run", "extended"): bool,
    ("rw", "q"): float, ("rw", "tilt_n"): float, ("rw", "kmax"): int,
    ("rw", "samples"): int,
    ("fs", "sigma"): float, ("fs", "dt"): float, ("fs", "steps"): int,
    ("fs", "paths"): int, ("fs", "x0"): float,
    ("tension", "beta"): float, ("tension", "n"): int,
}


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)

    @classmethod
    def default(cls, **overrides):
        sections = {s: dict(kv) for s, kv in _DEFAULTS.items()}
        cfg = cls(sections=sections)
        for dotted, value in overrides.items():
            section, _, key = dotted.partition(".")
            cfg.set(section, key, value)
        return cfg

    @classmethod
    def parse(cls, text):
        sections = {s: dict(kv) for s, kv in _DEFAULTS.items()}
        current = None
        for i, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
                sections.setdefault(current, {})
                continue
            if "=" not in s:
                raise ConfigError(f"line {i}: expected key = value, got {s!r}")
            if current is None:
                raise ConfigError(f"line {i}: key before any [section]")
            k, _, v = s.partition("=")
            sections[current][k.strip()] = _coerce(current, k.strip(), v.strip())
        cfg = cls(sections=sections)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.parse(fh.read())

    def get(self, section, key):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"missing config key [{section}] {key}") from None

    def set(self, section, key, value):
        self.sections.setdefault(section, {})[key] = _coerce(section, key, value)

    def validate(self):
        name = self.get("pipeline", "name")
        if name not in PIPELINES:
            raise ConfigError(f"unknown pipeline {name!r}; choose from {PIPELINES}")
        if self.get("run", "sweeps") <= self.get("run", "burnin"):
            raise ConfigError("need sweeps > burnin")
        return self

    def canonical_text(self, exclude=()):
        lines = []
        for section in sorted(self.sections):
            if section in exclude:
                continue
            lines.append(f"[{section}]")
            for k in sorted(self.sections[section]):
                v = self.sections[section][k]
                lines.append(f"{k} = {_fmt(v)}")
            lines.append("")
        return "\n".join(lines)

    def hash(self):
        # the output directory is provenance-neutral: replays into another
        # directory must reproduce the same stamped hash
        return hashlib.sha256(
            self.canonical_text(exclude=("out",)).encode()).hexdigest()[:16]

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(self.canonical_text())


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(section, key, value):
    ty = _TYPES.get((section, key))
    if isinstance(value, str):
        if ty is bool:
            return value.lower() in ("1", "true", "yes", "on")
        if ty is not None:
            try:
                return ty(value)
            except ValueError:
                raise ConfigError(f"[{section}] {key}: cannot parse {value!r}") from None
        return value
    return ty(value) if ty is not None and not isinstance(value, bool) else value


def model_params_from(cfg: ExperimentConfig):
    from .surface import ModelParams
    bspec = cfg.get("model", "boundary")
    if bspec.startswith("all:"):
        boundary_spec = ("all", int(bspec.split(":", 1)[1]))
    elif bspec.startswith("split-arc:"):
        boundary_spec = ("split-arc", tuple(bspec.split(":", 1)[1].split(",")))
    else:
        raise ConfigError(f"unsupported boundary spec {bspec!r}")
    floor = cfg.get("model", "floor")
    floor = None if floor == "none" else int(floor)
    ceiling = cfg.get("model", "ceiling")
    ceiling = None if ceiling == "none" else int(ceiling)
    return ModelParams(p=cfg.get("model", "p"), beta=cfg.get("model", "beta"),
                       boundary_spec=boundary_spec, floor_spec=floor,
                       ceiling_spec=ceiling)


@dataclass
class RunManifest:
    config_hash: str
    pipeline: str
    module_version: str
    wall_clock_s: float
    artifacts: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def comparable(self):
        """Everything except the wall clock; replays must reproduce this."""
        return {"config_hash": self.config_hash, "pipeline": self.pipeline,
                "module_version": self.module_version,
                "artifacts": sorted(self.artifacts), "summary": self.summary}

    def save(self, path):
        payload = dict(self.comparable())
        payload["wall_clock_s"] = round(self.wall_clock_s, 3)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def check_artifacts(self, base_dir):
        missing = [a for a in self.artifacts
                   if not os.path.exists(os.path.join(base_dir, a))]
        if missing:
            raise ConfigError(f"manifest lists missing artifacts: {missing}")
        return True
