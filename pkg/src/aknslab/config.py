"""Experiment configuration: one JSON-serializable tree per run.

Configs round-trip bit-identically through to_json/from_json, every run
writes the resolved config beside its outputs, and environment variables
prefixed AKNSLAB_ override the scalar run controls.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .profiles import (
    constant,
    gaussian,
    mean_zero_even,
    mean_zero_odd,
    plane_wave,
    random_schwartz,
)
from .spectral import Field, Grid

ENV_PREFIX = "AKNSLAB_"

PROFILES = ("gaussian", "mode", "constant", "appendix_even", "appendix_odd",
            "random", "file")


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    length: float = 64.0      # box length, spatial units
    points: int = 256         # grid points, power of two


@dataclass
class DataConfig:
    profile: str = "gaussian"   # one of PROFILES
    amplitude: float = 0.1
    width: float = 1.0          # gaussian width, spatial units
    xi0: float = 0.0            # mode frequency, must sit on the lattice
    sign: int = 1               # +1 defocusing, -1 focusing
    norm: float = 0.1           # target H^(-1/4) size of the random profile
    path: str = ""              # snapshot base path for profile == "file"


@dataclass
class FlowConfig:
    kind: str = "nls"
    dt: float = 1e-3
    t_final: float = 1.0
    scheme: str = ""            # empty = per-kind default
    snapshot_stride: int = 10
    kappa: float = 0.0          # generating/regularized/difference parameter
    fp_tol: float = 1e-12


@dataclass
class DiagnosticsConfig:
    sigma: float = -0.5          # supercritical norm index (inflation, smoothing)
    s: float = -0.25             # working regularity for sweeps
    kappas: list = dc_field(default_factory=lambda: [1.0, 2.0, 4.0])
    varkappa: float = 4.0        # density/current parameter
    sweep_kappas: list = dc_field(default_factory=lambda: [8.0, 16.0, 32.0])
    radii: list = dc_field(default_factory=lambda: [8.0, 16.0])
    lambdas: list = dc_field(default_factory=lambda: [8.0, 64.0, 512.0])
    h_count: int = 9             # cutoff centres for integrated identities
    h_count_sup: int = 33        # cutoff centres for sup_h norms
    flavor: str = "nls"          # current flavor for the micro subcommand
    trace_order: int = 8
    bumps: int = 1
    separation: float = 48.0
    threshold_factor: float = 1e-3


@dataclass
class ExperimentConfig:
    grid: GridConfig = dc_field(default_factory=GridConfig)
    data: DataConfig = dc_field(default_factory=DataConfig)
    flow: FlowConfig = dc_field(default_factory=FlowConfig)
    diagnostics: DiagnosticsConfig = dc_field(default_factory=DiagnosticsConfig)
    out: str = "out"
    seed: int = 0
    threads: int = 1

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, tree: dict) -> "ExperimentConfig":
        cfg = cls()
        for section, payload in tree.items():
            if not hasattr(cfg, section):
                raise ConfigError(f"unknown config section {section!r}")
            current = getattr(cfg, section)
            if dataclasses.is_dataclass(current):
                names = {f.name for f in dataclasses.fields(current)}
                for key, value in payload.items():
                    if key not in names:
                        raise ConfigError(f"unknown config field {section}.{key}")
                    setattr(current, key, value)
            else:
                setattr(cfg, section, payload)
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def apply_env(self, env=os.environ) -> None:
        if ENV_PREFIX + "SEED" in env:
            self.seed = int(env[ENV_PREFIX + "SEED"])
        if ENV_PREFIX + "THREADS" in env:
            self.threads = int(env[ENV_PREFIX + "THREADS"])
        if ENV_PREFIX + "OUT" in env:
            self.out = env[ENV_PREFIX + "OUT"]

    # -- builders ------------------------------------------------------------

    def make_grid(self) -> Grid:
        return Grid(float(self.grid.length), int(self.grid.points))

    def make_field(self, rng: np.random.Generator | None = None) -> Field:
        d = self.data
        grid = self.make_grid()
        sign = int(d.sign)
        if d.profile == "gaussian":
            return gaussian(grid, d.amplitude, d.width, sign)
        if d.profile == "mode":
            return plane_wave(grid, d.amplitude, d.xi0, sign)
        if d.profile == "constant":
            return constant(grid, d.amplitude, sign)
        if d.profile == "appendix_even":
            return mean_zero_even(grid, d.amplitude, sign)
        if d.profile == "appendix_odd":
            return mean_zero_odd(grid, d.amplitude, sign)
        if d.profile == "random":
            rng = np.random.default_rng(self.seed) if rng is None else rng
            return random_schwartz(grid, rng, norm=d.norm, sign=sign)
        if d.profile == "file":
            from .storage import read_snapshot

            if not d.path:
                raise ConfigError("data.profile == 'file' requires data.path")
            f, _ = read_snapshot(d.path)
            return f
        raise ConfigError(f"unknown data profile {d.profile!r}; "
                          f"choose from {PROFILES}")


def config_reference() -> str:
    """Human-readable listing of every field and its default."""
    lines = ["aknslab configuration reference (JSON sections and defaults)", ""]
    cfg = ExperimentConfig()
    for section_field in dataclasses.fields(cfg):
        value = getattr(cfg, section_field.name)
        if dataclasses.is_dataclass(value):
            lines.append(f"[{section_field.name}]")
            for f in dataclasses.fields(value):
                lines.append(f"  {f.name} = {getattr(value, f.name)!r}")
        else:
            lines.append(f"{section_field.name} = {value!r}")
        lines.append("")
    lines.append("environment overrides: AKNSLAB_SEED, AKNSLAB_THREADS, AKNSLAB_OUT")
    lines.append("data profiles: " + ", ".join(PROFILES))
    return "\n".join(lines) + "\n"
