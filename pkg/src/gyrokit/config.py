"""Run configuration: a single YAML file validated into a RunConfig.

Units are normalized Gaussian-style: the field scale length is the length
unit, reference field amplitudes are O(1) and scaled by 1/eps, and the
default species has m = q = c = 1. Validation errors name the offending
key so config mistakes fail fast with exit code 1 in the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigError
from .fields import MODEL_REGISTRY, FieldModel, Species, model_from_config
from .fullorbit import FullState
from .gyrotransform import GCState, gc_state_from_scalars


@dataclass
class IntegratorConfig:
    scheme: str = "rk4"
    dt: float = 1e-3
    t_end: float = 1.0
    sample_stride: int = 1


@dataclass
class ScanConfig:
    metric: str = "mu_drift"
    eps_list: list = field(default_factory=lambda: [1 / 8, 1 / 16, 1 / 32, 1 / 64])
    options: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    species: Species
    eps: float
    field: FieldModel
    state_kind: str               # "full" or "gc"
    state: dict                   # raw initial-state numbers
    integrator: IntegratorConfig
    scan: Optional[ScanConfig]
    seed: int

    def initial_full_state(self) -> FullState:
        if self.state_kind != "full":
            raise ConfigError(
                "initial_state.kind must be 'full' for this subcommand"
            )
        return FullState(np.array(self.state["r"], dtype=float),
                         np.array(self.state["v"], dtype=float), 0.0)

    def initial_gc_state(self) -> GCState:
        if self.state_kind == "gc":
            return gc_state_from_scalars(
                np.array(self.state["r"], dtype=float),
                float(self.state["u"]), float(self.state["mu"]),
                float(self.state["phi"]), self.field, self.eps, self.species,
            )
        from .gyrotransform import to_guiding_center

        return to_guiding_center(self.initial_full_state(), self.field,
                                 self.eps, self.species)


def _require(cond: bool, key: str, message: str):
    if not cond:
        raise ConfigError(f"config error: {key} {message}")


def _get(d: dict, key: str, default=None, required: bool = False):
    if key not in d:
        if required:
            raise ConfigError(f"config error: missing required key {key!r}")
        return default
    return d[key]


def load_config(path: str) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"config error: cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config error: invalid YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config error: top level must be a mapping")
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    sp_raw = _get(raw, "species", {}) or {}
    species = Species(
        m=float(sp_raw.get("m", 1.0)),
        q=float(sp_raw.get("q", 1.0)),
        c=float(sp_raw.get("c", 1.0)),
    )
    _require(species.m > 0, "species.m", "must be > 0")
    _require(species.q > 0, "species.q", "must be > 0")
    _require(species.c > 0, "species.c", "must be > 0")

    eps = float(_get(raw, "eps", required=True))
    _require(0.0 < eps <= 0.5, "eps", "must lie in (0, 0.5]")

    f_raw = _get(raw, "field", required=True)
    kind = _get(f_raw, "kind", required=True)
    _require(kind in MODEL_REGISTRY, "field.kind",
             f"must be one of {sorted(MODEL_REGISTRY)}")
    try:
        model = model_from_config(kind, f_raw.get("params") or {})
    except TypeError as exc:
        raise ConfigError(f"config error: field.params invalid: {exc}") from exc

    st_raw = _get(raw, "initial_state", required=True)
    state_kind = _get(st_raw, "kind", required=True)
    _require(state_kind in ("full", "gc"), "initial_state.kind",
             "must be 'full' or 'gc'")
    if state_kind == "full":
        for key in ("r", "v"):
            vec = _get(st_raw, key, required=True)
            _require(isinstance(vec, (list, tuple)) and len(vec) == 3,
                     f"initial_state.{key}", "must be a 3-vector")
        state = {"r": st_raw["r"], "v": st_raw["v"]}
    else:
        vec = _get(st_raw, "r", required=True)
        _require(isinstance(vec, (list, tuple)) and len(vec) == 3,
                 "initial_state.r", "must be a 3-vector")
        for key in ("u", "mu", "phi"):
            _get(st_raw, key, required=True)
        _require(float(st_raw["mu"]) >= 0.0, "initial_state.mu",
                 "must be >= 0")
        state = {"r": st_raw["r"], "u": st_raw["u"], "mu": st_raw["mu"],
                 "phi": st_raw["phi"]}

    it_raw = _get(raw, "integrator", {}) or {}
    integ = IntegratorConfig(
        scheme=str(it_raw.get("scheme", "rk4")),
        dt=float(it_raw.get("dt", 1e-3)),
        t_end=float(it_raw.get("t_end", 1.0)),
        sample_stride=int(it_raw.get("sample_stride", 1)),
    )
    _require(integ.scheme in ("rk4", "boris"), "integrator.scheme",
             "must be 'rk4' or 'boris'")
    _require(integ.dt > 0, "integrator.dt", "must be > 0")
    _require(integ.t_end > integ.dt, "integrator.t_end", "must be > dt")
    _require(integ.sample_stride >= 1, "integrator.sample_stride",
             "must be >= 1")

    scan_cfg = None
    if raw.get("scan") is not None:
        sc_raw = raw["scan"]
        metric = str(_get(sc_raw, "metric", required=True))
        eps_list = _get(sc_raw, "eps_list", required=True)
        _require(isinstance(eps_list, (list, tuple)) and len(eps_list) >= 3,
                 "scan.eps_list", "must list at least 3 values")
        eps_arr = [float(e) for e in eps_list]
        _require(all(a > b for a, b in zip(eps_arr, eps_arr[1:])),
                 "scan.eps_list", "must be strictly decreasing")
        _require(all(e > 0 for e in eps_arr), "scan.eps_list",
                 "entries must be > 0")
        scan_cfg = ScanConfig(metric=metric, eps_list=eps_arr,
                              options=dict(sc_raw.get("options") or {}))

    seed = int(_get(raw, "seed", 0))
    return RunConfig(species=species, eps=eps, field=model,
                     state_kind=state_kind, state=state, integrator=integ,
                     scan=scan_cfg, seed=seed)
