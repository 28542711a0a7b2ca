"""Run configuration: YAML schema, validation, defaults, echo and overrides.

One self-describing YAML file drives every command. Parsing fills defaults,
re-validates all physical invariants with the offending key path in the
error message, and rejects unknown keys. The echoed (normalized) form
re-parses to the identical configuration, and its hash goes into every
output file's provenance header.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field as dc_field

import numpy as np
import yaml

from . import __version__
from .geometry import EulerAngles, ModeRegion, sweep_orientations
from .lossfit import DEFAULT_GRADIENT_MHZ_PER_MT, PeakModel
from .resonance import ResonatorSpec
from .spincore import CrystalFieldCoefficients, SpinSystem

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_config_text", "echo_config", "config_hash", "apply_overrides"]


class ConfigError(ValueError):
    """Configuration file violates the schema or a physical invariant."""


REQUIRED_KEYS = (
    "spin_system.s",
    "spin_system.g",
    "resonator.f_r_ghz",
    "resonator.kappa_mhz",
)


@dataclass(frozen=True)
class SweepSpec:
    theta_start_deg: float = 0.0
    theta_stop_deg: float = 360.0
    theta_step_deg: float = 4.0
    field_start_mt: float = 0.0
    field_stop_mt: float = 120.0
    field_step_mt: float = 0.1
    rotation_sense: int = +1

    def thetas(self) -> np.ndarray:
        return sweep_orientations(self.theta_start_deg, self.theta_stop_deg, self.theta_step_deg)

    def fields(self) -> np.ndarray:
        n = int(round((self.field_stop_mt - self.field_start_mt) / self.field_step_mt))
        return self.field_start_mt + self.field_step_mt * np.arange(n + 1)


@dataclass(frozen=True)
class RenderSpec:
    linewidth_mhz: float = 50.0
    edge_filter: bool = False
    filter_scale: str = "linear"
    svg_width_px: int = 900
    svg_height_px: int = 600


@dataclass(frozen=True)
class FitSpec:
    kappa_fixed: bool = True
    default_gradient_mhz_per_mt: float = DEFAULT_GRADIENT_MHZ_PER_MT
    gamma_max_mhz: float = 1e4
    g_c_max_mhz: float = 1e3
    seeds: tuple[PeakModel, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    spin_system: SpinSystem
    resonator: ResonatorSpec
    regions: tuple[ModeRegion, ...]
    sweep: SweepSpec
    temperature_k: float
    render: RenderSpec
    fit: FitSpec
    normalized: dict = dc_field(default_factory=dict, compare=False)


class _Section:
    """Tracks consumed keys so leftovers can be rejected with their path."""

    def __init__(self, data, path):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path or '<root>'}: expected a mapping, got {type(data).__name__}")
        self.data = dict(data)
        self.path = path

    def child(self, key) -> "_Section":
        return _Section(self.data.pop(key, {}), self._join(key))

    def take(self, key, default=None, required=False):
        if key in self.data:
            return self.data.pop(key)
        if required:
            raise ConfigError(f"missing required key {self._join(key)}")
        return default

    def finish(self):
        if self.data:
            leftover = ", ".join(self._join(k) for k in sorted(self.data))
            raise ConfigError(f"unknown key(s): {leftover}")

    def _join(self, key) -> str:
        return f"{self.path}.{key}" if self.path else str(key)


def _number(value, path, *, positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    x = float(value)
    if not np.isfinite(x):
        raise ConfigError(f"{path}: must be finite")
    if positive and x <= 0:
        raise ConfigError(f"{path}: must be > 0")
    if nonnegative and x < 0:
        raise ConfigError(f"{path}: must be >= 0")
    return x


def parse_config(path) -> RunConfig:
    """Load and validate a YAML configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def parse_config_text(text: str, overrides=()) -> RunConfig:
    """Parse config YAML given as a string, with optional dotted overrides."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")
    if not raw:
        raise ConfigError("empty config; required keys: " + ", ".join(REQUIRED_KEYS))
    for dotted in overrides:
        raw = apply_overrides(raw, dotted)
    return _build(raw)


def _build(raw: dict) -> RunConfig:
    root = _Section(raw, "")

    spin = root.child("spin_system")
    s = _number(spin.take("s", required=True), "spin_system.s", positive=True)
    g = _number(spin.take("g", required=True), "spin_system.g", positive=True)
    cf_kwargs = {}
    for name in ("b20", "b40", "b60", "b43", "b63", "b66"):
        cf_kwargs[name] = _number(spin.take(f"{name}_mhz", 0.0), f"spin_system.{name}_mhz")
    sites = spin.take("sites_deg", [0.0, 60.0])
    if not isinstance(sites, (list, tuple)) or not sites:
        raise ConfigError("spin_system.sites_deg: expected a non-empty list of angles")
    sites = tuple(
        _number(v, f"spin_system.sites_deg[{k}]") for k, v in enumerate(sites)
    )
    ensemble_n = spin.take("ensemble_n")
    if ensemble_n is not None:
        ensemble_n = _number(ensemble_n, "spin_system.ensemble_n", positive=True)
    spin.finish()
    try:
        spin_system = SpinSystem(
            s=s, g=g, cf=CrystalFieldCoefficients(**cf_kwargs), sites=sites, ensemble_n=ensemble_n
        )
    except ValueError as exc:
        raise ConfigError(f"spin_system: {exc}") from exc

    res = root.child("resonator")
    f_r = _number(res.take("f_r_ghz", required=True), "resonator.f_r_ghz", positive=True)
    kappa = _number(res.take("kappa_mhz", required=True), "resonator.kappa_mhz", positive=True)
    q_i = res.take("q_i")
    q_c = res.take("q_c")
    if q_i is not None:
        q_i = _number(q_i, "resonator.q_i", positive=True)
    if q_c is not None:
        q_c = _number(q_c, "resonator.q_c", positive=True)
    res.finish()
    resonator = ResonatorSpec(f_r_ghz=f_r, kappa_mhz=kappa, q_i=q_i, q_c=q_c)

    geo = root.child("geometry")
    regions_raw = geo.take("regions", _default_regions_raw())
    geo.finish()
    if not isinstance(regions_raw, list) or not regions_raw:
        raise ConfigError("geometry.regions: expected a non-empty list")
    regions = tuple(
        _parse_region(r, f"geometry.regions[{k}]") for k, r in enumerate(regions_raw)
    )
    if len({r.label for r in regions}) != len(regions):
        raise ConfigError("geometry.regions: labels must be unique")

    sw = root.child("sweep")
    sweep = SweepSpec(
        theta_start_deg=_number(sw.take("theta_start_deg", 0.0), "sweep.theta_start_deg"),
        theta_stop_deg=_number(sw.take("theta_stop_deg", 360.0), "sweep.theta_stop_deg"),
        theta_step_deg=_number(sw.take("theta_step_deg", 4.0), "sweep.theta_step_deg", positive=True),
        field_start_mt=_number(sw.take("field_start_mt", 0.0), "sweep.field_start_mt", nonnegative=True),
        field_stop_mt=_number(sw.take("field_stop_mt", 120.0), "sweep.field_stop_mt", positive=True),
        field_step_mt=_number(sw.take("field_step_mt", 0.1), "sweep.field_step_mt", positive=True),
        rotation_sense=_parse_sense(sw.take("rotation_sense", 1)),
    )
    sw.finish()
    if sweep.field_stop_mt <= sweep.field_start_mt:
        raise ConfigError("sweep.field_stop_mt: must exceed sweep.field_start_mt")

    pop = root.child("population")
    temperature = _number(pop.take("temperature_k", 0.25), "population.temperature_k", positive=True)
    pop.finish()

    ren = root.child("render")
    render = RenderSpec(
        linewidth_mhz=_number(ren.take("linewidth_mhz", 50.0), "render.linewidth_mhz", positive=True),
        edge_filter=_bool(ren.take("edge_filter", False), "render.edge_filter"),
        filter_scale=_choice(ren.take("filter_scale", "linear"), ("linear", "log"), "render.filter_scale"),
        svg_width_px=int(_number(ren.take("svg_width_px", 900), "render.svg_width_px", positive=True)),
        svg_height_px=int(_number(ren.take("svg_height_px", 600), "render.svg_height_px", positive=True)),
    )
    ren.finish()

    fit_sec = root.child("fit")
    default_grad = _number(
        fit_sec.take("default_gradient_mhz_per_mt", DEFAULT_GRADIENT_MHZ_PER_MT),
        "fit.default_gradient_mhz_per_mt",
    )
    if default_grad == 0:
        raise ConfigError("fit.default_gradient_mhz_per_mt: must be nonzero")
    seeds_raw = fit_sec.take("seeds", [])
    if not isinstance(seeds_raw, list):
        raise ConfigError("fit.seeds: expected a list")
    seeds = tuple(
        _parse_seed(sd, f"fit.seeds[{k}]", default_grad) for k, sd in enumerate(seeds_raw)
    )
    fit = FitSpec(
        kappa_fixed=_bool(fit_sec.take("kappa_fixed", True), "fit.kappa_fixed"),
        default_gradient_mhz_per_mt=default_grad,
        gamma_max_mhz=_number(fit_sec.take("gamma_max_mhz", 1e4), "fit.gamma_max_mhz", positive=True),
        g_c_max_mhz=_number(fit_sec.take("g_c_max_mhz", 1e3), "fit.g_c_max_mhz", positive=True),
        seeds=seeds,
    )
    fit_sec.finish()

    root.finish()

    cfg = RunConfig(
        spin_system=spin_system,
        resonator=resonator,
        regions=regions,
        sweep=sweep,
        temperature_k=temperature,
        render=render,
        fit=fit,
    )
    object.__setattr__(cfg, "normalized", _normalize(cfg))
    return cfg


def _default_regions_raw():
    return [
        {
            "label": "perpendicular",
            "euler_deg": [30.0, 33.0, 0.0],
            "area_um2": 3400.0,
            "bmw_axes": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        },
        {
            "label": "parallel",
            "euler_deg": [120.0, 33.0, 0.0],
            "area_um2": 416.0,
            "bmw_axes": [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        },
    ]


def _parse_region(raw, path) -> ModeRegion:
    sec = _Section(raw, path)
    label = sec.take("label", required=True)
    euler = sec.take("euler_deg", [0.0, 0.0, 0.0])
    area = _number(sec.take("area_um2", required=True), f"{path}.area_um2", positive=True)
    axes = sec.take("bmw_axes", [[1.0, 0.0, 0.0]])
    sec.finish()
    if not isinstance(euler, (list, tuple)) or len(euler) != 3:
        raise ConfigError(f"{path}.euler_deg: expected [alpha, beta, gamma]")
    if not isinstance(axes, (list, tuple)) or not axes:
        raise ConfigError(f"{path}.bmw_axes: expected a non-empty list of 3-vectors")
    unit_axes = []
    for k, ax in enumerate(axes):
        v = np.asarray(ax, dtype=float)
        if v.shape != (3,) or np.linalg.norm(v) == 0:
            raise ConfigError(f"{path}.bmw_axes[{k}]: expected a nonzero 3-vector")
        unit_axes.append(tuple(v / np.linalg.norm(v)))
    try:
        return ModeRegion(
            label=label,
            euler=EulerAngles(*(float(a) for a in euler)),
            area_um2=area,
            bmw_axes=tuple(unit_axes),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_seed(raw, path, default_grad) -> PeakModel:
    sec = _Section(raw, path)
    b_f = _number(sec.take("b_f_mt", required=True), f"{path}.b_f_mt")
    gamma = sec.take("gamma_mhz", 100.0)
    g_c = sec.take("g_c_mhz", 2.0)
    grad = sec.take("gradient_mhz_per_mt", default_grad)
    label = str(sec.take("label", ""))
    sec.finish()
    gamma = _number(gamma, f"{path}.gamma_mhz")
    if gamma <= 0:
        raise ConfigError(f"{path}.gamma_mhz: must be > 0")
    g_c = _number(g_c, f"{path}.g_c_mhz")
    if g_c < 0:
        raise ConfigError(f"{path}.g_c_mhz: must be >= 0")
    grad = _number(grad, f"{path}.gradient_mhz_per_mt")
    if grad == 0:
        raise ConfigError(f"{path}.gradient_mhz_per_mt: must be nonzero")
    return PeakModel(b_f_mt=b_f, gamma_mhz=gamma, g_c_mhz=g_c, gradient_mhz_per_mt=grad, label=label)


def _parse_sense(value) -> int:
    if value in (1, +1, "+1", "+y", "y"):
        return +1
    if value in (-1, "-1", "-y"):
        return -1
    raise ConfigError(f"sweep.rotation_sense: expected +1/-1 (or '+y'/'-y'), got {value!r}")


def _bool(value, path) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{path}: expected true/false")
    return value


def _choice(value, allowed, path) -> str:
    if value not in allowed:
        raise ConfigError(f"{path}: expected one of {allowed}, got {value!r}")
    return value


def _normalize(cfg: RunConfig) -> dict:
    """Canonical plain-data form of a config (echoed, hashed, re-parseable)."""
    spin = cfg.spin_system
    out = {
        "spin_system": {
            "s": spin.s,
            "g": spin.g,
            **{f"{k}_mhz": v for k, v in spin.cf.as_dict().items()},
            "sites_deg": list(spin.sites),
        },
        "resonator": {
            "f_r_ghz": cfg.resonator.f_r_ghz,
            "kappa_mhz": cfg.resonator.kappa_mhz,
        },
        "geometry": {
            "regions": [
                {
                    "label": r.label,
                    "euler_deg": [r.euler.alpha, r.euler.beta, r.euler.gamma],
                    "area_um2": r.area_um2,
                    "bmw_axes": [list(ax) for ax in r.bmw_axes],
                }
                for r in cfg.regions
            ]
        },
        "sweep": {
            "theta_start_deg": cfg.sweep.theta_start_deg,
            "theta_stop_deg": cfg.sweep.theta_stop_deg,
            "theta_step_deg": cfg.sweep.theta_step_deg,
            "field_start_mt": cfg.sweep.field_start_mt,
            "field_stop_mt": cfg.sweep.field_stop_mt,
            "field_step_mt": cfg.sweep.field_step_mt,
            "rotation_sense": cfg.sweep.rotation_sense,
        },
        "population": {"temperature_k": cfg.temperature_k},
        "render": {
            "linewidth_mhz": cfg.render.linewidth_mhz,
            "edge_filter": cfg.render.edge_filter,
            "filter_scale": cfg.render.filter_scale,
            "svg_width_px": cfg.render.svg_width_px,
            "svg_height_px": cfg.render.svg_height_px,
        },
        "fit": {
            "kappa_fixed": cfg.fit.kappa_fixed,
            "default_gradient_mhz_per_mt": cfg.fit.default_gradient_mhz_per_mt,
            "gamma_max_mhz": cfg.fit.gamma_max_mhz,
            "g_c_max_mhz": cfg.fit.g_c_max_mhz,
            "seeds": [
                {
                    "b_f_mt": p.b_f_mt,
                    "gamma_mhz": p.gamma_mhz,
                    "g_c_mhz": p.g_c_mhz,
                    "gradient_mhz_per_mt": p.gradient_mhz_per_mt,
                    "label": p.label,
                }
                for p in cfg.fit.seeds
            ],
        },
    }
    if spin.ensemble_n is not None:
        out["spin_system"]["ensemble_n"] = spin.ensemble_n
    if cfg.resonator.q_i is not None:
        out["resonator"]["q_i"] = cfg.resonator.q_i
    if cfg.resonator.q_c is not None:
        out["resonator"]["q_c"] = cfg.resonator.q_c
    return out


def echo_config(cfg: RunConfig) -> str:
    """Normalized YAML form; parse(echo(parse(f))) == parse(f)."""
    return yaml.safe_dump(cfg.normalized, sort_keys=False, default_flow_style=None)


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.normalized, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def provenance_lines(cfg: RunConfig, timestamp: str | None = None) -> list[str]:
    """Standard provenance header: config hash, package version, timestamp."""
    import datetime

    if timestamp is None:
        timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return [
        f"config_hash: {config_hash(cfg)}",
        f"version: microesr {__version__}",
        f"timestamp: {timestamp}",
    ]


def apply_overrides(raw: dict, dotted: str) -> dict:
    """Apply one ``section.key[idx].sub=value`` override to a raw config dict."""
    if "=" not in dotted:
        raise ConfigError(f"override {dotted!r} is not of the form path=value")
    path, _, literal = dotted.partition("=")
    try:
        value = yaml.safe_load(literal)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {dotted!r}: bad value ({exc})") from exc

    parts = []
    for token in path.strip().split("."):
        name, _, rest = token.partition("[")
        if name:
            parts.append(name)
        while rest:
            idx, _, rest2 = rest.partition("]")
            try:
                parts.append(int(idx))
            except ValueError as exc:
                raise ConfigError(f"override {dotted!r}: bad index [{idx}]") from exc
            rest = rest2.lstrip("[")
    if not parts:
        raise ConfigError(f"override {dotted!r}: empty path")

    raw = dict(raw)
    node = raw
    for k, part in enumerate(parts[:-1]):
        nxt = parts[k + 1]
        if isinstance(part, int):
            if not isinstance(node, list) or part >= len(node):
                raise ConfigError(f"override {dotted!r}: index {part} out of range")
            node[part] = _copy_node(node[part])
            node = node[part]
        else:
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r}: {part} is not a mapping")
            node[part] = _copy_node(node.get(part, [] if isinstance(nxt, int) else {}))
            node = node[part]
    last = parts[-1]
    if isinstance(last, int):
        if not isinstance(node, list) or last >= len(node):
            raise ConfigError(f"override {dotted!r}: index {last} out of range")
        node[last] = value
    else:
        if not isinstance(node, dict):
            raise ConfigError(f"override {dotted!r}: parent is not a mapping")
        node[last] = value
    return raw


def _copy_node(node):
    if isinstance(node, dict):
        return dict(node)
    if isinstance(node, list):
        return list(node)
    return node
