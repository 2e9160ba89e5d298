"""Experiment configuration: flat `key = value` files with `#` comments and
comma-separated lists, plus RBL_-prefixed environment overrides.

Two reference experiments ship with the package (one per regime):
`desk_1d_reversed` and `desk_2d_hls`; `resolve_config_path` accepts either a
filesystem path or one of those names.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .analytic import ParameterError, derive_exponents
from .discretization import Disk, DomainSpec, Interval, Rectangle


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


ENV_PREFIX = "RBL_"

_REQUIRED = ("domain", "bounds", "n", "alpha", "q_schedule", "resolution")


@dataclass(frozen=True)
class ExperimentConfig:
    domain_kind: str
    bounds: tuple[float, ...]
    n: int
    alpha: float
    q_schedule: tuple[float, ...]
    resolution: int
    # solver controls
    tol_residual: float = 1e-9
    max_iter: int = 20000
    damping: float = 1.0
    warm_start: bool = True
    threads: int = 1
    # diagnostics geometry
    fit_window: float = 8.0
    probe_distances: tuple[float, ...] = ()
    probe_exclusion: float | None = None
    bump_width: float | None = None
    bump_offset: float = 0.0
    boundary_t0: float | None = None
    boundary_aperture: float = 0.5
    # named verdict tolerances; a check runs iff its bound is set
    interior_delta: float | None = None
    constraint_dev_max: float | None = None
    fit_rms_max: float | None = None
    sigma_ratio_band: float | None = None
    envelope_spread_max: float | None = None
    monotone_fraction_min: float | None = None
    monotone_rel_tol: float = 0.0
    mu_power_final_min: float | None = None
    dirac_band: float | None = None
    u_growth_min: float | None = None
    # output
    out_dir: str = "out"

    def make_domain(self) -> DomainSpec:
        return _build_domain(self.domain_kind, self.bounds)


_BOOL_KEYS = {"warm_start"}
_INT_KEYS = {"n", "resolution", "max_iter", "threads"}
_LIST_KEYS = {"bounds", "q_schedule", "probe_distances"}
_STR_KEYS = {"domain", "out_dir"}
_KNOWN_KEYS = {
    f.name if f.name != "domain_kind" else "domain" for f in fields(ExperimentConfig)
}


def _build_domain(kind: str, bounds: tuple[float, ...]) -> DomainSpec:
    try:
        if kind == "interval":
            if len(bounds) != 2:
                raise ConfigError("interval bounds need 2 values: a, b")
            return Interval(*bounds)
        if kind == "rectangle":
            if len(bounds) != 4:
                raise ConfigError("rectangle bounds need 4 values: a1, b1, a2, b2")
            return Rectangle(*bounds)
        if kind == "disk":
            if len(bounds) != 3:
                raise ConfigError("disk bounds need 3 values: cx, cy, radius")
            return Disk(*bounds)
    except ParameterError as err:
        raise ConfigError(str(err)) from err
    raise ConfigError(f"unknown domain kind {kind!r}; expected interval|rectangle|disk")


def parse_config_text(text: str, env: dict | None = None) -> ExperimentConfig:
    """Parse config text into a validated ExperimentConfig.

    `env` (default os.environ) may override any key through RBL_<KEY>.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value.strip()

    env = os.environ if env is None else env
    for key in _KNOWN_KEYS:
        env_name = ENV_PREFIX + key.upper()
        if env_name in env:
            raw[key] = env[env_name]

    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(sorted(missing))}")

    kwargs = {}
    for key, value in raw.items():
        field_name = "domain_kind" if key == "domain" else key
        try:
            if key in _STR_KEYS:
                kwargs[field_name] = value
            elif key in _BOOL_KEYS:
                low = value.lower()
                if low not in ("true", "false"):
                    raise ValueError("expected true/false")
                kwargs[field_name] = low == "true"
            elif key in _INT_KEYS:
                kwargs[field_name] = int(value)
            elif key in _LIST_KEYS:
                kwargs[field_name] = tuple(float(v) for v in value.split(",") if v.strip())
            else:
                kwargs[field_name] = float(value)
        except ValueError as err:
            raise ConfigError(f"invalid value for {key!r}: {value!r} ({err})") from err

    cfg = ExperimentConfig(**kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    domain = cfg.make_domain()   # raises ConfigError on degenerate geometry
    if cfg.n != domain.n:
        raise ConfigError(f"n={cfg.n} does not match the {cfg.domain_kind} dimension {domain.n}")
    if not cfg.q_schedule:
        raise ConfigError("q_schedule must not be empty")
    try:
        exps = [derive_exponents(cfg.n, cfg.alpha, q) for q in cfg.q_schedule]
    except ParameterError as err:
        raise ConfigError(f"q_schedule: {err}") from err
    if len(exps) > 1:
        qs = list(cfg.q_schedule)
        increasing = all(b > a for a, b in zip(qs, qs[1:]))
        decreasing = all(b < a for a, b in zip(qs, qs[1:]))
        toward_crit = increasing if exps[0].is_reversed else decreasing
        if not toward_crit:
            raise ConfigError(
                f"q_schedule must march strictly monotonically toward "
                f"q_crit={exps[0].q_crit:.6g}, got {qs}"
            )
    positive_keys = (
        "tol_residual", "damping", "fit_window", "boundary_aperture",
        "interior_delta", "constraint_dev_max", "fit_rms_max",
        "envelope_spread_max", "monotone_fraction_min", "mu_power_final_min",
        "u_growth_min", "bump_width", "boundary_t0", "probe_exclusion",
    )
    for name in positive_keys:
        val = getattr(cfg, name)
        if val is not None and not val > 0.0:
            raise ConfigError(f"{name} must be positive, got {val}")
    if cfg.sigma_ratio_band is not None and not cfg.sigma_ratio_band >= 0.0:
        raise ConfigError(f"sigma_ratio_band must be >= 0, got {cfg.sigma_ratio_band}")
    if cfg.dirac_band is not None and not cfg.dirac_band > 0.0:
        raise ConfigError(f"dirac_band must be positive, got {cfg.dirac_band}")
    if cfg.monotone_rel_tol < 0.0:
        raise ConfigError(f"monotone_rel_tol must be >= 0, got {cfg.monotone_rel_tol}")
    if cfg.resolution < 8:
        raise ConfigError(f"resolution must be >= 8, got {cfg.resolution}")
    if cfg.threads < 1:
        raise ConfigError(f"threads must be >= 1, got {cfg.threads}")
    if cfg.probe_distances and any(d <= 0.0 for d in cfg.probe_distances):
        raise ConfigError("probe_distances must be positive")
    if cfg.probe_distances and max(cfg.probe_distances) >= domain.diameter:
        raise ConfigError("probe_distances must fit inside the domain diameter")


def load_config(path, env: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config_text(text, env=env)


def reference_config_names() -> tuple[str, ...]:
    return ("desk_1d_reversed", "desk_2d_hls")


def resolve_config_path(name_or_path: str) -> Path:
    """Accept a filesystem path or the bare name of a shipped config."""
    p = Path(name_or_path)
    if p.exists():
        return p
    if name_or_path in reference_config_names():
        ref = resources.files("rieszlab") / "configs" / f"{name_or_path}.cfg"
        with resources.as_file(ref) as concrete:
            return Path(concrete)
    raise ConfigError(f"config {name_or_path!r} is neither a file nor a shipped name "
                      f"{reference_config_names()}")
