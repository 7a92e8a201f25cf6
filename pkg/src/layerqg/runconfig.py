"""Flat key=value run configuration with explicit defaults.

One `key=value` pair per line, `#` starts a comment, blank lines ignored.
Unknown keys are an error (listing every offender); missing keys fall back
to defaults and are echoed in the run manifest.  Constraint violations
name the violated constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .coupling import eigenpairs, symmetrize
from .dynamics import SimConfig
from .errors import ConfigurationError
from .noise import default_mode_count, make_noise
from .spectral import build_basis


@dataclass
class RunSettings:
    """Scalar run parameters exactly as configured (before realization)."""

    domain_lx: float = 1.0
    domain_ly: float = 1.0
    modes_x: int = 32
    modes_y: int = 32
    grid_x: int = 0          # 0: use the dealiasing floor 2*modes
    grid_y: int = 0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    lambda_scale: float = 1.0
    gamma: float = 0.5
    viscosity: float = 0.0
    dt: float = 1e-3
    horizon: float = 1.0
    nonlinearity: str = "on"
    sigma: float = 1.0
    noise_decay: float = 2.0
    noise_modes: int = 0     # 0: default 3*min(modes)^2/4
    init: str = "zero"
    cfl_safety: float = 0.5
    obs_every: int = 1
    observables: str = "l2,l4,linf,h1"

    def echo(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_CASTS = {float: float, int: int, str: str}


def parse_config(path) -> tuple[RunSettings, list[str]]:
    """Parse a config file; returns (settings, list of defaulted keys)."""
    known = {f.name: f.type for f in fields(RunSettings)}
    typed = {f.name: type(getattr(RunSettings(), f.name))
             for f in fields(RunSettings)}
    values = {}
    unknown = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in known:
                unknown.append(key)
                continue
            try:
                values[key] = _CASTS[typed[key]](val)
            except ValueError:
                raise ConfigurationError(
                    f"{path}:{lineno}: cannot parse {key}={val!r} "
                    f"as {typed[key].__name__}")
    if unknown:
        raise ConfigurationError(
            "unknown configuration keys: " + ", ".join(sorted(unknown)))
    settings = RunSettings(**values)
    defaulted = [k for k in known if k not in values]
    validate_settings(settings)
    return settings, defaulted


def validate_settings(s: RunSettings):
    """Named constraint checks, raised before any realization."""
    if s.gamma <= 0:
        raise ConfigurationError("gamma must be positive")
    for name in ("lambda1", "lambda2", "lambda3"):
        if getattr(s, name) <= 0:
            raise ConfigurationError(f"{name} must be positive")
    if s.lambda_scale <= 0:
        raise ConfigurationError("lambda_scale must be positive")
    if s.domain_lx <= 0 or s.domain_ly <= 0:
        raise ConfigurationError("domain lengths must be positive")
    if s.modes_x < 1 or s.modes_y < 1:
        raise ConfigurationError("mode counts must be positive")
    if s.grid_x and s.grid_x < 2 * s.modes_x:
        raise ConfigurationError(
            "grid_x must satisfy grid_x >= 2*modes_x (dealiasing constraint)")
    if s.grid_y and s.grid_y < 2 * s.modes_y:
        raise ConfigurationError(
            "grid_y must satisfy grid_y >= 2*modes_y (dealiasing constraint)")
    if s.dt <= 0:
        raise ConfigurationError("dt must be positive")
    if s.viscosity < 0:
        raise ConfigurationError("viscosity must be nonnegative")
    if s.sigma < 0:
        raise ConfigurationError("sigma must be nonnegative")
    if s.cfl_safety < 0:
        raise ConfigurationError("cfl_safety must be nonnegative")
    if s.cfl_safety > 0 and s.dt > s.cfl_safety / s.gamma:
        raise ConfigurationError(
            f"dt must satisfy dt <= cfl_safety/gamma = "
            f"{s.cfl_safety / s.gamma} (stability ceiling)")
    if s.nonlinearity not in ("on", "off"):
        raise ConfigurationError("nonlinearity must be 'on' or 'off'")
    if s.obs_every < 1:
        raise ConfigurationError("obs_every must be >= 1")
    if s.horizon <= 0:
        raise ConfigurationError("horizon must be positive")


def realize(settings: RunSettings, seed: int, snap_every: int = 0) -> SimConfig:
    """Build the immutable simulation objects from scalar settings."""
    s = settings
    basis = build_basis(s.domain_lx, s.domain_ly, s.modes_x, s.modes_y,
                        s.grid_x or None, s.grid_y or None)
    coupling = symmetrize((s.lambda1, s.lambda2, s.lambda3), basis,
                          s.lambda_scale)
    k = s.noise_modes or default_mode_count(basis)
    total = 3 * basis.nx * basis.ny
    pairs = eigenpairs(coupling, basis, min(max(4 * k, k), total))
    noise = make_noise(pairs, k, s.noise_decay, s.sigma)
    return SimConfig(basis=basis, coupling=coupling, pairs=pairs,
                     noise=noise, gamma=s.gamma, viscosity=s.viscosity,
                     dt=s.dt, horizon=s.horizon,
                     nonlinear=s.nonlinearity == "on", init=s.init,
                     seed=seed, cfl_safety=s.cfl_safety,
                     obs_every=s.obs_every, snap_every=snap_every)
