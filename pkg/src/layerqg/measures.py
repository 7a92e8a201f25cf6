"""Time-averaged measure estimation and long-time confinement diagnostics.

Measures are represented through their action on a finite dictionary of
observables (pairings with band-limited fields, norm functionals): the
averaged measure at horizon n is the vector of time averages
(1/n) int_0^n phi(q_t) dt, aggregated over independent sample paths.
Horizon readouts are nested prefixes of a single long run per path.

The confinement diagnostic runs q from zero alongside the exact
stochastic convolution zeta_lambda of the same noise path and evaluates
the pathwise exponential envelope for theta = q - zeta from the recorded
||zeta(t)||_{H^alpha} series (alpha = 5/2, the noise regularity class).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import ks_2samp

from . import rng as rngmod
from .dynamics import SimConfig, Stepper, run_trajectory
from .errors import ConfigurationError, SamplingError
from .noise import OUState, ou_step
from .spectral import N_LAYERS

ALPHA_NOISE = 2.5


@dataclass
class AveragedMeasure:
    """Action of the horizon-n averaged law on the observable dictionary."""

    horizon: float
    names: list
    means: np.ndarray          # across paths, of the per-path time averages
    stderrs: np.ndarray
    n_paths: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ConfigurationError("horizon must be positive")
        if not np.all(np.isfinite(self.means)):
            raise ConfigurationError("averages must be finite")
        if np.any(self.stderrs < 0):
            raise ConfigurationError("standard errors must be nonnegative")

    def value(self, name: str) -> float:
        return float(self.means[self.names.index(name)])

    def stderr(self, name: str) -> float:
        return float(self.stderrs[self.names.index(name)])


def _path_averages(config, horizons, observables, stream):
    rec = run_trajectory(config, observables=observables, stream=stream)
    times = rec.times
    out = np.empty((len(horizons), len(observables)))
    for h_idx, horizon in enumerate(horizons):
        mask = times <= horizon + 1e-12
        t = times[mask]
        for o_idx, ob in enumerate(observables):
            v = rec.observables[ob.name][mask]
            integral = np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t))
            out[h_idx, o_idx] = integral / horizon
    return out


def kb_average(config: SimConfig, horizons, observables, n_paths: int = 1,
               threads: int = 1):
    """Averaged measures at nested horizons, one long run per path.

    Starts every path at q0 = 0; horizons must ascend and fit inside the
    configured trajectory length.
    """
    horizons = list(horizons)
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ConfigurationError("horizons must be strictly increasing")
    if max(horizons) > config.horizon + 1e-12:
        raise ConfigurationError(
            f"horizon {max(horizons)} exceeds simulated length {config.horizon}")
    if n_paths < 1:
        raise ConfigurationError("n_paths must be >= 1")
    cfg = replace(config, init="zero", snap_every=0)

    def worker(p):
        return _path_averages(cfg, horizons, observables, stream=p)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_path = list(pool.map(worker, range(n_paths)))
    else:
        per_path = [worker(p) for p in range(n_paths)]
    stacked = np.stack(per_path)          # (P, H, O)
    means = stacked.mean(axis=0)
    if n_paths > 1:
        stderrs = stacked.std(axis=0, ddof=1) / np.sqrt(n_paths)
    else:
        stderrs = np.zeros_like(means)
    names = [ob.name for ob in observables]
    return [AveragedMeasure(horizon=h, names=names, means=means[i],
                            stderrs=stderrs[i], n_paths=n_paths)
            for i, h in enumerate(horizons)]


@dataclass
class InvarianceReport:
    observable_names: list
    shifts: list
    ks_distance: np.ndarray     # (n_obs, n_shifts)
    p_value: np.ndarray
    rejected: np.ndarray        # at the configured significance
    skipped: np.ndarray         # degenerate (zero-variance) observables
    significance: float
    n_samples: int


def invariance_test(config: SimConfig, burn_in: float, window: float,
                    observables, n_paths: int = 1, shifts=None,
                    significance: float = 0.01, threads: int = 1,
                    min_samples: int = 30) -> InvarianceReport:
    """Shift-invariance of the law after burn-in.

    Compares the empirical distribution of each observable over
    [burn_in, burn_in + window] against windows shifted by s, pooling
    thinned samples (spacing about 2/gamma) across paths, with a
    two-sample Kolmogorov-Smirnov test per observable and shift.
    """
    if shifts is None:
        shifts = [window / 4, window / 2]
    needed = burn_in + max(shifts) + window
    if needed > config.horizon + 1e-12:
        raise ConfigurationError(
            f"need horizon >= {needed}, have {config.horizon}")
    obs_dt = config.dt * config.obs_every
    spacing = max(1, int(round(2.0 / config.gamma / obs_dt)))

    def worker(p):
        rec = run_trajectory(config, observables=observables, stream=p)
        return rec

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(worker, range(n_paths)))
    else:
        records = [worker(p) for p in range(n_paths)]

    def window_samples(rec, name, start):
        t = rec.times
        mask = (t >= start - 1e-12) & (t <= start + window + 1e-12)
        return rec.observables[name][mask][::spacing]

    names = [ob.name for ob in observables]
    n_obs, n_sh = len(names), len(shifts)
    ks = np.zeros((n_obs, n_sh))
    pv = np.ones((n_obs, n_sh))
    rejected = np.zeros((n_obs, n_sh), dtype=bool)
    skipped = np.zeros(n_obs, dtype=bool)
    count = 0
    for i, name in enumerate(names):
        ref = np.concatenate([window_samples(r, name, burn_in)
                              for r in records])
        count = len(ref)
        if count < min_samples:
            raise SamplingError(
                f"window yields {count} samples < minimum {min_samples}")
        if np.ptp(ref) == 0.0:
            skipped[i] = True
            continue
        for j, s in enumerate(shifts):
            alt = np.concatenate([window_samples(r, name, burn_in + s)
                                  for r in records])
            if s == 0:
                ks[i, j] = 0.0
                pv[i, j] = 1.0
                continue
            stat = ks_2samp(ref, alt)
            ks[i, j] = stat.statistic
            pv[i, j] = stat.pvalue
            rejected[i, j] = stat.pvalue < significance
    return InvarianceReport(observable_names=names, shifts=list(shifts),
                            ks_distance=ks, p_value=pv, rejected=rejected,
                            skipped=skipped, significance=significance,
                            n_samples=count)


@dataclass
class TightnessReport:
    radii: np.ndarray
    fractions: np.ndarray          # fraction of time with ||q||_inf < R
    sup_q_inf: float
    thirds: np.ndarray             # sup of ||q||_inf over successive thirds
    times: np.ndarray
    q_inf_series: np.ndarray
    theta_inf_series: np.ndarray
    zeta_norm_series: np.ndarray   # ||zeta(t)||_{H^alpha}
    envelope: np.ndarray | None
    envelope_uninformative: bool
    envelope_condition_held: bool
    envelope_constant: float
    rate: float

    def __post_init__(self):
        if np.any(self.fractions < 0) or np.any(self.fractions > 1):
            raise ConfigurationError("fractions must lie in [0, 1]")
        if np.any(np.diff(self.fractions) < 0):
            raise ConfigurationError("fractions must be nondecreasing in R")

    @property
    def trend_ok(self) -> bool:
        """No increasing trend: last third's sup <= 1.5x first third's."""
        return bool(self.thirds[2] <= 1.5 * self.thirds[0])

    @property
    def theta_dominated(self) -> bool | None:
        if self.envelope is None:
            return None
        return bool(np.all(self.theta_inf_series
                           <= self.envelope * (1 + 1e-9) + 1e-12))


def tightness_diagnostic(config: SimConfig, rate: float, horizon: float,
                         radii=None, envelope_constant: float = 1.0,
                         sample_every: int = 5) -> TightnessReport:
    """Long run from q0 = 0 with the coupled stochastic convolution.

    Evolves zeta_lambda through the exact conditional update driven by
    the same increments as the trajectory, records ||q_t||_inf and
    ||theta_t||_inf = ||q_t - zeta_t||_inf at the sampling cadence, and
    evaluates the exponential envelope for theta from the recorded
    ||zeta||_{H^{5/2}} series.  Exponents beyond 700 mark the envelope
    uninformative (the raw sup is still reported).
    """
    if rate <= config.gamma / 2:
        raise ConfigurationError("rate should exceed gamma/2")
    cfg = replace(config, init="zero", horizon=horizon, snap_every=0)
    basis = cfg.basis
    stepper = Stepper(cfg)
    gen = rngmod.stream(cfg.seed, 0)
    n_steps = cfg.n_steps

    eta = np.zeros((N_LAYERS,) + basis.spectral_shape)
    w = np.zeros_like(eta)
    ou = OUState.zero(rate, cfg.noise.k)
    pairs = cfg.pairs
    lam_modes = pairs.spatial_eigenvalues[: cfg.noise.k]

    times, q_inf, theta_inf, zeta_norm = [0.0], [0.0], [0.0], [0.0]
    for j in range(1, n_steps + 1):
        eta = stepper.advance(eta, w, (j - 1) * cfg.dt)
        if cfg.noise.sigma > 0 and cfg.noise.k > 0:
            dw = cfg.noise.c * np.sqrt(cfg.dt) * gen.standard_normal(cfg.noise.k)
            w = w + stepper.mixer.coefficients(dw)
            ou = ou_step(ou, cfg.noise, cfg.dt, gen, driving_increment=dw)
        else:
            ou = ou_step(ou, cfg.noise, cfg.dt, gen)
        if j % sample_every == 0 or j == n_steps:
            q_hat = eta + w
            zeta_hat = stepper.mixer.coefficients(ou.zeta)
            q_grid = basis.inverse(q_hat)
            theta_grid = basis.inverse(q_hat - zeta_hat)
            times.append(j * cfg.dt)
            q_inf.append(float(np.max(np.abs(q_grid))))
            theta_inf.append(float(np.max(np.abs(theta_grid))))
            zeta_norm.append(float(np.sqrt(np.sum(
                ou.zeta**2 * lam_modes**ALPHA_NOISE))))

    times = np.array(times)
    q_inf = np.array(q_inf)
    theta_inf = np.array(theta_inf)
    zeta_norm = np.array(zeta_norm)

    if radii is None:
        top = max(q_inf.max(), 1e-12)
        radii = np.linspace(top / 8, 1.25 * top, 10)
    radii = np.asarray(sorted(radii), dtype=float)
    fractions = np.array([np.mean(q_inf < r) for r in radii])

    third = len(q_inf) // 3
    thirds = np.array([q_inf[:third].max() if third else q_inf.max(),
                       q_inf[third:2 * third].max() if third else q_inf.max(),
                       q_inf[2 * third:].max()])

    envelope, uninformative, condition = _theta_envelope(
        times, zeta_norm, cfg.gamma, rate, envelope_constant)

    return TightnessReport(
        radii=radii, fractions=fractions, sup_q_inf=float(q_inf.max()),
        thirds=thirds, times=times, q_inf_series=q_inf,
        theta_inf_series=theta_inf, zeta_norm_series=zeta_norm,
        envelope=envelope, envelope_uninformative=uninformative,
        envelope_condition_held=condition,
        envelope_constant=envelope_constant, rate=rate)


def _theta_envelope(times, zeta_norm, gamma, rate, c_const):
    """Exponential envelope for ||theta||_inf from the zeta-norm series:

        E(t) = Z(0) exp(J(t)) +
               int_0^t C (Z(s) + |rate - gamma|) Z(s) exp(J(t) - J(s)) ds,
        J(t) = int_0^t (C Z(r) - gamma) dr,  Z = ||zeta||_{H^alpha}.
    """
    n = len(times)
    growth = c_const * zeta_norm - gamma
    j_cum = np.zeros(n)
    if n > 1:
        j_cum[1:] = np.cumsum(0.5 * (growth[1:] + growth[:-1])
                              * np.diff(times))
    # largest exponent over pairs s <= t without forming the n x n matrix
    max_span = np.max(j_cum - np.minimum.accumulate(j_cum))
    if max_span > 700:
        avg = np.mean(c_const * zeta_norm)
        return None, True, bool(avg < gamma / 2)
    forcing = c_const * (zeta_norm + abs(rate - gamma)) * zeta_norm
    envelope = np.empty(n)
    for s in range(n):
        weights = np.exp(j_cum[s] - j_cum[: s + 1])
        integrand = forcing[: s + 1] * weights
        integral = np.sum(0.5 * (integrand[1:] + integrand[:-1])
                          * np.diff(times[: s + 1])) if s else 0.0
        envelope[s] = zeta_norm[0] * np.exp(j_cum[s]) + integral
    avg = np.mean(c_const * zeta_norm)
    return envelope, False, bool(avg < gamma / 2)
