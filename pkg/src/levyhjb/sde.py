"""Euler-Maruyama integrators for the Levy-driven fading SDEs.

Models
------
long_term
    Log-gain OU process  d beta = -a (beta + b) dt + sigma_beta dL.
short_term
    CIR-like received power.  With a fixed ``target`` the drift pulls chi
    toward it at rate (1/tau)(sigma^2/2) C_eps / target; without one the
    damped form (1/tau)(sigma^2 C_eps / 2 - kappa chi) is used.
iq
    In-phase / quadrature pair  dI = -kappa/2 I dt + sigma/2 dL_I  (same for Q).
slow_fast_composite
    beta and chi coupled through the target e^beta p_in + rho.

Increments over a step of length dt are dt**(1/alpha) times a unit-dispersion
symmetric stable draw, which is exact for the driving process itself.
Received power is clipped at zero after each step because large negative
jumps can overshoot; clipping events are recorded per step.
"""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .rng import PATHS, stream
from .stable import LevyMeasureConfig, sample_standard_sas, truncated_second_moment

FAIL_THRESHOLD = 1e12


def _check_alpha(alpha):
    if not 1.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (1, 2], got {alpha}")


@dataclass(frozen=True)
class LongTermParams:
    a: float
    b: float
    sigma_beta: float
    alpha: float
    beta0: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not self.b > 0:
            raise ValueError("b must be positive")
        if not self.sigma_beta >= 0:
            raise ValueError("sigma_beta must be non-negative")
        _check_alpha(self.alpha)

    def mean(self, t):
        """Exact mean -b + (beta0 + b) e^{-a t} of the OU process."""
        return -self.b + (self.beta0 + self.b) * np.exp(-self.a * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class ShortTermParams:
    sigma_chi: float
    c_eps: float
    alpha: float
    kappa: float = 1.0
    tau: float = 1.0
    rho: float = 1e-3
    chi0: float = 0.0

    def __post_init__(self):
        if not self.sigma_chi >= 0:
            raise ValueError("sigma_chi must be non-negative")
        if not self.c_eps > 0:
            raise ValueError("c_eps must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.chi0 >= 0:
            raise ValueError("chi0 must be non-negative")
        _check_alpha(self.alpha)

    @property
    def steady_state(self) -> float:
        """Mean level sigma^2 C_eps / (2 kappa) of the damped form."""
        return self.sigma_chi**2 * self.c_eps / (2.0 * self.kappa)


@dataclass(frozen=True)
class IQParams:
    kappa: float
    sigma: float
    alpha: float
    i0: float = 0.0
    q0: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        _check_alpha(self.alpha)


@dataclass(frozen=True)
class ChannelParams:
    long_term: LongTermParams
    short_term: ShortTermParams

    def __post_init__(self):
        if self.long_term.alpha != self.short_term.alpha:
            raise ValueError("long- and short-term alpha must match")


@dataclass(frozen=True)
class PathConfig:
    dt: float
    n_steps: int
    n_paths: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1 or self.n_paths < 1:
            raise ValueError("n_steps and n_paths must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class Trajectory:
    """Path ensemble.

    ``values`` has shape (paths, steps + 1, states); ``drift_terms`` and
    ``noise_terms`` have shape (paths, steps, states) and satisfy
    values[:, n + 1] = values[:, n] + drift[:, n] + noise[:, n] except where
    ``clipped`` is set.  Failed paths hold NaN after ``failed_at``.
    """

    model: str
    times: np.ndarray
    values: np.ndarray
    drift_terms: np.ndarray
    noise_terms: np.ndarray
    clipped: np.ndarray
    failed_at: np.ndarray
    state_names: tuple
    params: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def failed(self) -> np.ndarray:
        return self.failed_at >= 0

    def state(self, name: str) -> np.ndarray:
        return self.values[:, :, self.state_names.index(name)]

    def to_csv(self, path):
        names = [f"noise_{s}" for s in self.state_names]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "t", *self.state_names, *names])
            for p in range(self.values.shape[0]):
                for n, t in enumerate(self.times):
                    noise = self.noise_terms[p, n - 1] if n > 0 else np.zeros(len(self.state_names))
                    w.writerow([p, repr(float(t)), *map(_fmt, self.values[p, n]), *map(_fmt, noise)])

    def manifest(self) -> dict:
        return {"model": self.model, "params": self.params, "seed": self.seed,
                "dt": float(self.times[1] - self.times[0]), "n_steps": len(self.times) - 1,
                "n_paths": int(self.values.shape[0])}

    def write_manifest(self, path):
        Path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")


def _fmt(x):
    return repr(float(x))


# -- single steps --------------------------------------------------------


def levy_increment(alpha: float, dt: float, rng: np.random.Generator, size=None):
    """Increment of a unit-dispersion SaS Levy process over ``dt``."""
    _check_alpha(alpha)
    if not dt > 0:
        raise ValueError("dt must be positive")
    return dt ** (1.0 / alpha) * sample_standard_sas(alpha, rng, size)


def long_term_terms(beta, p: LongTermParams, dt, dL):
    return -p.a * (beta + p.b) * dt, p.sigma_beta * dL


def short_term_terms(chi, target, p: ShortTermParams, dt, dL, noise_multiplier=1.0):
    """Drift and diffusion parts of one short-term step toward ``target``.

    ``target=None`` selects the damped form with rate kappa.
    """
    gain = p.sigma_chi**2 * p.c_eps / 2.0
    if target is None:
        drift = (gain - p.kappa * chi) * dt / p.tau
    else:
        drift = gain * (1.0 - chi / target) * dt / p.tau
    noise = noise_multiplier * p.sigma_chi / np.sqrt(p.tau) * np.sqrt(chi) * dL
    return drift, noise


def iq_terms(state, p: IQParams, dt, dL):
    return -0.5 * p.kappa * state * dt, 0.5 * p.sigma * dL


def step_long_term(beta, p: LongTermParams, dt, rng):
    drift, noise = long_term_terms(beta, p, dt, levy_increment(p.alpha, dt, rng, np.shape(beta) or None))
    return beta + drift + noise


def step_short_term(chi, beta, p_in, p: ShortTermParams, dt, rng, noise_multiplier=1.0):
    """One clipped step toward the target e^beta p_in + rho."""
    dL = levy_increment(p.alpha, dt, rng, np.shape(chi) or None)
    target = np.exp(beta) * p_in + p.rho
    drift, noise = short_term_terms(chi, target, p, dt, dL, noise_multiplier)
    return np.maximum(0.0, chi + drift + noise)


def step_cir(chi, p: ShortTermParams, dt, rng, noise_multiplier=1.0):
    """One clipped step of the damped form (mean level sigma^2 C_eps / 2 kappa)."""
    dL = levy_increment(p.alpha, dt, rng, np.shape(chi) or None)
    drift, noise = short_term_terms(chi, None, p, dt, dL, noise_multiplier)
    return np.maximum(0.0, chi + drift + noise)


def step_iq(state, p: IQParams, dt, rng):
    """Independent steps for I and Q; ``state`` has trailing axis of length 2."""
    state = np.asarray(state, dtype=float)
    dL = levy_increment(p.alpha, dt, rng, state.shape)
    drift, noise = iq_terms(state, p, dt, dL)
    return state + drift + noise


# -- path ensembles ------------------------------------------------------


def standard_noise(alpha, cfg: PathConfig, n_noise: int) -> np.ndarray:
    """Unit-dispersion draws of shape (paths, steps, n_noise), one stream per path."""
    out = np.empty((cfg.n_paths, cfg.n_steps, n_noise))
    for path in range(cfg.n_paths):
        out[path] = sample_standard_sas(alpha, stream(cfg.seed, PATHS, path), (cfg.n_steps, n_noise))
    return out


def _schedule(p_in, times):
    if p_in is None:
        raise ValueError("slow_fast_composite needs a transmit-power schedule p_in")
    if callable(p_in):
        return np.array([float(p_in(t)) for t in times[:-1]])
    arr = np.asarray(p_in, dtype=float)
    if arr.ndim == 0:
        return np.full(len(times) - 1, float(arr))
    if arr.shape != (len(times) - 1,):
        raise ValueError("p_in schedule must have one entry per step")
    return arr


def simulate(model: str, params, cfg: PathConfig, *, p_in=None, target=None,
             noise_multiplier: float = 1.0, noise: np.ndarray | None = None) -> Trajectory:
    """Simulate a path ensemble.

    ``noise`` may supply the unit-dispersion draws directly (shape
    (paths, steps, states)); by default they come from per-path streams.
    """
    dt, n = cfg.dt, cfg.n_steps
    times = dt * np.arange(n + 1)

    if model == "long_term":
        names, x0 = ("beta",), [params.beta0]
    elif model == "short_term":
        names, x0 = ("chi",), [params.chi0]
        if target is not None and not target > 0:
            raise ValueError("target must be positive")
    elif model == "iq":
        names, x0 = ("i", "q"), [params.i0, params.q0]
    elif model == "slow_fast_composite":
        names, x0 = ("beta", "chi"), [params.long_term.beta0, params.short_term.chi0]
        schedule = _schedule(p_in, times)
    else:
        raise ValueError(f"unknown model {model!r}")

    alpha = params.long_term.alpha if model == "slow_fast_composite" else params.alpha
    k = len(names)
    if noise is None:
        noise = standard_noise(alpha, cfg, k)
    elif noise.shape != (cfg.n_paths, n, k):
        raise ValueError(f"noise must have shape {(cfg.n_paths, n, k)}")
    dL = dt ** (1.0 / alpha) * noise

    values = np.full((cfg.n_paths, n + 1, k), np.nan)
    drifts = np.zeros((cfg.n_paths, n, k))
    noises = np.zeros((cfg.n_paths, n, k))
    clipped = np.zeros((cfg.n_paths, n), dtype=bool)
    failed_at = np.full(cfg.n_paths, -1)

    x = np.tile(np.asarray(x0, dtype=float), (cfg.n_paths, 1))
    values[:, 0] = x
    alive = np.ones(cfg.n_paths, dtype=bool)
    for step in range(n):
        d = np.zeros_like(x)
        s = np.zeros_like(x)
        if model == "long_term":
            d[:, 0], s[:, 0] = long_term_terms(x[:, 0], params, dt, dL[:, step, 0])
        elif model == "short_term":
            d[:, 0], s[:, 0] = short_term_terms(x[:, 0], target, params, dt, dL[:, step, 0], noise_multiplier)
        elif model == "iq":
            d, s = iq_terms(x, params, dt, dL[:, step])
        else:
            lt, st = params.long_term, params.short_term
            d[:, 0], s[:, 0] = long_term_terms(x[:, 0], lt, dt, dL[:, step, 0])
            goal = np.exp(x[:, 0]) * schedule[step] + st.rho
            d[:, 1], s[:, 1] = short_term_terms(x[:, 1], goal, st, dt, dL[:, step, 1], noise_multiplier)
        new = x + d + s
        if "chi" in names:
            j = names.index("chi")
            clipped[:, step] = new[:, j] < 0.0
            new[:, j] = np.maximum(0.0, new[:, j])
        bad = alive & ~np.all(np.isfinite(new) & (np.abs(new) <= FAIL_THRESHOLD), axis=1)
        failed_at[bad] = step + 1
        alive &= ~bad
        drifts[:, step], noises[:, step] = d, s
        x = np.where(alive[:, None], new, np.nan)
        values[:, step + 1] = x

    if model == "slow_fast_composite":
        recorded = {"long_term": asdict(params.long_term), "short_term": asdict(params.short_term)}
    else:
        recorded = asdict(params)
    recorded = {"params": recorded, "target": target, "noise_multiplier": noise_multiplier}
    return Trajectory(model, times, values, drifts, noises, clipped, failed_at, names, recorded, cfg.seed)


# -- diagnostics ---------------------------------------------------------


def trimmed_mean(x, trim: float = 0.001) -> float:
    """Mean after dropping a ``trim`` fraction from each tail."""
    from scipy.stats import trim_mean

    x = np.asarray(x, dtype=float).ravel()
    return float(trim_mean(x[np.isfinite(x)], trim))


def c_eps_from_truncation(alpha: float, epsilon: float) -> float:
    """Cross-check value for C_eps from the truncation threshold."""
    return truncated_second_moment(LevyMeasureConfig(alpha, 1, epsilon))


@dataclass
class ConsistencyReport:
    iq_trimmed_mean: float
    cir_trimmed_mean: float
    relative_gap: float
    quantiles: dict
    ks_distance: float
    diverged: bool


def iq_power_consistency(iq: IQParams, st: ShortTermParams, cfg: PathConfig, *, burn_in: float = 0.5,
                         trim: float = 0.001) -> ConsistencyReport:
    """Compare chi = I^2 + Q^2 against the damped CIR-like SDE driven directly.

    Samples after the ``burn_in`` fraction of steps are pooled over paths and
    time.  The two simulations use disjoint streams.
    """
    from scipy.stats import ks_2samp

    if iq.alpha != st.alpha or iq.kappa != st.kappa or iq.sigma != st.sigma_chi:
        raise ValueError("IQ and short-term parameters must correspond (alpha, kappa, sigma)")
    if st.tau != 1.0:
        raise ValueError("consistency check runs without time-scale rescaling (tau = 1)")
    traj_iq = simulate("iq", iq, cfg)
    cfg_cir = PathConfig(cfg.dt, cfg.n_steps, cfg.n_paths, cfg.seed + 1)
    traj_cir = simulate("short_term", st, cfg_cir)
    start = int(burn_in * cfg.n_steps)
    chi_iq = (traj_iq.values[:, start:, 0] ** 2 + traj_iq.values[:, start:, 1] ** 2).ravel()
    chi_cir = traj_cir.values[:, start:, 0].ravel()
    diverged = bool(traj_iq.failed.any() or traj_cir.failed.any())
    m_iq, m_cir = trimmed_mean(chi_iq, trim), trimmed_mean(chi_cir, trim)
    qs = (0.1, 0.25, 0.5, 0.75, 0.9)
    table = {q: (float(np.nanquantile(chi_iq, q)), float(np.nanquantile(chi_cir, q))) for q in qs}
    ks = ks_2samp(chi_iq[np.isfinite(chi_iq)], chi_cir[np.isfinite(chi_cir)]).statistic
    return ConsistencyReport(m_iq, m_cir, abs(m_iq - m_cir) / m_cir, table, float(ks), diverged)

