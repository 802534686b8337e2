"""Multi-cell downlink power control driven by Levy fading.

Each base station i serves UE i (more generally the UE with the strongest
median gain).  Link states are the log-gains beta[i, l] and received powers
p[i, l]; the control is a per-BS transmit-power increment in
{-u_step, 0, +u_step}.

The joint value iteration is decomposed into rounds.  In each round every
BS in turn solves a Monte Carlo dynamic program over its own
(transmit power, serving-link power) grid while the other BSs are replayed
from the most recent joint forward run.  The forward runs share one channel
noise realization across rounds, so round costs are directly comparable.
"""

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, hjb
from .rng import FORWARD, POLICY, TIME_SLICE, stream
from .sde import FAIL_THRESHOLD, LongTermParams, ShortTermParams, short_term_terms
from .stable import sample_standard_sas

VARIANTS = ("paper_eq52", "comparative")


@dataclass(frozen=True)
class NetworkConfig:
    """Network, channel and horizon parameters (defaults follow the reference setup).

    ``median_gain[i][l]`` is the median large-scale gain e^{-b} of link
    (i, l), so b = -ln(median_gain).  ``noise_multiplier`` scales the
    short-term diffusion only.
    """

    n_bs: int = 3
    m_ue: int = 3
    serving_gain: float = 0.5
    interfering_gain: float = 0.1
    median_gain: tuple | None = None
    eta: float = 1.0
    p_min: float = 0.0
    p_max: float = 15.0
    p0: float | None = None
    u_step: float = 1.0
    dt: float = 0.1
    n_steps: int = 100
    alpha: float = 1.8
    a: float = 0.1
    sigma_beta: float = 0.1
    sigma_p: float = 0.3
    c_eps: float = 1.0
    tau: float = 0.01
    rho: float = 1e-3
    noise_multiplier: float = 0.1
    substeps: int = 10

    def __post_init__(self):
        if self.n_bs < 1 or self.m_ue < 1:
            raise ValueError("n_bs and m_ue must be >= 1")
        if not 0 <= self.p_min < self.p_max:
            raise ValueError("power bounds must satisfy 0 <= p_min < p_max")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.u_step > 0:
            raise ValueError("u_step must be positive")
        if self.substeps < 1 or self.n_steps < 1 or not self.dt > 0:
            raise ValueError("dt, n_steps and substeps must be positive")
        if not self.noise_multiplier >= 0:
            raise ValueError("noise_multiplier must be non-negative")
        gains = self.gains
        if gains.shape != (self.n_bs, self.m_ue) or np.any(gains <= 0) or np.any(gains >= 1):
            raise ValueError("median gains must lie in (0, 1) with shape (n_bs, m_ue)")
        if self.p0 is not None and not self.p_min <= self.p0 <= self.p_max:
            raise ValueError("p0 must lie within [p_min, p_max]")
        # channel parameter checks live in the sde dataclasses
        self.long_term(0, 0)
        self.short_term

    @property
    def gains(self) -> np.ndarray:
        if self.median_gain is not None:
            return np.array(self.median_gain, dtype=float)
        g = np.full((self.n_bs, self.m_ue), self.interfering_gain)
        for i in range(min(self.n_bs, self.m_ue)):
            g[i, i] = self.serving_gain
        return g

    @property
    def b(self) -> np.ndarray:
        return -np.log(self.gains)

    @property
    def initial_power(self) -> float:
        return 0.5 * (self.p_min + self.p_max) if self.p0 is None else self.p0

    @property
    def horizon(self) -> float:
        return self.dt * self.n_steps

    @property
    def serving(self) -> np.ndarray:
        """Serving BS of each UE."""
        return np.argmax(self.gains, axis=0)

    @property
    def anchor(self) -> np.ndarray:
        """Strongest link (UE index) of each BS, used as its DP state."""
        return np.argmax(self.gains, axis=1)

    def long_term(self, i, l) -> LongTermParams:
        return LongTermParams(self.a, float(self.b[i, l]), self.sigma_beta, self.alpha, -float(self.b[i, l]))

    @property
    def short_term(self) -> ShortTermParams:
        return ShortTermParams(self.sigma_p, self.c_eps, self.alpha, tau=self.tau, rho=self.rho)

    def tx_levels(self) -> np.ndarray:
        """Transmit powers reachable from p0 in steps of u_step, with clamping."""
        p0 = self.initial_power
        k_up = int(np.ceil((self.p_max - p0) / self.u_step - 1e-9))
        k_dn = int(np.ceil((p0 - self.p_min) / self.u_step - 1e-9))
        levels = np.clip(p0 + self.u_step * np.arange(-k_dn, k_up + 1), self.p_min, self.p_max)
        return np.unique(levels)

    def with_alpha(self, alpha) -> "NetworkConfig":
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class CostWeights:
    r_th: float = 1.5
    varsigma: float = 1.0
    lam: float = 0.1
    variant: str = "paper_eq52"
    fairness_weight: float = 1.0
    sum_rate_terminal_weight: float = 0.1
    power_increase_weight: float = 0.1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not self.r_th > 0:
            raise ValueError("r_th must be positive")
        for name in ("varsigma", "lam", "fairness_weight", "sum_rate_terminal_weight", "power_increase_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class NetworkState:
    beta: np.ndarray  # (N, M) log-gains
    power: np.ndarray  # (N, M) received powers
    tx: np.ndarray  # (N,) transmit powers
    t: float = 0.0

    def __post_init__(self):
        if np.any(self.power < 0):
            raise ValueError("received powers must be non-negative")


def initial_state(cfg: NetworkConfig) -> NetworkState:
    """Links start at their median gain and at the target received power."""
    beta = -cfg.b
    tx = np.full(cfg.n_bs, cfg.initial_power)
    return NetworkState(beta, np.exp(beta) * tx[:, None] + cfg.rho, tx, 0.0)


# -- link quality and costs -------------------------------------------------


def sinr(state: NetworkState, ue: int, bs: int, eta: float) -> float:
    """p[bs, ue] over the interference from every other BS plus eta."""
    p = state.power[:, ue]
    return float(p[bs] / (p.sum() - p[bs] + eta))


def sinr_matrix(power: np.ndarray, eta: float) -> np.ndarray:
    """gamma[i, l] for every pair, treating i as the serving BS of l."""
    total = power.sum(axis=0, keepdims=True)
    return power / (total - power + eta)


def ue_sinr(power: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    """Per-UE SINR on the serving link, shape (M,)."""
    return sinr_matrix(power, cfg.eta)[cfg.serving, np.arange(cfg.m_ue)]


def pair_costs(gamma: np.ndarray, tx: np.ndarray, w: CostWeights) -> np.ndarray:
    """The three-term cost of every (i, l) pair."""
    return -np.log2(1.0 + gamma) + w.varsigma * np.maximum(w.r_th - gamma, 0.0) + w.lam * tx[:, None]


def stage_cost(state: NetworkState, weights: CostWeights, eta: float = 1.0) -> float:
    """Sum over all (i, l) of -log2(1 + gamma) + varsigma (r_th - gamma)^+ + lambda tx_i."""
    return float(pair_costs(sinr_matrix(state.power, eta), state.tx, weights).sum())


def comparative_cost(state: NetworkState, prev_tx, weights: CostWeights, cfg: NetworkConfig):
    """(running, terminal) costs of the comparative variant on per-UE SINRs."""
    gamma = ue_sinr(state.power, cfg)
    structural = weights.varsigma * np.maximum(weights.r_th - gamma, 0.0).sum() + weights.fairness_weight * gamma.var()
    increase = np.maximum(0.0, np.asarray(state.tx) - np.asarray(prev_tx))
    running = weights.power_increase_weight * float(np.sum(increase**2)) + structural
    terminal = structural - weights.sum_rate_terminal_weight * float(np.log2(1.0 + gamma).sum())
    return float(running), float(terminal)


def apply_action(state: NetworkState, actions, cfg: NetworkConfig) -> NetworkState:
    """Add per-BS increments to tx and clamp to [p_min, p_max]."""
    tx = np.clip(state.tx + np.asarray(actions, dtype=float), cfg.p_min, cfg.p_max)
    return NetworkState(state.beta.copy(), state.power.copy(), tx, state.t)


# -- dynamics ---------------------------------------------------------------


def step_draws(cfg: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """Unit stable draws for one step: (substeps, 2, N, M) for beta and p."""
    return sample_standard_sas(cfg.alpha, rng, (cfg.substeps, 2, cfg.n_bs, cfg.m_ue))


def power_substep(p, target, st: ShortTermParams, h, dL, noise_multiplier):
    """One substep of the received-power SDE; returns (unclipped p, noise term).

    The drift is linear in p with rate (sigma^2 C_eps / 2 tau) / target, which
    is stiff when the target is near rho, so it is integrated exactly over
    the substep.  For rate * h << 1 this coincides with the Euler drift.
    """
    _, noise = short_term_terms(p, target, st, h, dL, noise_multiplier)
    rate = st.sigma_chi**2 * st.c_eps / (2.0 * st.tau) / target
    return target + (p - target) * np.exp(-rate * h) + noise, noise


@dataclass
class StepRecord:
    noise: np.ndarray  # (N, M) summed short-term diffusion terms
    clipped: np.ndarray  # (N, M) bool
    failed: bool


def network_step(state: NetworkState, cfg: NetworkConfig, dt: float, rng=None, *, draws=None, noise_on=True):
    """Advance beta and p over ``dt`` with ``cfg.substeps`` Euler substeps.

    p[i, l] is pulled toward e^{beta[i, l]} tx_i + rho.  Either an rng or
    precomputed ``draws`` from :func:`step_draws` must be given.
    Returns (new state, StepRecord).
    """
    if draws is None:
        draws = step_draws(cfg, rng)
    h = dt / cfg.substeps
    scale = h ** (1.0 / cfg.alpha) if noise_on else 0.0
    st = cfg.short_term
    beta, p = state.beta.copy(), state.power.copy()
    noise_sum = np.zeros_like(p)
    clipped = np.zeros(p.shape, dtype=bool)
    b = cfg.b
    for s in range(cfg.substeps):
        drift_b = -cfg.a * (beta + b) * h
        noise_b = cfg.sigma_beta * scale * draws[s, 0]
        target = np.exp(beta) * state.tx[:, None] + cfg.rho
        nxt, noise_p = power_substep(p, target, st, h, scale * draws[s, 1], cfg.noise_multiplier)
        clipped |= nxt < 0
        p = np.maximum(nxt, 0.0)
        beta = beta + drift_b + noise_b
        noise_sum += noise_p
    failed = bool(np.any(~np.isfinite(p)) or np.any(np.abs(p) > FAIL_THRESHOLD)
                  or np.any(~np.isfinite(beta)))
    return NetworkState(beta, p, state.tx.copy(), state.t + dt), StepRecord(noise_sum, clipped, failed)


def forward_noise(cfg: NetworkConfig, seed: int) -> np.ndarray:
    """Channel draws for a whole horizon, (n_steps, substeps, 2, N, M)."""
    rng = stream(seed, FORWARD)
    return sample_standard_sas(cfg.alpha, rng, (cfg.n_steps, cfg.substeps, 2, cfg.n_bs, cfg.m_ue))


def random_actions(cfg: NetworkConfig, seed: int) -> np.ndarray:
    """Uniform random increments for the initial round, (n_steps, N)."""
    rng = stream(seed, POLICY)
    return cfg.u_step * rng.integers(-1, 2, size=(cfg.n_steps, cfg.n_bs)).astype(float)


# -- per-BS costs used inside the dynamic program ---------------------------


def _bs_costs(i, power, tx_new, tx_old, cfg: NetworkConfig, w: CostWeights):
    """(running, terminal) costs charged to BS i for a batch of power matrices (m, N, M)."""
    total = power.sum(axis=1, keepdims=True)
    gamma = power / (total - power + cfg.eta)
    if w.variant == "paper_eq52":
        row = gamma[:, i, :]
        running = (-np.log2(1.0 + row) + w.varsigma * np.maximum(w.r_th - row, 0.0)).sum(axis=1)
        running = running + w.lam * tx_new * cfg.m_ue
        return running, np.zeros(len(power))
    ue_gamma = gamma[:, cfg.serving, np.arange(cfg.m_ue)]
    mine = cfg.serving == i
    outage = w.varsigma * np.maximum(w.r_th - ue_gamma[:, mine], 0.0).sum(axis=1)
    fair = w.fairness_weight * ue_gamma.var(axis=1)
    running = w.power_increase_weight * np.maximum(0.0, tx_new - tx_old) ** 2 + outage + fair
    terminal = outage + fair - w.sum_rate_terminal_weight * np.log2(1.0 + ue_gamma[:, mine]).sum(axis=1)
    return running, terminal


def _replay_powers(i, replay_beta, replay_power, tx_new, p_anchor, cfg):
    """Power matrices with BS i's row replaced: anchor link from the DP state, others at target."""
    m = len(tx_new)
    power = np.broadcast_to(replay_power, (m, *replay_power.shape)).copy()
    power[:, i, :] = np.exp(replay_beta[i])[None, :] * tx_new[:, None] + cfg.rho
    power[:, i, cfg.anchor[i]] = p_anchor
    return power


@dataclass(frozen=True)
class DPConfig:
    samples: int = 128
    p_nodes: int = 8
    antithetic: bool = True
    scheme: str = "gauss_seidel"

    def __post_init__(self):
        if self.samples < 1 or self.p_nodes < 2:
            raise ValueError("samples must be >= 1 and p_nodes >= 2")
        if self.scheme not in ("gauss_seidel", "jacobi"):
            raise ValueError("scheme must be gauss_seidel or jacobi")


def _derived_seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


class Controller:
    """Dynamic-programming controller of one BS against a replayed network."""

    def __init__(self, i, replay, cfg: NetworkConfig, weights: CostWeights, dp: DPConfig, seed: int,
                 noise_on: bool = True):
        self.i, self.cfg, self.weights = i, cfg, weights
        self.noise_on = noise_on
        k = cfg.anchor[i]
        beta_anchor = replay.beta[:, i, k]
        p_hi = 1.25 * cfg.p_max * float(np.exp(beta_anchor).max()) + cfg.rho
        self.axes = [cfg.tx_levels(), np.linspace(0.0, p_hi, dp.p_nodes)]
        self.replay = replay
        actions = [-cfg.u_step, 0.0, cfg.u_step]
        dt = cfg.dt

        def index(t):
            return min(int(round(t / dt)), cfg.n_steps)

        def running(t, x, u):
            n = index(t)
            tx_new = np.clip(x[:, 0] + u, cfg.p_min, cfg.p_max)
            power = _replay_powers(i, replay.beta[n], replay.power[n], tx_new, x[:, 1], cfg)
            return _bs_costs(i, power, tx_new, x[:, 0], cfg, weights)[0]

        def terminal(x):
            n = cfg.n_steps
            power = _replay_powers(i, replay.beta[n], replay.power[n], x[:, 0], x[:, 1], cfg)
            return _bs_costs(i, power, x[:, 0], x[:, 0], cfg, weights)[1]

        def drift(x, u):
            target = np.exp(beta_anchor.mean()) * np.clip(x[:, 0] + u, cfg.p_min, cfg.p_max) + cfg.rho
            gain = cfg.sigma_p**2 * cfg.c_eps / (2.0 * cfg.tau)
            return np.stack([np.full(len(x), u / dt), gain * (1.0 - x[:, 1] / target)], axis=1)

        def step(n, t, x, u, dt_, draws):
            return self._step(n, x, u, draws)

        self.problem = hjb.ControlProblem(
            drift=drift, noise=None, alpha=cfg.alpha, running_cost=running, terminal_cost=terminal,
            actions=actions, horizon=(0.0, cfg.horizon), state_box=[(a[0], a[-1]) for a in self.axes],
            step=step, n_noise=cfg.substeps)
        self.sweep = hjb.SweepConfig(n_steps=cfg.n_steps, grid=tuple(self.axes), samples=dp.samples,
                                     seed=_derived_seed(seed, TIME_SLICE, i), antithetic=dp.antithetic)
        self.values, self.policy = hjb.backward_sweep(self.problem, "mc_lookahead", self.sweep)
        self._draws = {}

    def _step(self, n, x, u, draws):
        cfg = self.cfg
        h = cfg.dt / cfg.substeps
        scale = h ** (1.0 / cfg.alpha) if self.noise_on else 0.0
        st = cfg.short_term
        tx_new = np.clip(x[:, 0] + u, cfg.p_min, cfg.p_max)
        target = (np.exp(self.replay.beta[n, self.i, cfg.anchor[self.i]]) * tx_new + cfg.rho)[:, None]
        p = np.repeat(x[:, 1:2], len(draws), axis=1)
        for s in range(cfg.substeps):
            p = np.maximum(power_substep(p, target, st, h, scale * draws[None, :, s], cfg.noise_multiplier)[0], 0.0)
        return np.stack([np.broadcast_to(tx_new[:, None], p.shape), p], axis=2)

    def act(self, n: int, tx: float, p_anchor: float) -> float:
        """Greedy action against V(t_{n+1}) with the same transition draws as the sweep."""
        if n not in self._draws:
            self._draws[n] = hjb.stable_draws(self.problem, self.sweep, n)
        draws = self._draws[n]
        x = np.array([[tx, p_anchor]])
        t = self.values.time_grid[n]
        v_next = self.values.values[n + 1]
        best, best_u = np.inf, 0.0
        for u in self.problem.actions:
            nxt = self.problem.clamp(self._step(n, x, u, draws).reshape(-1, 2))
            q = self.problem.running_cost(t, x, u)[0] * self.cfg.dt + hjb.interpolate(self.axes, v_next, nxt).mean()
            if q < best:
                best, best_u = q, u
        return best_u


# -- joint forward runs -------------------------------------------------------


@dataclass
class Rollout:
    """One joint forward run.

    beta, power and sinr have n_steps + 1 entries in time; tx, actions and
    cost are per step.  tx[n] is the transmit power in force during step n
    (after that step's action) and cost[n] its stage cost; noise[n] and
    clipped[n] belong to the step ending at t_{n+1}.  value[n] is the
    realized cost-to-go from t_n, so value[-1] is the terminal cost.
    """

    beta: np.ndarray
    power: np.ndarray
    tx: np.ndarray
    actions: np.ndarray
    cost: np.ndarray
    terminal: float
    sinr: np.ndarray
    noise: np.ndarray
    clipped: np.ndarray
    value: np.ndarray
    failed: bool


def simulate_network(cfg: NetworkConfig, weights: CostWeights, controllers, noise: np.ndarray,
                     noise_on: bool = True) -> Rollout:
    """Joint forward run.  ``controllers[i]`` is a Controller or a fixed (n_steps,) action array."""
    n_t, dt = cfg.n_steps, cfg.dt
    state = initial_state(cfg)
    beta = np.empty((n_t + 1, cfg.n_bs, cfg.m_ue))
    power = np.empty_like(beta)
    tx = np.empty((n_t, cfg.n_bs))
    actions = np.empty((n_t, cfg.n_bs))
    cost = np.empty(n_t)
    noise_terms = np.empty((n_t, cfg.n_bs, cfg.m_ue))
    clipped = np.zeros((n_t, cfg.n_bs, cfg.m_ue), dtype=bool)
    failed = False
    beta[0], power[0] = state.beta, state.power
    for n in range(n_t):
        for i, c in enumerate(controllers):
            if isinstance(c, Controller):
                actions[n, i] = c.act(n, state.tx[i], state.power[i, cfg.anchor[i]])
            else:
                actions[n, i] = c[n]
        prev_tx = state.tx
        state = apply_action(state, actions[n], cfg)
        tx[n] = state.tx
        if weights.variant == "paper_eq52":
            cost[n] = stage_cost(state, weights, cfg.eta)
        else:
            cost[n] = comparative_cost(state, prev_tx, weights, cfg)[0]
        state, rec = network_step(state, cfg, dt, draws=noise[n], noise_on=noise_on)
        beta[n + 1], power[n + 1] = state.beta, state.power
        noise_terms[n], clipped[n] = rec.noise, rec.clipped
        failed |= rec.failed
    terminal = 0.0
    if weights.variant == "comparative":
        terminal = comparative_cost(state, state.tx, weights, cfg)[1]
    sinr_ue = np.stack([ue_sinr(p, cfg) for p in power])
    value = np.empty(n_t + 1)
    value[-1] = terminal
    value[:-1] = terminal + np.cumsum((cost * dt)[::-1])[::-1]
    return Rollout(beta, power, tx, actions, cost, terminal, sinr_ue, noise_terms, clipped, value, failed)


@dataclass
class RunArtifacts:
    cfg: NetworkConfig
    weights: CostWeights
    dp: DPConfig
    seed: int
    rounds: list  # Rollout per round, round 0 = random policy
    noise_on: bool = True
    controllers: list = field(default_factory=list, repr=False)

    def total_costs(self) -> np.ndarray:
        """Realized total cost per round (running integral plus terminal)."""
        return np.array([r.value[0] for r in self.rounds])

    def sinr_fraction(self, round_index: int = -1, r_th: float | None = None) -> np.ndarray:
        """Per-UE fraction of timesteps t_1..t_N with SINR >= r_th."""
        r_th = self.weights.r_th if r_th is None else r_th
        return (self.rounds[round_index].sinr[1:] >= r_th).mean(axis=0)

    def manifest(self) -> dict:
        return {
            "code_version": __version__,
            "seed": self.seed,
            "rounds": len(self.rounds) - 1,
            "noise_on": self.noise_on,
            "network": asdict(self.cfg),
            "weights": asdict(self.weights),
            "dp": asdict(self.dp),
            "derived": {
                "b": self.cfg.b.tolist(),
                "p0": self.cfg.initial_power,
                "tx_levels": self.cfg.tx_levels().tolist(),
                "serving": self.cfg.serving.tolist(),
                "horizon": self.cfg.horizon,
            },
            "total_cost": [float(c) for c in self.total_costs()],
            "failed_rounds": [k for k, r in enumerate(self.rounds) if r.failed],
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        times = self.cfg.dt * np.arange(self.cfg.n_steps + 1)
        f = _fmt
        with _writer(out / "powers.csv", ["round", "t", "bs", "tx", "action"]) as w:
            for k, r in enumerate(self.rounds):
                for n in range(self.cfg.n_steps):
                    for i in range(self.cfg.n_bs):
                        w.writerow([k, f(times[n]), i, f(r.tx[n, i]), f(r.actions[n, i])])
        with _writer(out / "sinr.csv", ["round", "t", "ue", "sinr"]) as w:
            for k, r in enumerate(self.rounds):
                for n in range(self.cfg.n_steps + 1):
                    for l in range(self.cfg.m_ue):
                        w.writerow([k, f(times[n]), l, f(r.sinr[n, l])])
        with _writer(out / "value.csv", ["round", "t", "value"]) as w:
            for k, r in enumerate(self.rounds):
                for n in range(self.cfg.n_steps + 1):
                    w.writerow([k, f(times[n]), f(r.value[n])])
        with _writer(out / "noise.csv", ["round", "t", "bs", "ue", "p", "noise"]) as w:
            for k, r in enumerate(self.rounds):
                for n in range(self.cfg.n_steps):
                    for i in range(self.cfg.n_bs):
                        for l in range(self.cfg.m_ue):
                            w.writerow([k, f(times[n + 1]), i, l, f(r.power[n + 1, i, l]), f(r.noise[n, i, l])])
        (out / "manifest.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return out


class _writer:
    def __init__(self, path, header):
        self.path, self.header = path, header

    def __enter__(self):
        self.fh = open(self.path, "w", newline="")
        w = csv.writer(self.fh, lineterminator="\n")
        w.writerow(self.header)
        return w

    def __exit__(self, *exc):
        self.fh.close()


def _fmt(x):
    return repr(float(x))


def run_downlink(cfg: NetworkConfig, weights: CostWeights, rounds: int = 100, dp: DPConfig | None = None,
                 seed: int = 0, noise_on: bool = True, progress=None) -> RunArtifacts:
    """Round-based value iteration; round 0 replays uniformly random actions."""
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    dp = DPConfig() if dp is None else dp
    noise = forward_noise(cfg, seed)
    policies = [col.copy() for col in random_actions(cfg, seed).T]
    replay = simulate_network(cfg, weights, policies, noise, noise_on)
    history = [replay]
    last_inputs = None
    r = 0
    while r < rounds:
        r += 1
        frozen = replay
        inputs = []
        for i in range(cfg.n_bs):
            source = frozen if dp.scheme == "jacobi" else replay
            inputs.append(source)
            policies[i] = Controller(i, source, cfg, weights, dp, seed, noise_on)
            if dp.scheme == "gauss_seidel":
                replay = simulate_network(cfg, weights, policies, noise, noise_on)
        if dp.scheme == "jacobi":
            replay = simulate_network(cfg, weights, policies, noise, noise_on)
        history.append(replay)
        if progress is not None:
            progress(r, replay)
        # Controllers depend only on their replay input, so once a round sees the
        # same inputs as the one before, every later round repeats it exactly.
        if last_inputs is not None and all(_same_rollout(a, b) for a, b in zip(inputs, last_inputs)):
            while r < rounds:
                r += 1
                history.append(replay)
                if progress is not None:
                    progress(r, replay)
        last_inputs = inputs
    return RunArtifacts(cfg, weights, dp, seed, history, noise_on, policies)


def _same_rollout(a: Rollout, b: Rollout) -> bool:
    return all(np.array_equal(getattr(a, f), getattr(b, f), equal_nan=True) for f in ("beta", "power"))


def noise_power_exceedance(artifacts: RunArtifacts, round_index: int = -1) -> dict:
    """Count steps whose |noise term| exceeds the received power at the end of the step."""
    r = artifacts.rounds[round_index]
    exceed = np.abs(r.noise) > r.power[1:]
    per_link = exceed.sum(axis=0)
    total = int(per_link.sum())
    slots = exceed.size
    return {"per_link": per_link, "total": total, "slots": slots, "fraction": total / slots}


def action_changes(r: Rollout) -> int:
    """Steps at which a BS switches to a different action than on its previous step."""
    return int(np.sum(r.actions[1:] != r.actions[:-1]))


def sinr_iqr(r: Rollout) -> float:
    q1, q3 = np.percentile(r.sinr[1:], [25, 75])
    return float(q3 - q1)


@dataclass
class Comparison:
    gaussian: RunArtifacts
    levy: RunArtifacts
    summary: dict


def gaussian_levy_comparison(cfg: NetworkConfig, seed: int = 0, rounds: int = 100, dp: DPConfig | None = None,
                             weights: CostWeights | None = None, noise_on: bool = True,
                             levy_alpha: float = 1.8, levy_weight: float = 0.1, gaussian_weight: float = 1.0,
                             progress=None) -> Comparison:
    """Matched-seed comparative-cost runs at alpha = 2 and alpha = ``levy_alpha``."""
    base = CostWeights(variant="comparative") if weights is None else replace(weights, variant="comparative")
    gauss = run_downlink(cfg.with_alpha(2.0), replace(base, sum_rate_terminal_weight=gaussian_weight), rounds, dp,
                         seed, noise_on, progress)
    levy = run_downlink(cfg.with_alpha(levy_alpha), replace(base, sum_rate_terminal_weight=levy_weight), rounds, dp,
                        seed, noise_on, progress)
    horizon = cfg.horizon
    summary = {}
    for name, art in (("gaussian", gauss), ("levy", levy)):
        last = art.rounds[-1]
        summary[name] = {
            "alpha": art.cfg.alpha,
            "sum_rate_terminal_weight": art.weights.sum_rate_terminal_weight,
            "action_changes": action_changes(last),
            "action_changes_per_time": action_changes(last) / horizon,
            "nonzero_actions": int(np.count_nonzero(last.actions)),
            "sinr_iqr": sinr_iqr(last),
            "sinr_fraction_above": art.sinr_fraction().tolist(),
            "total_cost": float(last.value[0]),
        }
    return Comparison(gauss, levy, summary)


def joint_control_problem(cfg: NetworkConfig, weights: CostWeights, tx=None) -> hjb.ControlProblem:
    """Centralized problem over the flattened (beta, p) state with joint increments.

    The state is [beta.ravel(), p.ravel()]; actions are tuples of per-BS
    increments and p_in = tx + u.  Used for Hamiltonian diagnostics.
    """
    from itertools import product

    n, m = cfg.n_bs, cfg.m_ue
    base = np.full(n, cfg.initial_power) if tx is None else np.asarray(tx, dtype=float)
    b = cfg.b.ravel()
    gain = cfg.sigma_p**2 * cfg.c_eps / (2.0 * cfg.tau)

    def unpack(x):
        return x[:, : n * m], x[:, n * m:]

    def p_in(u):
        return np.clip(base + np.asarray(u, dtype=float), cfg.p_min, cfg.p_max)

    def drift(x, u):
        beta, p = unpack(x)
        target = np.exp(beta) * np.repeat(p_in(u), m)[None, :] + cfg.rho
        return np.concatenate([-cfg.a * (beta + b), gain * (1.0 - p / target)], axis=1)

    def running(t, x, u):
        _, p = unpack(x)
        out = np.empty(len(x))
        for k, row in enumerate(p):
            out[k] = pair_costs(sinr_matrix(row.reshape(n, m), cfg.eta), p_in(u), weights).sum()
        return out

    box = [(-b_ - 3.0, -b_ + 3.0) for b_ in b] + [(0.0, 2.0 * cfg.p_max)] * (n * m)
    return hjb.ControlProblem(drift, None, cfg.alpha, running, lambda x: np.zeros(len(x)),
                              list(product((-cfg.u_step, 0.0, cfg.u_step), repeat=n)), (0.0, cfg.horizon), box)
