"""Backward dynamic programming for finite-horizon control of Levy-driven states.

Two monotone schemes share one contract, V(T) = g and

    V(t_n, x) = min_u [ L(t_n, x, u) dt + E V(t_{n+1}, X'(x, u)) ].

``semi_lagrangian`` evaluates the expectation as interpolation at the drift
foot point of V(t_{n+1}) advanced by dt under the nonlocal generator from
:mod:`levyhjb.riesz`.  The generator update is explicit, split into as many
substeps as needed to keep every coefficient non-negative.
``mc_lookahead`` averages over K sampled stable transitions, shared by every
node and action within a time slice.  Both use multilinear interpolation
with states clamped to the box, so every weight is non-negative.
"""

import csv
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .riesz import GridFn, SigmaField, generator_matrix
from .rng import TIME_SLICE, stream
from .stable import sample_standard_sas


@dataclass
class ControlProblem:
    """Finite-horizon problem on a rectangular state box.

    drift(x, u) and running_cost(t, x, u) receive states of shape
    (nodes, dim) and return (nodes, dim) and (nodes,) respectively;
    terminal_cost(x) returns (nodes,).  ``step`` optionally replaces the
    Euler transition used by ``mc_lookahead``: step(n, t, x, u, dt, draws)
    maps states (nodes, dim) and unit stable draws (K, n_noise) to next
    states (nodes, K, dim).
    """

    drift: Callable
    noise: SigmaField | None
    alpha: float
    running_cost: Callable
    terminal_cost: Callable
    actions: Sequence
    horizon: tuple
    state_box: Sequence
    step: Callable | None = None
    n_noise: int | None = None

    def __post_init__(self):
        if len(self.actions) == 0:
            raise ValueError("action set must be non-empty")
        if not 1.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (1, 2], got {self.alpha}")
        t0, t1 = self.horizon
        if not t1 > t0:
            raise ValueError("horizon must satisfy T > t0")
        self.state_box = [tuple(map(float, b)) for b in self.state_box]
        if any(hi <= lo for lo, hi in self.state_box):
            raise ValueError("state box bounds must satisfy lo < hi")
        if self.n_noise is None:
            self.n_noise = self.dim

    @property
    def dim(self) -> int:
        return len(self.state_box)

    def drift_lipschitz(self, n_samples: int = 200, seed: int = 0) -> float:
        """Finite-difference estimate of the drift Lipschitz constant over the box."""
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in self.state_box])
        hi = np.array([b[1] for b in self.state_box])
        x = rng.uniform(lo, hi, (n_samples, self.dim))
        y = rng.uniform(lo, hi, (n_samples, self.dim))
        dist = np.linalg.norm(x - y, axis=1)
        best = 0.0
        for u in self.actions:
            gap = np.linalg.norm(self.drift(x, u) - self.drift(y, u), axis=1)
            best = max(best, float(np.max(gap / np.maximum(dist, 1e-300))))
        return best

    def clamp(self, x):
        lo = np.array([b[0] for b in self.state_box])
        hi = np.array([b[1] for b in self.state_box])
        return np.clip(x, lo, hi)


@dataclass(frozen=True)
class SweepConfig:
    """Discretization: time steps, state grid, and Monte Carlo sample count.

    Give either ``nodes`` (per-dimension counts, uniform over the box) or
    explicit ``grid`` axes.
    """

    n_steps: int
    nodes: tuple | None = None
    grid: tuple | None = None
    samples: int = 1000
    seed: int = 0
    antithetic: bool = True

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if (self.nodes is None) == (self.grid is None):
            raise ValueError("give exactly one of nodes or grid")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")

    def axes(self, problem: ControlProblem) -> list:
        if self.grid is not None:
            axes = [np.asarray(a, dtype=float) for a in self.grid]
        else:
            axes = [np.linspace(lo, hi, k) for (lo, hi), k in zip(problem.state_box, self.nodes)]
        if len(axes) != problem.dim:
            raise ValueError("grid dimension does not match the state box")
        for a in axes:
            if a.size < 2 or np.any(np.diff(a) <= 0):
                raise ValueError("grid axes must be strictly increasing with >= 2 nodes")
        return axes


@dataclass
class ValueTable:
    time_grid: np.ndarray
    axes: list
    values: np.ndarray  # (n_steps + 1, *grid shape)

    @property
    def shape(self):
        return self.values.shape[1:]

    def points(self) -> np.ndarray:
        return _grid_points(self.axes)

    def to_csv(self, path):
        _table_csv(path, self.time_grid, self.axes, self.values, "value", float)


@dataclass
class Policy:
    time_grid: np.ndarray  # decision times t_0 .. t_{N-1}
    axes: list
    index: np.ndarray  # (n_steps, *grid shape) action indices
    actions: list = field(default_factory=list)

    def action(self, n: int, node: int):
        return self.actions[self.index[n].ravel()[node]]

    def to_csv(self, path):
        _table_csv(path, self.time_grid, self.axes, self.index, "action", int)


def _table_csv(path, times, axes, data, name, kind):
    pts = _grid_points(axes)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *[f"x{i}" for i in range(len(axes))], name])
        for n, t in enumerate(times):
            flat = data[n].ravel()
            for p, v in zip(pts, flat):
                w.writerow([repr(float(t)), *map(lambda c: repr(float(c)), p), repr(kind(v))])


def _grid_points(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def interpolation_weights(axes, points):
    """Multilinear interpolation stencil for ``points`` (m, d), clamped to the grid.

    Returns flat node indices and non-negative weights, both (m, 2**d),
    with weights summing to one per point.
    """
    points = np.atleast_2d(points)
    m, d = points.shape
    shape = [a.size for a in axes]
    lower, frac = [], []
    for k, a in enumerate(axes):
        x = np.clip(points[:, k], a[0], a[-1])
        i = np.clip(np.searchsorted(a, x, side="right") - 1, 0, a.size - 2)
        lower.append(i)
        frac.append(np.clip((x - a[i]) / (a[i + 1] - a[i]), 0.0, 1.0))
    idx = np.zeros((m, 2**d), dtype=np.int64)
    w = np.ones((m, 2**d))
    strides = np.cumprod([1] + shape[::-1])[:-1][::-1]
    for c, corner in enumerate(product((0, 1), repeat=d)):
        for k, bit in enumerate(corner):
            idx[:, c] += (lower[k] + bit) * strides[k]
            w[:, c] *= frac[k] if bit else 1.0 - frac[k]
    return idx, w


def interpolate(axes, values, points):
    idx, w = interpolation_weights(axes, points)
    return np.sum(values.ravel()[idx] * w, axis=1)


# -- Hamiltonian -----------------------------------------------------------


def hamiltonian(problem: ControlProblem, x, p, t=None):
    """min over actions of p . b(x, u) + L(t, x, u), with the lowest index on ties."""
    t = problem.horizon[0] if t is None else t
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p = np.asarray(p, dtype=float).reshape(-1)
    vals = np.array([
        float(np.dot(p, problem.drift(x, u)[0]) + problem.running_cost(t, x, u)[0]) for u in problem.actions
    ])
    i = int(np.argmin(vals))
    return float(vals[i]), i


def costate(vt: ValueTable, n: int) -> np.ndarray:
    """Centered finite-difference gradient of V(t_n) at every node, shape (nodes, dim)."""
    grads = np.gradient(vt.values[n], *vt.axes, edge_order=1)
    if vt.values.ndim == 2:
        grads = [grads]
    return np.stack([g.ravel() for g in grads], axis=1)


def estimate_hamiltonian_growth(problem: ControlProblem, n_samples: int = 200, seed: int = 0) -> float:
    """C_H ~ max over sampled (t, x, unit q) of |H(x, q) - H(x, 0)| + |H(x, 0)|."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in problem.state_box])
    hi = np.array([b[1] for b in problem.state_box])
    t0, t1 = problem.horizon
    best = 0.0
    for _ in range(n_samples):
        x = rng.uniform(lo, hi)
        q = rng.normal(size=problem.dim)
        q /= np.linalg.norm(q)
        t = rng.uniform(t0, t1)
        h0, _ = hamiltonian(problem, x, np.zeros(problem.dim), t)
        hq, _ = hamiltonian(problem, x, q, t)
        best = max(best, abs(hq - h0) + abs(h0))
    return best


# -- schemes -----------------------------------------------------------------


def time_grid(problem: ControlProblem, cfg: SweepConfig) -> np.ndarray:
    t0, t1 = problem.horizon
    return t0 + (t1 - t0) * np.arange(cfg.n_steps + 1) / cfg.n_steps


def stable_draws(problem: ControlProblem, cfg: SweepConfig, n: int) -> np.ndarray:
    """Unit stable draws (K, n_noise) shared by all nodes and actions at step ``n``."""
    rng = stream(cfg.seed, TIME_SLICE, n)
    if cfg.antithetic:
        half = sample_standard_sas(problem.alpha, rng, ((cfg.samples + 1) // 2, problem.n_noise))
        return np.concatenate([half, -half])[: cfg.samples]
    return sample_standard_sas(problem.alpha, rng, (cfg.samples, problem.n_noise))


class Transition:
    """Row-stochastic Monte Carlo transition stored as a gather stencil.

    Row i averages V over ``idx[i]`` with non-negative ``weight[i]``
    (interpolation corners of all K sampled next states, already divided by K).
    """

    def __init__(self, idx, weight):
        self.idx, self.weight = idx, weight

    def __matmul__(self, v):
        return np.sum(np.asarray(v)[self.idx] * self.weight, axis=1)

    def toarray(self) -> np.ndarray:
        out = np.zeros((len(self.idx), len(self.idx)))
        np.add.at(out, (np.repeat(np.arange(len(self.idx)), self.idx.shape[1]), self.idx.ravel()),
                  self.weight.ravel())
        return out


def transition_operators(problem: ControlProblem, cfg: SweepConfig) -> list:
    """Row-stochastic transitions P[n][a] for the Monte Carlo scheme."""
    axes = cfg.axes(problem)
    pts = _grid_points(axes)
    nodes = len(pts)
    times = time_grid(problem, cfg)
    dt = times[1] - times[0]
    sigma = problem.noise.at(pts) if problem.noise is not None else np.zeros(nodes)
    out = []
    for n in range(cfg.n_steps):
        draws = stable_draws(problem, cfg, n)
        k = len(draws)
        per_action = []
        for u in problem.actions:
            if problem.step is not None:
                nxt = problem.step(n, times[n], pts, u, dt, draws)
            else:
                base = pts + problem.drift(pts, u) * dt
                jump = dt ** (1.0 / problem.alpha) * sigma[:, None, None] * draws[None, :, : problem.dim]
                nxt = base[:, None, :] + jump
            nxt = problem.clamp(nxt.reshape(nodes * k, problem.dim))
            idx, w = interpolation_weights(axes, nxt)
            per_action.append(Transition(idx.reshape(nodes, -1), w.reshape(nodes, -1) / k))
        out.append(per_action)
    return out


def _check_cfl(problem, axes, pts, dt):
    speed = max(np.abs(problem.drift(pts, u)).max() for u in problem.actions)
    dx = min(np.diff(a).min() for a in axes)
    if speed * dt / dx > 1.0 + 1e-9:
        warnings.warn(f"CFL condition violated: dt*speed/dx = {speed * dt / dx:.3g} > 1", RuntimeWarning)


def diffusion_operator(generator: np.ndarray, dt: float) -> np.ndarray:
    """(I + dt/m G)^m with the fewest substeps m that keep all entries non-negative."""
    m = max(1, int(np.ceil(dt * np.abs(np.diag(generator)).max())))
    step = np.eye(len(generator)) + (dt / m) * generator
    return np.linalg.matrix_power(step, m)


def _running(problem, t, pts, u):
    cost = np.broadcast_to(np.asarray(problem.running_cost(t, pts, u), dtype=float), (len(pts),))
    return cost


def backward_step(problem, scheme, cfg, n, v_next, *, operators=None, generator=None):
    """One backward step: returns (V_n flat, action index per node).

    For ``semi_lagrangian``, ``generator`` is the one-step diffusion operator
    from :func:`diffusion_operator` (None without noise).
    """
    axes = cfg.axes(problem)
    pts = _grid_points(axes)
    times = time_grid(problem, cfg)
    dt = times[1] - times[0]
    cand = np.empty((len(problem.actions), len(pts)))
    if scheme == "semi_lagrangian":
        diffused = generator @ v_next if generator is not None else v_next
        for a, u in enumerate(problem.actions):
            foot = problem.clamp(pts + problem.drift(pts, u) * dt)
            cand[a] = _running(problem, times[n], pts, u) * dt + interpolate(axes, diffused, foot)
    elif scheme == "mc_lookahead":
        for a, u in enumerate(problem.actions):
            cand[a] = _running(problem, times[n], pts, u) * dt + operators[n][a] @ v_next
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    best = np.argmin(cand, axis=0)
    return cand[best, np.arange(len(pts))], best


def backward_sweep(problem: ControlProblem, scheme: str, cfg: SweepConfig, *, operators=None):
    """Solve backward from V(T) = g; returns (ValueTable, Policy).

    ``operators`` may pass precomputed :func:`transition_operators` output
    to reuse across sweeps that differ only in costs.
    """
    axes = cfg.axes(problem)
    pts = _grid_points(axes)
    shape = tuple(a.size for a in axes)
    times = time_grid(problem, cfg)
    dt = times[1] - times[0]
    generator = None
    if scheme == "semi_lagrangian":
        if problem.dim > 2:
            raise ValueError("semi_lagrangian supports at most two state dimensions")
        if problem.noise is not None:
            grid = GridFn(np.zeros(shape), [a[0] for a in axes], [a[-1] for a in axes], False)
            for a in axes:
                if not np.allclose(np.diff(a), a[1] - a[0]):
                    raise ValueError("semi_lagrangian needs a uniform grid")
            generator = diffusion_operator(generator_matrix(grid, problem.noise, problem.alpha), dt)
        _check_cfl(problem, axes, pts, dt)
    elif scheme == "mc_lookahead":
        if operators is None:
            operators = transition_operators(problem, cfg)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    values = np.empty((cfg.n_steps + 1, len(pts)))
    index = np.empty((cfg.n_steps, len(pts)), dtype=np.int64)
    values[-1] = np.broadcast_to(np.asarray(problem.terminal_cost(pts), dtype=float), (len(pts),))
    for n in range(cfg.n_steps - 1, -1, -1):
        values[n], index[n] = backward_step(problem, scheme, cfg, n, values[n + 1],
                                            operators=operators, generator=generator)
        if not np.all(np.isfinite(values[n])):
            raise FloatingPointError(f"non-finite value at time index {n}")
    vt = ValueTable(times, axes, values.reshape((cfg.n_steps + 1, *shape)))
    pol = Policy(times[:-1], axes, index.reshape((cfg.n_steps, *shape)), list(problem.actions))
    return vt, pol


# -- property checks ----------------------------------------------------------


@dataclass
class EnvelopeReport:
    ok: bool
    worst_violation: float
    worst_node: tuple | None
    tolerance: float
    violations: list


def truncation_estimate(vt: ValueTable) -> float:
    """First-order time-truncation size: dt times the largest one-step change."""
    dt = vt.time_grid[1] - vt.time_grid[0]
    if len(vt.time_grid) < 2:
        return 0.0
    return float(dt * np.abs(np.diff(vt.values, axis=0)).max())


def envelope_check(vt: ValueTable, w1: float, c_h: float, tol: float | None = None) -> EnvelopeReport:
    """Check |V(t, x)| <= W1 + 2 C_H (T - t) at every node."""
    tol = truncation_estimate(vt) + 1e-12 * (1 + np.abs(vt.values).max()) if tol is None else tol
    remaining = vt.time_grid[-1] - vt.time_grid
    bound = w1 + 2.0 * c_h * remaining
    excess = np.abs(vt.values) - bound.reshape((-1,) + (1,) * len(vt.shape))
    flat = excess.reshape(len(vt.time_grid), -1)
    bad = np.argwhere(flat > tol)
    worst = np.unravel_index(np.argmax(flat), flat.shape)
    return EnvelopeReport(
        ok=bad.size == 0,
        worst_violation=float(max(flat.max(), 0.0)),
        worst_node=(int(worst[0]), int(worst[1])) if flat.max() > tol else None,
        tolerance=float(tol),
        violations=[(int(n), int(i)) for n, i in bad],
    )


@dataclass
class ComparisonReport:
    ok: bool
    max_excess: float
    offending_node: tuple | None
    values: tuple


def comparison_monotonicity_check(problem: ControlProblem, g1: Callable, g2: Callable, scheme: str,
                                  cfg: SweepConfig, eps: float = 1e-12) -> ComparisonReport:
    """Solve with terminal costs g1 <= g2 under identical seeds; require V1 <= V2 node-wise."""
    axes = cfg.axes(problem)
    pts = _grid_points(axes)
    if np.any(np.asarray(g1(pts)) > np.asarray(g2(pts))):
        raise ValueError("comparison check needs g1 <= g2 on the grid")
    ops = transition_operators(problem, cfg) if scheme == "mc_lookahead" else None
    vt1, _ = backward_sweep(_with_terminal(problem, g1), scheme, cfg, operators=ops)
    vt2, _ = backward_sweep(_with_terminal(problem, g2), scheme, cfg, operators=ops)
    scale = 1.0 + max(np.abs(vt1.values).max(), np.abs(vt2.values).max())
    diff = (vt1.values - vt2.values).reshape(len(vt1.time_grid), -1)
    worst = np.unravel_index(np.argmax(diff), diff.shape)
    ok = bool(diff.max() <= eps * scale)
    return ComparisonReport(ok, float(max(diff.max(), 0.0)), None if ok else (int(worst[0]), int(worst[1])),
                            (vt1, vt2))


def _with_terminal(problem: ControlProblem, g: Callable) -> ControlProblem:
    return ControlProblem(problem.drift, problem.noise, problem.alpha, problem.running_cost, g, problem.actions,
                          problem.horizon, problem.state_box, problem.step, problem.n_noise)


def test_problem(alpha: float = 1.5, sigma: float = 0.5, box: float = 2.0, horizon: float = 1.0) -> ControlProblem:
    """dx = u dt + sigma dL with u in {-1, 0, 1}, running cost x^2, no terminal cost."""
    return ControlProblem(
        drift=lambda x, u: np.full_like(x, float(u)),
        noise=SigmaField.constant(sigma),
        alpha=alpha,
        running_cost=lambda t, x, u: x[:, 0] ** 2,
        terminal_cost=lambda x: np.zeros(len(x)),
        actions=[-1.0, 0.0, 1.0],
        horizon=(0.0, horizon),
        state_box=[(-box, box)],
    )


test_problem.__test__ = False  # not a pytest test despite the name
