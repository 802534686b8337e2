from dataclasses import replace
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyhjb import hjb, netsim
from levyhjb.netsim import CostWeights, NetworkConfig, NetworkState
from levyhjb.rng import stream
from levyhjb.sde import trimmed_mean

CFG = NetworkConfig()
W = CostWeights()


def state_with_power(power, tx=None):
    power = np.asarray(power, dtype=float)
    tx = np.full(power.shape[0], 5.0) if tx is None else np.asarray(tx, dtype=float)
    return NetworkState(np.zeros_like(power), power, tx)


@pytest.fixture(scope="module")
def short_run():
    cfg = replace(CFG, n_steps=30)
    return netsim.run_downlink(cfg, W, rounds=3, dp=netsim.DPConfig(samples=32), seed=3)


def test_config_defaults_and_validation():
    assert CFG.gains[0, 0] == 0.5 and CFG.gains[0, 1] == 0.1
    assert CFG.b[0, 0] == pytest.approx(np.log(2))
    assert CFG.initial_power == 7.5
    levels = CFG.tx_levels()
    assert levels[0] == 0.0 and levels[-1] == 15.0 and 7.5 in levels
    assert list(CFG.serving) == [0, 1, 2]
    for bad in ({"p_min": 5.0, "p_max": 5.0}, {"n_bs": 0}, {"eta": 0.0}, {"alpha": 2.5}, {"tau": 0.0},
                {"serving_gain": 1.5}):
        with pytest.raises(ValueError):
            NetworkConfig(**bad)
    with pytest.raises(ValueError):
        CostWeights(variant="other")
    with pytest.raises(ValueError):
        CostWeights(lam=-1)
    with pytest.raises(ValueError):
        NetworkState(np.zeros((1, 1)), -np.ones((1, 1)), np.zeros(1))


def test_sinr_examples():
    s = state_with_power([[2.0], [0.0], [0.0]])
    assert netsim.sinr(s, 0, 0, 1.0) == 2.0
    s = state_with_power([[2.0], [0.5], [0.5]])
    assert netsim.sinr(s, 0, 0, 1.0) == 1.0
    s = state_with_power([[0.0], [3.0], [7.0]])
    assert netsim.sinr(s, 0, 0, 1.0) == 0.0


def test_sinr_matrix_matches_scalar():
    rng = np.random.default_rng(0)
    s = state_with_power(rng.uniform(0, 5, (3, 3)))
    gm = netsim.sinr_matrix(s.power, 1.0)
    for i, l in product(range(3), range(3)):
        assert gm[i, l] == pytest.approx(netsim.sinr(s, l, i, 1.0), rel=1e-15)


def test_stage_cost_examples():
    # single link at the threshold: outage term vanishes
    at = state_with_power([[1.5]], tx=[0.0])
    assert netsim.stage_cost(at, W, 1.0) == pytest.approx(-np.log2(2.5))
    one = state_with_power([[1.0]], tx=[10.0])
    assert netsim.stage_cost(one, W, 1.0) == pytest.approx(-1.0 + 0.5 + 1.0)


def test_stage_cost_termwise_oracle():
    rng = np.random.default_rng(1)
    power = rng.uniform(0, 6, (3, 3))
    tx = rng.uniform(0, 15, 3)
    total = 0.0
    for i in range(3):
        for l in range(3):
            interference = sum(power[k][l] for k in range(3) if k != i)
            gamma = power[i][l] / (interference + 1.0)
            total += -np.log2(1 + gamma) + 1.0 * max(1.5 - gamma, 0.0) + 0.1 * tx[i]
    assert netsim.stage_cost(state_with_power(power, tx), W, 1.0) == pytest.approx(total, rel=1e-12)


def test_comparative_cost_examples():
    w = CostWeights(variant="comparative", fairness_weight=2.0, sum_rate_terminal_weight=1.0)
    equal = state_with_power(np.diag([3.0, 3.0, 3.0]), tx=[5, 5, 5])
    run_eq, _ = netsim.comparative_cost(equal, [5, 5, 5], w, CFG)
    assert run_eq == pytest.approx(0.0)  # gamma = 3 > r_th for all, no variance, no increase
    uneven = state_with_power(np.diag([3.0, 1.0, 2.0]), tx=[6, 5, 4])
    run, term = netsim.comparative_cost(uneven, [5, 5, 5], w, CFG)
    gamma = np.array([3.0, 1.0, 2.0])
    assert run == pytest.approx(0.1 * 1.0 + 0.5 + 2.0 * gamma.var())
    assert term == pytest.approx(0.5 + 2.0 * gamma.var() - np.log2(1 + gamma).sum())
    _, term_small = netsim.comparative_cost(uneven, [5, 5, 5], replace(w, sum_rate_terminal_weight=0.1), CFG)
    assert term_small - term == pytest.approx(0.9 * np.log2(1 + gamma).sum())


def test_apply_action_examples():
    s = state_with_power(np.ones((3, 3)), tx=[15.0, 5.0, 0.5])
    out = netsim.apply_action(s, [1.0, 0.0, -1.0], CFG)
    assert list(out.tx) == [15.0, 5.0, 0.0]
    assert np.array_equal(out.power, s.power) and out.t == s.t


def _hand_step(state, cfg, draws, noise_on=True):
    """Independent re-implementation of the substepped scheme."""
    h = cfg.dt / cfg.substeps
    scale = h ** (1 / cfg.alpha) if noise_on else 0.0
    beta, p = state.beta.copy(), state.power.copy()
    b = -np.log(cfg.gains)
    k = cfg.sigma_p**2 * cfg.c_eps / 2 / cfg.tau
    for s in range(cfg.substeps):
        target = np.exp(beta) * state.tx[:, None] + cfg.rho
        dp = (target - p) * (1 - np.exp(-k * h / target)) + cfg.noise_multiplier * cfg.sigma_p / np.sqrt(cfg.tau) * np.sqrt(p) * scale * draws[s, 1]
        p = np.maximum(p + dp, 0.0)
        beta = beta - cfg.a * (beta + b) * h + cfg.sigma_beta * scale * draws[s, 0]
    return beta, p


def test_network_step_matches_hand_oracle():
    s0 = netsim.initial_state(CFG)
    s0 = netsim.apply_action(s0, [1.0, -1.0, 0.0], CFG)
    draws = netsim.step_draws(CFG, stream(5, 9))
    s1, rec = netsim.network_step(s0, CFG, CFG.dt, draws=draws)
    beta, p = _hand_step(s0, CFG, draws)
    np.testing.assert_allclose(s1.beta, beta, rtol=1e-13)
    np.testing.assert_allclose(s1.power, p, rtol=1e-13)
    assert s1.t == pytest.approx(CFG.dt) and not rec.failed


def test_noise_off_is_deterministic_ode():
    s0 = netsim.apply_action(netsim.initial_state(CFG), [1.0, 0.0, -1.0], CFG)
    a, _ = netsim.network_step(s0, CFG, CFG.dt, stream(1, 1), noise_on=False)
    b, rec = netsim.network_step(s0, CFG, CFG.dt, stream(2, 2), noise_on=False)
    assert np.array_equal(a.power, b.power) and np.all(rec.noise == 0)
    beta, p = _hand_step(s0, CFG, np.zeros((CFG.substeps, 2, 3, 3)), noise_on=False)
    np.testing.assert_allclose(a.power, p, rtol=1e-13)


def test_power_substep_is_euler_for_slow_relaxation():
    st = CFG.short_term
    p, target, h = np.array([2.0]), np.array([3.0]), 1e-6
    nxt, _ = netsim.power_substep(p, target, st, h, np.zeros(1), 1.0)
    euler = p + st.sigma_chi**2 * st.c_eps / 2 / st.tau * (1 - p / target) * h
    np.testing.assert_allclose(nxt, euler, rtol=1e-12)


def test_zero_tx_reverts_toward_rho():
    s = netsim.initial_state(CFG)
    s = NetworkState(s.beta, s.power, np.zeros(3))
    for n in range(200):
        s, _ = netsim.network_step(s, CFG, CFG.dt, noise_on=False, draws=np.zeros((CFG.substeps, 2, 3, 3)))
    assert np.all(s.power <= 2 * CFG.rho)


def test_one_step_increment_mean():
    s0 = netsim.initial_state(CFG)
    zeros = np.zeros((CFG.substeps, 2, 3, 3))
    ref, _ = netsim.network_step(s0, CFG, CFG.dt, draws=zeros, noise_on=False)
    rng = stream(11, 0)
    reps = 10_000
    inc = np.empty((reps, 3, 3))
    for r in range(reps):
        s1, _ = netsim.network_step(s0, CFG, CFG.dt, rng)
        inc[r] = s1.power - s0.power
    drift = ref.power - s0.power
    for i, l in product(range(3), range(3)):
        x = inc[:, i, l]
        lo, hi = np.quantile(x, [0.001, 0.999])
        core = x[(x >= lo) & (x <= hi)]
        se = core.std() / np.sqrt(len(core))
        assert abs(trimmed_mean(x) - drift[i, l]) < 3 * se + 1e-12


def test_rounds_zero_is_random_policy():
    cfg = replace(CFG, n_steps=20)
    art = netsim.run_downlink(cfg, W, rounds=0, seed=4)
    assert len(art.rounds) == 1
    r = art.rounds[0]
    np.testing.assert_array_equal(r.actions, netsim.random_actions(cfg, 4))
    assert set(np.unique(r.actions)) <= {-1.0, 0.0, 1.0}


def test_invariants(short_run):
    cfg = short_run.cfg
    for r in short_run.rounds:
        assert np.all((r.tx >= cfg.p_min) & (r.tx <= cfg.p_max))
        assert np.all(r.power >= 0)
        assert r.value[-1] == 0.0
        for n in range(cfg.n_steps + 1):
            assert np.array_equal(r.sinr[n], netsim.ue_sinr(r.power[n], cfg))
        for n in range(cfg.n_steps):
            s = NetworkState(r.beta[n], r.power[n], r.tx[n])
            assert netsim.stage_cost(s, short_run.weights, cfg.eta) == r.cost[n]
        # realized cost-to-go
        np.testing.assert_allclose(r.value[0], r.cost.sum() * cfg.dt, rtol=1e-12)


def test_determinism(short_run):
    again = netsim.run_downlink(short_run.cfg, W, rounds=3, dp=netsim.DPConfig(samples=32), seed=3)
    for a, b in zip(short_run.rounds, again.rounds):
        for f in ("beta", "power", "tx", "actions", "cost", "sinr", "noise", "value"):
            assert np.array_equal(getattr(a, f), getattr(b, f))


def test_optimized_rounds_beat_random(short_run):
    costs = short_run.total_costs()
    assert costs[1:].max() < costs[0]


def test_csv_outputs(tmp_path, short_run):
    out = short_run.write(tmp_path / "run")
    n_t, rounds = short_run.cfg.n_steps, len(short_run.rounds)
    expected = {"powers.csv": ("round,t,bs,tx,action", rounds * n_t * 3),
                "sinr.csv": ("round,t,ue,sinr", rounds * (n_t + 1) * 3),
                "value.csv": ("round,t,value", rounds * (n_t + 1)),
                "noise.csv": ("round,t,bs,ue,p,noise", rounds * n_t * 9)}
    for name, (header, rows) in expected.items():
        lines = (out / name).read_text().splitlines()
        assert lines[0] == header and len(lines) == rows + 1
    import json
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["network"]["alpha"] == 1.8 and manifest["code_version"]
    # full-precision floats round-trip
    row = (out / "sinr.csv").read_text().splitlines()[5].split(",")
    k, n, l = int(row[0]), int(round(float(row[1]) / short_run.cfg.dt)), int(row[2])
    assert float(row[3]) == short_run.rounds[k].sinr[n, l]


def test_noise_exceedance_examples(short_run):
    quiet = replace(short_run.cfg, noise_multiplier=0.0)
    art = netsim.run_downlink(quiet, W, rounds=0, seed=1)
    assert netsim.noise_power_exceedance(art)["total"] == 0
    # a clipped step counts whenever the noise term is nonzero
    r = art.rounds[0]
    r.power[5, 0, 1] = 0.0
    r.noise[4, 0, 1] = 1e-9
    counts = netsim.noise_power_exceedance(art)
    assert counts["total"] == 1 and counts["per_link"][0, 1] == 1


def test_noise_multiplier_raises_exceedances():
    cfg = replace(CFG, n_steps=100)
    low = netsim.run_downlink(replace(cfg, noise_multiplier=0.1), W, rounds=0, seed=2)
    high = netsim.run_downlink(replace(cfg, noise_multiplier=0.5), W, rounds=0, seed=2)
    assert netsim.noise_power_exceedance(high)["total"] > netsim.noise_power_exceedance(low)["total"]


def _brute_force_single_bs(cfg, w):
    """Enumerate every action sequence of the deterministic single-link system."""
    k = cfg.sigma_p**2 * cfg.c_eps / 2 / cfg.tau
    h = cfg.dt / cfg.substeps
    g = cfg.gains[0, 0]
    best = (np.inf, None)
    for seq in product((-1.0, 0.0, 1.0), repeat=cfg.n_steps):
        tx, p, beta, total = cfg.initial_power, g * cfg.initial_power + cfg.rho, np.log(g), 0.0
        for u in seq:
            tx = min(max(tx + u * cfg.u_step, cfg.p_min), cfg.p_max)
            gamma = p / cfg.eta
            total += (-np.log2(1 + gamma) + w.varsigma * max(w.r_th - gamma, 0) + w.lam * tx) * cfg.dt
            for _ in range(cfg.substeps):
                target = np.exp(beta) * tx + cfg.rho
                p = target + (p - target) * np.exp(-k * h / target)
        if total < best[0] - 1e-12:
            best = (total, seq)
    return best


@pytest.mark.parametrize("lam", [0.1, 0.01])
def test_single_bs_matches_action_tree(lam):
    cfg = NetworkConfig(n_bs=1, m_ue=1, n_steps=3, dt=0.5, tau=0.1)
    w = CostWeights(lam=lam)
    art = netsim.run_downlink(cfg, w, rounds=1, dp=netsim.DPConfig(samples=1, p_nodes=400), seed=0, noise_on=False)
    best_cost, best_seq = _brute_force_single_bs(cfg, w)
    r = art.rounds[-1]
    assert r.value[0] == pytest.approx(best_cost, abs=1e-6)
    assert tuple(r.actions[:, 0]) == best_seq


def test_jacobi_scheme_runs():
    cfg = replace(CFG, n_steps=10)
    art = netsim.run_downlink(cfg, W, rounds=2, dp=netsim.DPConfig(samples=16, scheme="jacobi"), seed=0)
    assert len(art.rounds) == 3 and np.all(np.isfinite(art.total_costs()))


def test_converged_rounds_repeat_exactly():
    cfg = replace(CFG, n_steps=10)
    dp = netsim.DPConfig(samples=16)
    short = netsim.run_downlink(cfg, W, rounds=12, dp=dp, seed=0)
    costs = short.total_costs()
    # recompute without the shortcut by running round by round
    for k in (4, 8):
        prefix = netsim.run_downlink(cfg, W, rounds=k, dp=dp, seed=0)
        np.testing.assert_array_equal(prefix.total_costs(), costs[: k + 1])


def test_comparison_noise_off_identical_when_weights_match():
    cfg = replace(CFG, n_steps=10)
    comp = netsim.gaussian_levy_comparison(cfg, seed=0, rounds=2, dp=netsim.DPConfig(samples=1), noise_on=False,
                                           levy_weight=0.5, gaussian_weight=0.5)
    for a, b in zip(comp.gaussian.rounds, comp.levy.rounds):
        assert np.array_equal(a.tx, b.tx) and np.array_equal(a.sinr, b.sinr)
    assert comp.summary["gaussian"]["alpha"] == 2.0 and comp.summary["levy"]["alpha"] == 1.8


def test_comparative_run_records_terminal(short_run):
    cfg = replace(CFG, n_steps=10)
    w = CostWeights(variant="comparative")
    art = netsim.run_downlink(cfg, w, rounds=1, dp=netsim.DPConfig(samples=16), seed=0)
    r = art.rounds[-1]
    final = NetworkState(r.beta[-1], r.power[-1], r.tx[-1])
    assert r.value[-1] == netsim.comparative_cost(final, r.tx[-1], w, cfg)[1]
    s = NetworkState(r.beta[3], r.power[3], r.tx[3])
    assert r.cost[3] == netsim.comparative_cost(s, r.tx[2], w, cfg)[0]


def test_summary_statistics():
    r = netsim.run_downlink(replace(CFG, n_steps=10), W, rounds=0, seed=0).rounds[0]
    r.actions[:] = 0.0
    assert netsim.action_changes(r) == 0
    r.actions[3, 1] = 1.0
    assert netsim.action_changes(r) == 2
    assert netsim.sinr_iqr(r) >= 0


def _enumerated_hamiltonian(cfg, w, x, p, base_tx):
    n, m = cfg.n_bs, cfg.m_ue
    beta = x[: n * m].reshape(n, m)
    power = x[n * m:].reshape(n, m)
    b = -np.log(cfg.gains)
    k = cfg.sigma_p**2 * cfg.c_eps / 2 / cfg.tau
    best = np.inf
    for u in product((-1.0, 0.0, 1.0), repeat=n):
        tx = np.clip(base_tx + np.array(u), cfg.p_min, cfg.p_max)
        total = 0.0
        for i in range(n):
            for l in range(m):
                db = -cfg.a * (beta[i, l] + b[i, l])
                dp = k * (1 - power[i, l] / (np.exp(beta[i, l]) * tx[i] + cfg.rho))
                total += p[i * m + l] * db + p[n * m + i * m + l] * dp
                interference = power[:, l].sum() - power[i, l]
                gamma = power[i, l] / (interference + cfg.eta)
                total += -np.log2(1 + gamma) + w.varsigma * max(w.r_th - gamma, 0.0) + w.lam * tx[i]
        best = min(best, total)
    return best


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_joint_hamiltonian_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    prob = netsim.joint_control_problem(CFG, W)
    x = np.concatenate([-CFG.b.ravel() + rng.normal(0, 0.3, 9), rng.uniform(0, 8, 9)])
    p = rng.normal(0, 0.5, 18)
    value, idx = hjb.hamiltonian(prob, x, p)
    assert value == pytest.approx(_enumerated_hamiltonian(CFG, W, x, p, np.full(3, 7.5)), rel=1e-12, abs=1e-12)
    assert 0 <= idx < 27


def test_joint_hamiltonian_costate_from_values(short_run):
    # co-state from finite differences of a value grid; p = 0 gives min over actions of L
    prob = netsim.joint_control_problem(CFG, W)
    x = np.concatenate([-CFG.b.ravel(), np.full(9, 2.0)])
    value, _ = hjb.hamiltonian(prob, x, np.zeros(18))
    costs = [prob.running_cost(0, x[None, :], u)[0] for u in prob.actions]
    assert value == min(costs)
