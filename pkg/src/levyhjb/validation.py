"""Fast invariant checks per module, used by ``levyhjb validate``.

Each check is small enough that the whole table runs in well under a minute.
The test suite covers the same ground at full size.
"""

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MODULES = ("stable", "sde", "riesz", "hjb", "netsim", "cli")


@dataclass
class CheckResult:
    module: str
    name: str
    ok: bool
    detail: str


def _stable():
    from scipy.integrate import quad

    from . import stable
    from .rng import stream

    out = []
    x = stable.sample_standard_sas(1.5, stream(0, 99), 200_000)
    k = np.array([0.5, 1.0, 2.0])
    err = np.abs(stable.empirical_cf(x, k) - stable.characteristic_fn(stable.StableParams(1.5), k)).max()
    out.append(("empirical cf within 0.02 (alpha 1.5)", err < 0.02, f"max error {err:.4f}"))
    worst = 0.0
    for a in (1.2, 1.5, 1.8):
        for eps in (0.1, 1.0, 2.0):
            c = stable.alpha_normalization_constant(a, 1)
            num = 2 * quad(lambda z: c * z ** (1 - a), 0, eps)[0]
            worst = max(worst, abs(stable.truncated_second_moment(stable.LevyMeasureConfig(a, 1, eps)) - num) / num)
    out.append(("C_eps closed form vs quadrature", worst < 1e-6, f"max rel error {worst:.2e}"))
    y = stable.sample_standard_sas(1.5, stream(0, 98), 200_000)
    s = stable.quantile_scale(x + y, 1.5)
    gap = abs(s - 2 ** (1 / 1.5)) / 2 ** (1 / 1.5)
    out.append(("sum scale closure (alpha 1.5)", gap < 0.03, f"rel gap {gap:.4f}"))
    return out


def _sde():
    from . import sde

    out = []
    st = sde.ShortTermParams(0.3, 1.0, 1.8, tau=0.01)
    traj = sde.simulate("short_term", st, sde.PathConfig(0.1, 200, 20, 1), target=0.5)
    chi = traj.values[:, :, 0]
    out.append(("received power non-negative", bool(np.all(chi >= 0)), f"{int(traj.clipped.sum())} clipped steps"))
    recon = chi[:, :-1] + traj.drift_terms[:, :, 0] + traj.noise_terms[:, :, 0]
    keep = ~traj.clipped
    err = np.abs(recon - chi[:, 1:])[keep].max()
    out.append(("drift + noise reconstructs increments", err < 1e-12, f"max residual {err:.1e}"))
    lt = sde.LongTermParams(0.1, np.log(2), 0.0, 1.8)
    ode = sde.simulate("long_term", lt, sde.PathConfig(0.01, 500, 1, 0))
    gap = abs(ode.values[0, -1, 0] - lt.mean(5.0))
    out.append(("noise-free long-term path follows the mean", gap < 1e-3, f"gap {gap:.1e}"))
    return out


def _riesz():
    from . import riesz

    out = []
    f = riesz.GridFn.sample(lambda x: np.cos(x) + np.sin(3 * x), 0.0, 2 * np.pi, 256, periodic=True)
    sig = riesz.SigmaField.constant(1.0)
    gen = riesz.apply_generator_form(f, sig, 1.5).values
    ker = riesz.apply_kernel_form(f, sig, 1.5).values
    e1 = riesz.relative_l2(gen, riesz.spectral_reference(f, 1.0, 1.5).values)
    e2 = riesz.relative_l2(ker, riesz.spectral_reference(f, 1.0, 1.5, "riesz").values)
    out.append(("both forms match spectral symbol", max(e1, e2) < 0.01, f"errors {e1:.1e}, {e2:.1e}"))
    const = riesz.apply_generator_form(f.with_values(np.full(256, 2.0)), sig, 1.5).values
    out.append(("constants annihilated", np.abs(const).max() < 1e-9, f"max {np.abs(const).max():.1e}"))
    return out


def _hjb():
    from . import hjb

    out = []
    prob = hjb.test_problem(horizon=0.5)
    cfg = hjb.SweepConfig(n_steps=5, nodes=(21,), samples=200)
    vt, _ = hjb.backward_sweep(prob, "mc_lookahead", cfg)
    out.append(("terminal condition exact", bool(np.all(vt.values[-1] == 0.0)), ""))
    zero = prob.terminal_cost
    rep = hjb.comparison_monotonicity_check(prob, zero, lambda x: np.maximum(0.0, x[:, 0]), "mc_lookahead", cfg)
    out.append(("comparison monotonicity", rep.ok, f"max excess {rep.max_excess:.1e}"))
    shifted = hjb.ControlProblem(prob.drift, prob.noise, prob.alpha, prob.running_cost,
                                 lambda x: np.ones(len(x)), prob.actions, prob.horizon, prob.state_box)
    vt1, _ = hjb.backward_sweep(shifted, "mc_lookahead", cfg)
    gap = np.abs(vt1.values - vt.values - 1.0).max()
    out.append(("constant shift identity", gap < 1e-12, f"max gap {gap:.1e}"))
    env = hjb.envelope_check(vt, 0.0, hjb.estimate_hamiltonian_growth(prob))
    out.append(("envelope bound", env.ok, f"worst {env.worst_violation:.1e}"))
    return out


def _netsim():
    from . import netsim

    out = []
    cfg = netsim.NetworkConfig(n_steps=20)
    w = netsim.CostWeights()
    art = netsim.run_downlink(cfg, w, rounds=2, dp=netsim.DPConfig(samples=16), seed=0)
    feasible = all(np.all((r.tx >= cfg.p_min) & (r.tx <= cfg.p_max)) and np.all(r.power >= 0) for r in art.rounds)
    out.append(("power feasibility", bool(feasible), ""))
    exact = all(np.array_equal(r.sinr[n], netsim.ue_sinr(r.power[n], cfg))
                for r in art.rounds for n in range(cfg.n_steps + 1))
    out.append(("SINR recomputed bit-exactly", exact, ""))
    audit = all(netsim.stage_cost(netsim.NetworkState(r.beta[n], r.power[n], r.tx[n]), w, cfg.eta) == r.cost[n]
                for r in art.rounds for n in range(cfg.n_steps))
    out.append(("stage cost recomputed bit-exactly", audit, ""))
    out.append(("V(T) = 0 every round", all(r.value[-1] == 0.0 for r in art.rounds), ""))
    return out


def _cli():
    from .config import ConfigError, defaults, emit, parse_text, resolve

    out = []
    p = resolve({}, environ={})
    out.append(("round trip parse(emit(config))", resolve(parse_text(emit(p)), environ={}) == p, ""))
    try:
        resolve(parse_text("stable.alpha = 2.5"), environ={})
        rejected = False
    except ConfigError:
        rejected = True
    out.append(("alpha outside (1,2] rejected", rejected, ""))
    out.append(("empty config gives defaults", p == defaults(), ""))
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = Path(tmp) / "run.cfg"
        cfg_path.write_text("riesz_diag.nodes = 64\n")
        runs = []
        for k in range(2):
            d = Path(tmp) / f"out{k}"
            code = main(["riesz_diag", "--config", str(cfg_path), "--seed", "0", "--out", str(d)])
            runs.append((code, {f.name: f.read_bytes() for f in sorted(d.iterdir())}))
        same = runs[0] == runs[1] and runs[0][0] == 0
    out.append(("repeat run byte-identical", same, ""))
    return out


CHECKS = {"stable": _stable, "sde": _sde, "riesz": _riesz, "hjb": _hjb, "netsim": _netsim, "cli": _cli}


def run_checks(module: str | None = None) -> list:
    results = []
    for name in MODULES if module is None else (module,):
        try:
            for check, ok, detail in CHECKS[name]():
                results.append(CheckResult(name, check, bool(ok), detail))
        except Exception as exc:  # a crash counts as a failure of that module
            results.append(CheckResult(name, "ran without error", False, f"{type(exc).__name__}: {exc}"))
    return results


def print_table(results) -> None:
    width = max((len(r.name) for r in results), default=10)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.module:<7} {r.name:<{width}}  {r.detail}".rstrip())
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
