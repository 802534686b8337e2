"""Command-line entry point.

    levyhjb <experiment> --config PATH --seed N --out DIR
    levyhjb validate [--module NAME]

Every experiment writes CSVs plus ``manifest.json`` (resolved config, seed,
code version, file list) into DIR.  Outputs depend only on config and seed.
"""

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, hjb, netsim, riesz, sde, stable
from .config import EXPERIMENTS, ConfigError, RunConfig, emit, parse_config
from .rng import PATHS, stream

CF_ALPHAS = (1.2, 1.5, 1.8, 2.0)
CF_POINTS = (0.5, 1.0, 2.0)
C_EPS_GRID = ((1.2, 1.5, 1.8), (0.1, 0.5, 1.0, 2.0))


def _f(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- parameter mapping ------------------------------------------------------


def network_config(p: dict) -> netsim.NetworkConfig:
    return netsim.NetworkConfig(
        n_bs=p["network.n_bs"], m_ue=p["network.m_ue"], serving_gain=p["network.serving_gain"],
        interfering_gain=p["network.interfering_gain"], eta=p["network.eta"], p_min=p["network.p_min"],
        p_max=p["network.p_max"], p0=p["network.p0"], u_step=p["network.u_step"], dt=p["time.dt"],
        n_steps=p["time.n_steps"], alpha=p["stable.alpha"], a=p["channel.a"], sigma_beta=p["channel.sigma_beta"],
        sigma_p=p["channel.sigma_p"], c_eps=p["channel.c_eps"], tau=p["channel.tau"], rho=p["channel.rho"],
        noise_multiplier=p["channel.noise_multiplier"], substeps=p["channel.substeps"],
    )


def cost_weights(p: dict) -> netsim.CostWeights:
    return netsim.CostWeights(
        r_th=p["cost.r_th"], varsigma=p["cost.varsigma"], lam=p["cost.lambda"], variant=p["cost.variant"],
        fairness_weight=p["cost.fairness_weight"], sum_rate_terminal_weight=p["cost.sum_rate_terminal_weight"],
        power_increase_weight=p["cost.power_increase_weight"],
    )


def dp_config(p: dict) -> netsim.DPConfig:
    return netsim.DPConfig(samples=p["dp.samples"], p_nodes=p["dp.p_nodes"], scheme=p["dp.scheme"])


# -- experiments ------------------------------------------------------------


def run_stable_diag(cfg: RunConfig, out: Path) -> dict:
    n = cfg["stable_diag.samples"]
    alphas = sorted(set(CF_ALPHAS) | {cfg["stable.alpha"]})
    cf_rows, closure_rows, ks_rows = [], [], []
    for idx, alpha in enumerate(alphas):
        x = stable.sample_standard_sas(alpha, stream(cfg.seed, PATHS, idx, 0), n)
        exact = stable.characteristic_fn(stable.StableParams(alpha), np.array(CF_POINTS))
        emp = stable.empirical_cf(x, np.array(CF_POINTS))
        for k, e, c in zip(CF_POINTS, emp, exact):
            cf_rows.append([_f(alpha), _f(k), _f(np.real(e)), _f(np.real(c)), _f(abs(e - c))])
        y = stable.sample_standard_sas(alpha, stream(cfg.seed, PATHS, idx, 1), n)
        scale = stable.quantile_scale(x + y, alpha)
        expected = stable.scale_of_linear_combination(1.0, 1.0, alpha)
        closure_rows.append([_f(alpha), _f(scale), _f(expected), _f(abs(scale - expected) / expected)])
        if alpha == 2.0:
            from scipy.stats import kstest, norm

            res = kstest(x, norm(scale=np.sqrt(2.0)).cdf)
            ks_rows.append([_f(alpha), _f(res.statistic), _f(res.pvalue)])
    _write_csv(out / "cf.csv", ["alpha", "k", "empirical", "exact", "abs_error"], cf_rows)
    _write_csv(out / "closure.csv", ["alpha", "scale_sum", "expected", "rel_error"], closure_rows)
    _write_csv(out / "ks.csv", ["alpha", "statistic", "pvalue"], ks_rows)
    c_rows = [[_f(a), _f(e), _f(stable.truncated_second_moment(stable.LevyMeasureConfig(a, 1, e)))]
              for a in C_EPS_GRID[0] for e in C_EPS_GRID[1]]
    _write_csv(out / "c_eps.csv", ["alpha", "epsilon", "c_eps"], c_rows)
    return {"alphas": alphas, "cf_points": list(CF_POINTS)}


def run_channel(cfg: RunConfig, out: Path) -> dict:
    net = network_config(cfg.params)
    params = sde.ChannelParams(net.long_term(0, 0), net.short_term)
    paths = sde.PathConfig(net.dt, net.n_steps, cfg["channel.n_paths"], cfg.seed)
    traj = sde.simulate("slow_fast_composite", params, paths, p_in=net.initial_power,
                        noise_multiplier=net.noise_multiplier)
    traj.to_csv(out / "trajectory.csv")
    lt = params.long_term
    rows = [[_f(t), _f(np.nanmean(traj.values[:, n, 0])), _f(lt.mean(t)), _f(np.nanmean(traj.values[:, n, 1]))]
            for n, t in enumerate(traj.times)]
    _write_csv(out / "summary.csv", ["t", "mean_beta", "exact_mean_beta", "mean_chi"], rows)
    return {"trajectory": traj.manifest(), "link": [0, 0], "p_in": net.initial_power,
            "failed_paths": int(traj.failed.sum()), "clipped_steps": int(traj.clipped.sum())}


def _riesz_test_function(x):
    return np.cos(x) + 0.5 * np.sin(2 * x) + 0.25 * np.cos(4 * x)


def run_riesz_diag(cfg: RunConfig, out: Path) -> dict:
    n, s = cfg["riesz_diag.nodes"], cfg["riesz_diag.sigma"]
    f = riesz.GridFn.sample(_riesz_test_function, 0.0, 2 * np.pi, n, periodic=True)
    sigma = riesz.SigmaField.constant(s)
    columns = {"x": f.axes[0], "f": f.values}
    rows = []
    for alpha in (1.2, 1.5, 1.8):
        gen = riesz.apply_generator_form(f, sigma, alpha).values
        ker = riesz.apply_kernel_form(f, sigma, alpha).values
        gen_ref = riesz.spectral_reference(f, s, alpha, "generator").values
        ker_ref = riesz.spectral_reference(f, s, alpha, "riesz").values
        rows.append([_f(alpha), "generator", _f(riesz.relative_l2(gen, gen_ref))])
        rows.append([_f(alpha), "kernel", _f(riesz.relative_l2(ker, ker_ref))])
        columns[f"generator_{alpha}"] = gen
        columns[f"kernel_{alpha}"] = ker
    g = riesz.GridFn.sample(lambda x: np.exp(np.cos(x)), 0.0, 2 * np.pi, n, periodic=True)
    x = g.axes[0]
    second = np.exp(np.cos(x)) * (np.sin(x) ** 2 - np.cos(x))
    near_two = 2.0 - 1e-3
    lap = riesz.apply_generator_form(g, sigma, near_two).values
    rows.append([_f(near_two), "laplacian_limit", _f(riesz.relative_l2(lap, s**2 * second))])
    _write_csv(out / "errors.csv", ["alpha", "form", "rel_l2"], rows)
    names = list(columns)
    _write_csv(out / "operator.csv", names, [[_f(columns[c][i]) for c in names] for i in range(n)])
    return {"test_function": "cos x + sin(2x)/2 + cos(4x)/4", "domain": [0.0, 2 * np.pi]}


def run_hjb_test(cfg: RunConfig, out: Path) -> dict:
    prob = hjb.test_problem(cfg["hjb_test.alpha"], cfg["hjb_test.sigma"], cfg["hjb_test.box"],
                            cfg["hjb_test.horizon"])
    sweep = hjb.SweepConfig(n_steps=cfg["hjb_test.n_steps"], nodes=(cfg["hjb_test.nodes"],),
                            samples=cfg["hjb_test.samples"], seed=cfg.seed)
    c_h = hjb.estimate_hamiltonian_growth(prob, seed=cfg.seed)
    rows = []
    for scheme in ("mc_lookahead", "semi_lagrangian"):
        vt, pol = hjb.backward_sweep(prob, scheme, sweep)
        vt.to_csv(out / f"value_{scheme}.csv")
        pol.to_csv(out / f"policy_{scheme}.csv")
        env = hjb.envelope_check(vt, 0.0, c_h)
        rows.append([scheme, _f(vt.values[0].min()), _f(vt.values[0].max()), int(env.ok), _f(env.worst_violation)])
    _write_csv(out / "summary.csv", ["scheme", "v0_min", "v0_max", "envelope_ok", "envelope_violation"], rows)
    return {"problem": "dx = u dt + sigma dL, u in {-1,0,1}, cost x^2", "c_h": c_h}


def run_downlink_experiment(cfg: RunConfig, out: Path) -> dict:
    art = netsim.run_downlink(network_config(cfg.params), cost_weights(cfg.params), cfg["dp.rounds"],
                              dp_config(cfg.params), cfg.seed)
    art.write(out)
    return _read_manifest(out)


def run_noise_study(cfg: RunConfig, out: Path) -> dict:
    base = network_config(cfg.params)
    rows = []
    details = {}
    for name in ("low", "high"):
        mult = cfg[f"noise_study.{name}"]
        net = replace(base, noise_multiplier=mult)
        art = netsim.run_downlink(net, cost_weights(cfg.params), cfg["dp.rounds"], dp_config(cfg.params), cfg.seed)
        art.write(out / name)
        ex = netsim.noise_power_exceedance(art)
        rows.append([name, _f(mult), ex["total"], ex["slots"], _f(ex["fraction"])])
        details[name] = _read_manifest(out / name)
    _write_csv(out / "exceedance.csv", ["run", "noise_multiplier", "count", "slots", "fraction"], rows)
    return details


def run_gaussian_levy(cfg: RunConfig, out: Path) -> dict:
    comp = netsim.gaussian_levy_comparison(
        network_config(cfg.params), cfg.seed, cfg["dp.rounds"], dp_config(cfg.params), cost_weights(cfg.params),
        levy_alpha=cfg["stable.alpha"], levy_weight=cfg["cost.sum_rate_terminal_weight"],
        gaussian_weight=cfg["cost.sum_rate_terminal_weight_gaussian"])
    comp.gaussian.write(out / "gaussian")
    comp.levy.write(out / "levy")
    keys = ("alpha", "sum_rate_terminal_weight", "action_changes", "action_changes_per_time", "nonzero_actions",
            "sinr_iqr", "total_cost")
    rows = [[name] + [_f(s[k]) for k in keys] for name, s in comp.summary.items()]
    _write_csv(out / "summary.csv", ["run", *keys], rows)
    return {"gaussian": _read_manifest(out / "gaussian"), "levy": _read_manifest(out / "levy")}


RUNNERS = {
    "stable_diag": run_stable_diag,
    "channel": run_channel,
    "riesz_diag": run_riesz_diag,
    "hjb_test": run_hjb_test,
    "downlink": run_downlink_experiment,
    "noise_study": run_noise_study,
    "gaussian_levy": run_gaussian_levy,
}
assert set(RUNNERS) == set(EXPERIMENTS)


def _read_manifest(directory: Path) -> dict:
    path = directory / "manifest.json"
    return json.loads(path.read_text()) if path.exists() else {}


def run(cfg: RunConfig) -> int:
    """Run one experiment into ``cfg.out_dir`` and write its manifest."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(emit(cfg.params))
    details = RUNNERS[cfg.experiment](cfg, out)
    files = sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "code_version": __version__,
        "config": cfg.params,
        "files": files,
        "details": details,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return 0


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


# -- argument handling ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levyhjb", description="Levy-driven channel and fractional HJB experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")
    v = sub.add_parser("validate", help="run the invariant checks of each module")
    v.add_argument("--module", default=None, help="restrict to one module")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        from .validation import MODULES, print_table, run_checks

        if args.module is not None and args.module not in MODULES:
            print(f"error: unknown module {args.module!r}; choose from {', '.join(MODULES)}", file=sys.stderr)
            return 2
        results = run_checks(args.module)
        print_table(results)
        return 0 if all(r.ok for r in results) else 1
    try:
        cfg = parse_config(args.config, args.command, args.seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
