"""Flat key-value run configuration.

One ``module.param = value`` pair per line; ``#`` starts a comment.  Values
are ints, decimals or bare strings.  Every key has a default, so an empty
file yields the reference setup.  Environment variables named
``LEVYHJB_<MODULE>__<PARAM>`` (upper case) override file values.
"""

import os
from dataclasses import dataclass, field
from pathlib import Path

ENV_PREFIX = "LEVYHJB_"

EXPERIMENTS = ("stable_diag", "channel", "riesz_diag", "hjb_test", "downlink", "noise_study", "gaussian_levy")


class ConfigError(ValueError):
    pass


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _in(*options):
    return lambda x: x in options


# key -> (default, type, check, constraint text)
SCHEMA = {
    "network.n_bs": (3, int, lambda x: x >= 1, "n_bs >= 1"),
    "network.m_ue": (3, int, lambda x: x >= 1, "m_ue >= 1"),
    "network.serving_gain": (0.5, float, lambda x: 0 < x < 1, "serving_gain in (0,1)"),
    "network.interfering_gain": (0.1, float, lambda x: 0 < x < 1, "interfering_gain in (0,1)"),
    "network.eta": (1.0, float, _pos, "eta > 0"),
    "network.p_min": (0.0, float, _nonneg, "p_min >= 0"),
    "network.p_max": (15.0, float, _pos, "p_max > p_min"),
    "network.p0": (7.5, float, _nonneg, "p0 in [p_min, p_max]"),
    "network.u_step": (1.0, float, _pos, "u_step > 0"),
    "time.dt": (0.1, float, _pos, "dt > 0"),
    "time.n_steps": (100, int, lambda x: x >= 1, "n_steps >= 1"),
    "time.horizon": (10.0, float, _pos, "horizon = dt * n_steps"),
    "stable.alpha": (1.8, float, lambda x: 1 < x <= 2, "alpha ∈ (1,2]"),
    "channel.a": (0.1, float, _pos, "a > 0"),
    "channel.sigma_beta": (0.1, float, _nonneg, "sigma_beta >= 0"),
    "channel.sigma_p": (0.3, float, _nonneg, "sigma_p >= 0"),
    "channel.c_eps": (1.0, float, _pos, "c_eps > 0"),
    "channel.tau": (0.01, float, lambda x: 0 < x <= 1, "tau ∈ (0,1]"),
    "channel.rho": (1e-3, float, _pos, "rho > 0"),
    "channel.noise_multiplier": (0.1, float, _nonneg, "noise_multiplier >= 0"),
    "channel.substeps": (10, int, lambda x: x >= 1, "substeps >= 1"),
    "channel.n_paths": (100, int, lambda x: x >= 1, "n_paths >= 1"),
    "cost.r_th": (1.5, float, _pos, "r_th > 0"),
    "cost.varsigma": (1.0, float, _nonneg, "varsigma >= 0"),
    "cost.lambda": (0.1, float, _nonneg, "lambda >= 0"),
    "cost.variant": ("paper_eq52", str, _in("paper_eq52", "comparative"), "variant in {paper_eq52, comparative}"),
    "cost.fairness_weight": (1.0, float, _nonneg, "fairness_weight >= 0"),
    "cost.power_increase_weight": (0.1, float, _nonneg, "power_increase_weight >= 0"),
    "cost.sum_rate_terminal_weight": (0.1, float, _nonneg, "sum_rate_terminal_weight >= 0"),
    "cost.sum_rate_terminal_weight_gaussian": (1.0, float, _nonneg, "sum_rate_terminal_weight_gaussian >= 0"),
    "dp.rounds": (100, int, _nonneg, "rounds >= 0"),
    "dp.samples": (128, int, lambda x: x >= 1, "samples >= 1"),
    "dp.p_nodes": (8, int, lambda x: x >= 2, "p_nodes >= 2"),
    "dp.scheme": ("gauss_seidel", str, _in("gauss_seidel", "jacobi"), "scheme in {gauss_seidel, jacobi}"),
    "noise_study.low": (0.1, float, _nonneg, "low >= 0"),
    "noise_study.high": (0.5, float, _nonneg, "high >= 0"),
    "stable_diag.samples": (1_000_000, int, lambda x: x >= 100, "samples >= 100"),
    "riesz_diag.nodes": (2048, int, lambda x: x >= 8, "nodes >= 8"),
    "riesz_diag.sigma": (1.0, float, _pos, "sigma > 0"),
    "hjb_test.alpha": (1.5, float, lambda x: 1 < x <= 2, "alpha ∈ (1,2]"),
    "hjb_test.sigma": (0.5, float, _pos, "sigma > 0"),
    "hjb_test.box": (2.0, float, _pos, "box > 0"),
    "hjb_test.horizon": (1.0, float, _pos, "horizon > 0"),
    "hjb_test.n_steps": (20, int, lambda x: x >= 1, "n_steps >= 1"),
    "hjb_test.nodes": (81, int, lambda x: x >= 3, "nodes >= 3"),
    "hjb_test.samples": (10_000, int, lambda x: x >= 1, "samples >= 1"),
}


def defaults() -> dict:
    return {k: v[0] for k, v in SCHEMA.items()}


@dataclass
class RunConfig:
    experiment: str
    params: dict = field(default_factory=defaults)
    seed: int = 0
    out_dir: Path | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")
        validate(self.params)

    def __getitem__(self, key):
        return self.params[key]


def _convert(key, raw: str, lineno=None):
    kind = SCHEMA[key][1]
    where = f"line {lineno}: " if lineno is not None else ""
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{where}{key}: expected {kind.__name__}, got {raw!r}") from None
    return raw


def parse_text(text: str) -> dict:
    """Parse config text into a dict of explicitly set keys (no defaults)."""
    seen = {}
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if not key or not raw:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} on lines {seen[key]} and {lineno}")
        seen[key] = lineno
        out[key] = _convert(key, raw, lineno)
    return out


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        if key not in SCHEMA:
            raise ConfigError(f"environment variable {name}: unknown key {key!r}")
        out[key] = _convert(key, raw.strip())
    return out


def validate(params: dict) -> None:
    unknown = set(params) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    for key, value in params.items():
        check, text = SCHEMA[key][2], SCHEMA[key][3]
        if not check(value):
            raise ConfigError(f"{key} = {value!r} violates constraint {text}")
    p = {**defaults(), **params}
    if not p["network.p_min"] < p["network.p_max"]:
        raise ConfigError("network.p_max violates constraint p_max > p_min")
    if not p["network.p_min"] <= p["network.p0"] <= p["network.p_max"]:
        raise ConfigError("network.p0 violates constraint p0 in [p_min, p_max]")
    if abs(p["time.horizon"] - p["time.dt"] * p["time.n_steps"]) > 1e-9 * p["time.horizon"]:
        raise ConfigError("time.horizon violates constraint horizon = dt * n_steps")


def resolve(explicit: dict, environ=None) -> dict:
    """Defaults, then file values, then environment overrides.

    When only dt or n_steps is set, the horizon follows from them.
    """
    params = {**defaults(), **explicit, **env_overrides(environ)}
    given = set(explicit) | set(env_overrides(environ))
    if "time.horizon" not in given and given & {"time.dt", "time.n_steps"}:
        params["time.horizon"] = params["time.dt"] * params["time.n_steps"]
    validate(params)
    return params


def parse_config(path, experiment: str = "downlink", seed: int = 0, out_dir=None, environ=None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    params = resolve(parse_text(path.read_text()), environ)
    cfg = RunConfig(experiment, params, seed, Path(out_dir) if out_dir is not None else None)
    if cfg.out_dir is not None:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        (cfg.out_dir / "config.resolved").write_text(emit(params))
    return cfg


def emit(params: dict) -> str:
    """Serialize every key in schema order with round-trip exact values."""
    lines = []
    for key in SCHEMA:
        v = params[key]
        lines.append(f"{key} = {repr(float(v)) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"
