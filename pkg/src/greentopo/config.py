"""INI-style run configuration with explicit units.

A config file has up to four sections::

    [env]
    alpha = 4
    xi = -6 dB
    path_loss = -128.1 dB
    noise_total = -100.99 dBm

    [power]
    p_active_standby = 185 W
    sleep_ratio = 1.0          ; or p_sleep = 0 W
    delta_p = 4.7
    p_max = 49 dBm

    [constraints]
    eta = 0.8
    lambda_l = 0.2
    lambda_u = 1.0

    [experiment]
    id = apc-ufr
    sleep_ratios = 0.1, 0.3, 0.5, 0.7

Power values must carry a ``W``, ``mW`` or ``dBm`` suffix. Gains accept a
``dB`` suffix or a bare linear number. Missing keys fall back to the
reference parameter set. Everything is validated before any computation.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

from .errors import DomainError, ValidationError
from .model import (
    TABLE_II,
    Constraints,
    PowerModel,
    RadioEnv,
    db_to_linear,
    dbm_to_watts,
)

__all__ = ["EXPERIMENTS", "ExperimentSpec", "parse_power", "parse_gain", "load_config",
           "default_spec"]

EXPERIMENTS = ("coverage-curves", "contour", "apc-ufr", "apc-pfr", "pwc-model-effect", "custom")

_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
_UNIT_RE = re.compile(rf"^\s*{_NUM}\s*([A-Za-z]*)\s*$")


def _split(text: str, key: str):
    m = _UNIT_RE.match(text)
    if not m:
        raise ValidationError(f"{key}: cannot parse {text!r}")
    return float(m.group(1)), m.group(2)


def parse_power(text: str, key: str = "power") -> float:
    """Parse ``"49 dBm"``, ``"185 W"`` or ``"500 mW"`` into watts."""
    val, unit = _split(text, key)
    unit = unit.lower()
    if unit == "dbm":
        return dbm_to_watts(val)
    if unit == "w":
        return val
    if unit == "mw":
        return val * 1e-3
    raise ValidationError(f"{key}: power needs a W, mW or dBm suffix, got {text!r}")


def parse_gain(text: str, key: str = "gain") -> float:
    """Parse ``"-6 dB"`` or a bare linear value."""
    val, unit = _split(text, key)
    if unit.lower() == "db":
        return db_to_linear(val)
    if unit:
        raise ValidationError(f"{key}: unknown unit {unit!r} (use dB or no suffix)")
    return val


def _parse_float(text: str, key: str) -> float:
    val, unit = _split(text, key)
    if unit:
        raise ValidationError(f"{key}: expected a plain number, got {text!r}")
    return val


def _parse_list(text: str, key: str, parser=_parse_float):
    items = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not items:
        raise ValidationError(f"{key}: empty list")
    return [parser(t, key) for t in items]


# Typed keys that an [experiment] section may carry. Anything else is rejected.
_EXPERIMENT_KEYS = {
    "sleep_ratios": _parse_list,
    "alphas": _parse_list,
    "betas": _parse_list,
    "lambdas": _parse_list,
    "etas": _parse_list,
    "delta_ps": _parse_list,
    "xi_db": _parse_list,
    "kinds": lambda t, k: [s for s in re.split(r"[,\s]+", t.strip()) if s],
    "p_tx": lambda t, k: parse_power(t, k),
    "grid_points": lambda t, k: int(_parse_float(t, k)),
    "problem": lambda t, k: t.strip(),
    "lam": _parse_float,
    "p": lambda t, k: parse_power(t, k),
    "beta": _parse_float,
    "eta": _parse_float,
    "oracle_resolution": lambda t, k: int(_parse_float(t, k)),
}


@dataclass
class ExperimentSpec:
    """Everything a run needs; ``params`` holds experiment-specific overrides."""

    experiment: str
    env: RadioEnv
    pm: PowerModel
    cn: Constraints
    params: dict = field(default_factory=dict)
    out: str = "out"
    seed: int = 0
    oracle: bool = False
    trials: int = 100_000
    integer_beta: bool = False
    workers: int = 1

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.experiment!r}; "
                                  f"choose from {', '.join(EXPERIMENTS)}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if self.trials < 1:
            raise ValidationError("trials must be positive")
        if self.workers < 1:
            raise ValidationError("workers must be positive")
        for key in ("sleep_ratios",):
            for r in self.params.get(key, []):
                if not 0 < r <= 1:
                    raise ValidationError(f"{key}: ratios must lie in (0, 1], got {r}")
        for a in self.params.get("alphas", []):
            if not a > 2:
                raise ValidationError(f"alphas: path-loss exponent must exceed 2, got {a}")
        for b in self.params.get("betas", []):
            if not b >= 1:
                raise ValidationError(f"betas: band count must be >= 1, got {b}")
        for e in self.params.get("etas", []):
            if not 0 < e < 1:
                raise ValidationError(f"etas: coverage target must lie in (0, 1), got {e}")
        for lam in self.params.get("lambdas", []):
            if not 0 < lam <= self.cn.lambda_u:
                raise ValidationError(f"lambdas: density must lie in (0, lambda_u], got {lam}")
        if "eta" in self.params and not 0 < self.params["eta"] < 1:
            raise ValidationError(f"eta: coverage target must lie in (0, 1), got {self.params['eta']}")
        if self.params.get("grid_points", 2) < 2:
            raise ValidationError("grid_points must be at least 2")
        if self.params.get("oracle_resolution", 50) < 50:
            raise ValidationError("oracle_resolution must be at least 50")
        for d in self.params.get("delta_ps", []):
            if not d > 0:
                raise ValidationError(f"delta_ps: slope must be positive, got {d}")
        return self


def default_spec(experiment: str = "custom") -> ExperimentSpec:
    t = TABLE_II
    env = RadioEnv(alpha=4.0, xi=db_to_linear(t["xi_db"]),
                   path_loss_unit=db_to_linear(t["path_loss_db"]),
                   noise_total=dbm_to_watts(t["noise_total_dbm"]))
    pm = PowerModel(t["p_active_standby"], 0.0, t["delta_p"], dbm_to_watts(t["p_max_dbm"]))
    cn = Constraints(eta=0.8, lambda_l=t["lambda_l"], lambda_u=t["lambda_u"])
    return ExperimentSpec(experiment, env, pm, cn)


def _get(section, key, parser, default):
    if section is None or key not in section:
        return default
    return parser(section[key], key)


def load_config(path: str | None, experiment: str | None = None) -> ExperimentSpec:
    """Read ``path`` (or only the defaults when ``None``) into a validated spec.

    ``experiment`` overrides ``[experiment] id``.
    """
    spec = default_spec()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
    unknown = set(cp.sections()) - {"env", "power", "constraints", "experiment"}
    if unknown:
        raise ValidationError(f"unknown config sections: {', '.join(sorted(unknown))}")
    sec = {name: (cp[name] if cp.has_section(name) else None)
           for name in ("env", "power", "constraints", "experiment")}

    try:
        e0 = spec.env
        env = RadioEnv(
            alpha=_get(sec["env"], "alpha", _parse_float, e0.alpha),
            xi=_get(sec["env"], "xi", parse_gain, e0.xi),
            path_loss_unit=_get(sec["env"], "path_loss", parse_gain, e0.path_loss_unit),
            noise_total=_get(sec["env"], "noise_total", parse_power, e0.noise_total),
        )
        p0 = spec.pm
        pa = _get(sec["power"], "p_active_standby", parse_power, p0.p_active_standby)
        dp = _get(sec["power"], "delta_p", _parse_float, p0.delta_p)
        pmax = _get(sec["power"], "p_max", parse_power, p0.p_max)
        pw = sec["power"]
        if pw is not None and "sleep_ratio" in pw and "p_sleep" in pw:
            raise ValidationError("give either sleep_ratio or p_sleep, not both")
        if pw is not None and "sleep_ratio" in pw:
            pm = PowerModel.from_sleep_ratio(_parse_float(pw["sleep_ratio"], "sleep_ratio"),
                                             pa, dp, pmax)
        else:
            pm = PowerModel(pa, _get(pw, "p_sleep", parse_power, p0.p_sleep), dp, pmax)
        c0 = spec.cn
        cn = Constraints(
            eta=_get(sec["constraints"], "eta", _parse_float, c0.eta),
            lambda_l=_get(sec["constraints"], "lambda_l", _parse_float, c0.lambda_l),
            lambda_u=_get(sec["constraints"], "lambda_u", _parse_float, c0.lambda_u),
        )
    except ValidationError:
        raise
    except DomainError as exc:
        raise ValidationError(str(exc)) from exc

    for name in ("env", "power", "constraints"):
        allowed = {"env": {"alpha", "xi", "path_loss", "noise_total"},
                   "power": {"p_active_standby", "p_sleep", "sleep_ratio", "delta_p", "p_max"},
                   "constraints": {"eta", "lambda_l", "lambda_u"}}[name]
        if sec[name] is not None:
            extra = set(sec[name]) - allowed
            if extra:
                raise ValidationError(f"[{name}] unknown keys: {', '.join(sorted(extra))}")

    params = {}
    exp_id = experiment
    if sec["experiment"] is not None:
        for key, text in sec["experiment"].items():
            if key == "id":
                exp_id = exp_id or text.strip()
                continue
            if key not in _EXPERIMENT_KEYS:
                raise ValidationError(f"[experiment] unknown key {key!r}")
            params[key] = _EXPERIMENT_KEYS[key](text, key)
    if exp_id is None:
        raise ValidationError("no experiment given (use --experiment or [experiment] id)")
    return ExperimentSpec(exp_id, env, pm, cn, params=params).validate()
