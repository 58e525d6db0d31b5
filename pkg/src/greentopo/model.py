"""Domain parameters, the affine base-station power model and area power consumption.

All quantities are stored in linear SI-style units: watts for powers,
km^-2 for densities, linear ratios for gains and SINR thresholds.
Decibel conversions live in the helpers at the bottom of this module and
are meant to be called only at input/output boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "RadioEnv",
    "PowerModel",
    "Constraints",
    "Topology",
    "apc",
    "area_power",
    "table_ii",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
]


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True)
class RadioEnv:
    """Propagation and noise parameters.

    Parameters
    ----------
    alpha : float
        Path-loss exponent, must exceed 2.
    xi : float
        Minimum required SINR (linear).
    path_loss_unit : float
        Linear path-loss gain at 1 km.
    noise_total : float
        Noise power over the whole bandwidth, watts.

    The normalized noise ``sigma2 = noise_total / path_loss_unit`` is
    derived on construction.
    """

    alpha: float
    xi: float
    path_loss_unit: float
    noise_total: float
    sigma2: float = field(init=False)

    def __post_init__(self):
        if not self.alpha > 2:
            raise DomainError(f"alpha must exceed 2, got {self.alpha}")
        if not self.xi > 0:
            raise DomainError(f"xi must be positive, got {self.xi}")
        if not self.path_loss_unit > 0:
            raise DomainError(f"path_loss_unit must be positive, got {self.path_loss_unit}")
        if not self.noise_total >= 0:
            raise DomainError(f"noise_total must be non-negative, got {self.noise_total}")
        object.__setattr__(self, "sigma2", self.noise_total / self.path_loss_unit)

    def with_(self, **changes) -> "RadioEnv":
        kw = dict(alpha=self.alpha, xi=self.xi, path_loss_unit=self.path_loss_unit,
                  noise_total=self.noise_total)
        kw.update(changes)
        return RadioEnv(**kw)


@dataclass(frozen=True)
class PowerModel:
    """Affine per-BS power consumption: ``P_a + delta_p * p`` when active, ``P_s`` asleep."""

    p_active_standby: float
    p_sleep: float
    delta_p: float
    p_max: float
    p_bar: float = field(init=False)

    def __post_init__(self):
        if not self.p_sleep >= 0:
            raise DomainError(f"p_sleep must be non-negative, got {self.p_sleep}")
        if not self.p_active_standby > self.p_sleep:
            raise DomainError(
                f"p_active_standby ({self.p_active_standby}) must exceed p_sleep ({self.p_sleep})")
        if not self.delta_p > 0:
            raise DomainError(f"delta_p must be positive, got {self.delta_p}")
        if not self.p_max > 0:
            raise DomainError(f"p_max must be positive, got {self.p_max}")
        object.__setattr__(self, "p_bar", self.p_active_standby - self.p_sleep)

    @classmethod
    def from_sleep_ratio(cls, ratio, p_active_standby, delta_p, p_max):
        """Build the model with ``p_bar / p_active_standby == ratio``."""
        if not 0 < ratio <= 1:
            raise DomainError(f"sleep-benefit ratio must lie in (0, 1], got {ratio}")
        p_sleep = p_active_standby * (1.0 - ratio)
        return cls(p_active_standby, max(p_sleep, 0.0), delta_p, p_max)

    def with_(self, **changes) -> "PowerModel":
        kw = dict(p_active_standby=self.p_active_standby, p_sleep=self.p_sleep,
                  delta_p=self.delta_p, p_max=self.p_max)
        kw.update(changes)
        return PowerModel(**kw)


@dataclass(frozen=True)
class Constraints:
    """Coverage target ``eta`` and the density window ``[lambda_l, lambda_u]``."""

    eta: float
    lambda_l: float
    lambda_u: float

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise DomainError(f"eta must lie in (0, 1), got {self.eta}")
        if not 0 < self.lambda_l <= self.lambda_u:
            raise DomainError(
                f"need 0 < lambda_l <= lambda_u, got {self.lambda_l}, {self.lambda_u}")

    def with_(self, **changes) -> "Constraints":
        kw = dict(eta=self.eta, lambda_l=self.lambda_l, lambda_u=self.lambda_u)
        kw.update(changes)
        return Constraints(**kw)


@dataclass(frozen=True)
class Topology:
    """An operating point: active density ``lam``, per-BS power ``p``, band count ``beta``."""

    lam: float
    p: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"lam must be positive, got {self.lam}")
        if not self.p > 0:
            raise DomainError(f"p must be positive, got {self.p}")
        if not self.beta >= 1:
            raise DomainError(f"beta must be >= 1, got {self.beta}")


def area_power(lam, p, pm: PowerModel, lambda_u: float, reduced: bool = False):
    """Area power consumption for (arrays of) active density and transmit power.

    Accepts ``lam == 0`` (every BS asleep). With ``reduced=True`` the constant
    sleep term ``lambda_u * P_s`` is dropped.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(lam > lambda_u * (1 + 1e-12)):
        raise DomainError("active density must lie in [0, lambda_u]")
    out = lam * (pm.p_bar + pm.delta_p * np.asarray(p, dtype=float))
    if not reduced:
        out = out + lambda_u * pm.p_sleep
    return out.item() if out.ndim == 0 else out


def apc(top: Topology, pm: PowerModel, cn: Constraints, reduced: bool = False) -> float:
    """Area power consumption (W/km^2) of ``top``; ``reduced`` drops ``lambda_u * P_s``."""
    if top.lam > cn.lambda_u * (1 + 1e-12):
        raise DomainError(f"lam={top.lam} exceeds lambda_u={cn.lambda_u}")
    return area_power(top.lam, top.p, pm, cn.lambda_u, reduced=reduced)


# Reference defaults: A = -128.1 dB at 1 km, total noise -100.99 dBm over 20 MHz,
# P_max = 49 dBm, P_a = 185 W, delta_p = 4.7, xi = -6 dB.
TABLE_II = {
    "lambda_u": 1.0,
    "lambda_l": 0.2,
    "p_max_dbm": 49.0,
    "p_active_standby": 185.0,
    "delta_p": 4.7,
    "path_loss_db": -128.1,
    "noise_total_dbm": -100.99,
    "xi_db": -6.0,
}


def table_ii(alpha: float = 4.0, eta: float = 0.8, sleep_ratio: float = 1.0):
    """Return ``(env, pm, cn)`` built from the reference system parameters."""
    t = TABLE_II
    env = RadioEnv(alpha=alpha, xi=db_to_linear(t["xi_db"]),
                   path_loss_unit=db_to_linear(t["path_loss_db"]),
                   noise_total=dbm_to_watts(t["noise_total_dbm"]))
    pm = PowerModel.from_sleep_ratio(sleep_ratio, t["p_active_standby"], t["delta_p"],
                                     dbm_to_watts(t["p_max_dbm"]))
    cn = Constraints(eta=eta, lambda_l=t["lambda_l"], lambda_u=t["lambda_u"])
    return env, pm, cn
