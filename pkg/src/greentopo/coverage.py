"""Downlink coverage probability of a Poisson cellular network and its surrogates.

The exact coverage is

    psi(lam, p, beta) = pi*lam * int_0^inf exp(-pi*lam*(1 + phi/beta)*x
                                               - xi*sigma2/(p*beta) * x**(alpha/2)) dx

with ``phi = phi(xi, alpha)`` the interference geometry factor. Surrogates
replace the noise term with simpler monomial expressions so the coverage
constraint becomes a posynomial inequality.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError, InfeasibleError, QuadratureError
from .model import Constraints, RadioEnv, Topology

__all__ = [
    "SurrogateKind",
    "CoverageSpec",
    "phi",
    "q_function",
    "q_scaled",
    "gamma_factor",
    "psi_exact",
    "psi_closed4",
    "psi_closed4_array",
    "psi_surrogate",
    "psi_surrogate_array",
    "psi_upper",
    "theta",
    "vartheta",
    "posynomial_coeffs",
    "posynomial_lhs",
]

# Integration horizon after normalizing the linear decay: exp(-30) ~ 9.4e-14.
_U_MAX = 30.0
_QUAD_TOL = 1e-10


class SurrogateKind(enum.Enum):
    EXACT = "exact"
    CLOSED_FORM4 = "closed4"
    LB_E = "lb-e"
    LB_BETA = "lb-beta"
    APPROX_A = "approx-a"
    LB_Q = "lb-q"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            return cls[str(value).upper().replace("-", "_")]


POSYNOMIAL_KINDS = (SurrogateKind.LB_BETA, SurrogateKind.APPROX_A, SurrogateKind.LB_Q)


@functools.lru_cache(maxsize=256)
def phi(xi: float, alpha: float) -> float:
    """Interference factor ``xi**(2/alpha) * int_{xi**(-2/alpha)}^inf du / (1 + u**(alpha/2))``.

    The arctan closed form is used for ``alpha == 4``. Otherwise the tail is
    mapped onto a finite interval with ``t = 1/u``, which leaves an algebraic
    endpoint weight ``t**(alpha/2 - 2)`` handled by QUADPACK's QAWS rule.
    """
    if not alpha > 2:
        raise DomainError(f"alpha must exceed 2, got {alpha}")
    if not xi > 0:
        raise DomainError(f"xi must be positive, got {xi}")
    if alpha == 4:
        s = math.sqrt(xi)
        return s * (math.pi / 2 - math.atan(1.0 / s))
    k = alpha / 2.0
    upper = xi ** (1.0 / k)  # 1/u0 with u0 = xi**(-2/alpha)
    val, err = integrate.quad(lambda t: 1.0 / (1.0 + t**k), 0.0, upper,
                              weight="alg", wvar=(k - 2.0, 0.0),
                              epsabs=1e-14, epsrel=1e-13, limit=200)
    if err > 1e-11:
        raise QuadratureError(f"phi quadrature error estimate {err:.3g}", residual=err)
    return xi ** (1.0 / k) * val


def q_function(x):
    """Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0)) if np.ndim(x) \
        else 0.5 * math.erfc(x / math.sqrt(2.0))


def q_scaled(x):
    """``exp(x**2/2) * Q(x)`` without overflow, via the scaled erfc."""
    return 0.5 * special.erfcx(np.asarray(x, dtype=float) / math.sqrt(2.0))


def gamma_factor(alpha: float) -> float:
    """``Gamma(1 + alpha/2)`` through the log-gamma route."""
    return math.exp(math.lgamma(1.0 + alpha / 2.0))


@dataclass(frozen=True)
class CoverageSpec:
    """Radio environment plus a band count, with ``phi`` cached."""

    env: RadioEnv
    beta: float = 1.0
    phi_cached: float = field(init=False)

    def __post_init__(self):
        if not self.beta >= 1:
            raise DomainError(f"beta must be >= 1, got {self.beta}")
        object.__setattr__(self, "phi_cached", phi(self.env.xi, self.env.alpha))

    @property
    def interference_factor(self) -> float:
        return 1.0 + self.phi_cached / self.beta

    @property
    def ceiling(self) -> float:
        """Noise-free coverage ``1 / (1 + phi/beta)``."""
        return 1.0 / self.interference_factor


def psi_upper(beta: float, env: RadioEnv) -> float:
    """Supremum of the coverage probability at band count ``beta``."""
    return 1.0 / (1.0 + phi(env.xi, env.alpha) / beta)


def _noise_coeff(lam, p, beta, env, phi_val):
    """Coefficient ``c`` in ``int exp(-u - c*u**(alpha/2)) du`` after normalization."""
    k = env.alpha / 2.0
    a = math.pi * lam * (1.0 + phi_val / beta)
    return env.xi * env.sigma2 / (p * beta) * a ** (-k)


def _normalized_integral(c: float, k: float) -> float:
    if c == 0.0:
        return 1.0
    # Past c*u**k = 40 the noise factor alone is below exp(-40); past 30 the
    # linear factor is below exp(-30). Either way the dropped tail is < 1e-13.
    scale = c ** (-1.0 / k)
    upper = min(_U_MAX, scale * 40.0 ** (1.0 / k))
    pts = [scale] if scale < upper else None
    val, err = integrate.quad(lambda u: math.exp(-u - c * u**k), 0.0, upper,
                              points=pts, epsabs=1e-13, epsrel=1e-12, limit=200)
    if err > _QUAD_TOL:
        raise QuadratureError(f"coverage quadrature error estimate {err:.3g}", residual=err)
    return val


def psi_exact(top: Topology, env: RadioEnv) -> float:
    """Exact coverage probability by adaptive quadrature.

    Substitutes ``u = pi*lam*(1 + phi/beta)*x`` so the linear decay is unit
    rate, then integrates up to where either exponential factor has dropped
    below ``exp(-30)``; the discarded tail is below 1e-13.
    """
    ph = phi(env.xi, env.alpha)
    c = _noise_coeff(top.lam, top.p, top.beta, env, ph)
    return _normalized_integral(c, env.alpha / 2.0) / (1.0 + ph / top.beta)


def psi_closed4_array(lam, p, beta, env: RadioEnv):
    """Vectorized closed form for ``alpha == 4``.

    ``psi = pi*lam*sqrt(pi/b) * exp(z**2/2) Q(z)`` with ``a = pi*lam*(1+phi/beta)``,
    ``b = xi*sigma2/(p*beta)`` and ``z = a/sqrt(2b)``; the product is formed
    through :func:`q_scaled` only.
    """
    if env.alpha != 4:
        raise DomainError(f"closed form requires alpha == 4, got {env.alpha}")
    lam, p, beta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lam, p, beta)))
    ph = phi(env.xi, 4.0)
    ceiling = 1.0 / (1.0 + ph / beta)
    if env.sigma2 == 0.0:
        out = ceiling.copy()
    else:
        a = math.pi * lam * (1.0 + ph / beta)
        b = env.xi * env.sigma2 / (p * beta)
        z = a / np.sqrt(2.0 * b)
        out = math.pi * lam * np.sqrt(math.pi / b) * q_scaled(z)
    return out.item() if out.ndim == 0 else out


def psi_closed4(top: Topology, env: RadioEnv) -> float:
    """Closed-form coverage for ``alpha == 4``."""
    return psi_closed4_array(top.lam, top.p, top.beta, env)


def psi_surrogate_array(kind, lam, p, beta, env: RadioEnv):
    """Vectorized surrogate evaluation; values are not clamped and may be negative."""
    kind = SurrogateKind.parse(kind)
    if kind is SurrogateKind.EXACT:
        f = np.vectorize(lambda l_, p_, b_: psi_exact(Topology(l_, p_, b_), env))
        out = np.asarray(f(lam, p, beta), dtype=float)
        return out.item() if out.ndim == 0 else out
    if kind is SurrogateKind.CLOSED_FORM4:
        return psi_closed4_array(lam, p, beta, env)

    lam, p, beta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lam, p, beta)))
    alpha, xi, s2 = env.alpha, env.xi, env.sigma2
    k = alpha / 2.0
    ph = phi(xi, alpha)
    inter = 1.0 + ph / beta
    g = gamma_factor(alpha)
    if kind is SurrogateKind.LB_E:
        noise = xi * s2 * g / ((lam * math.pi * inter) ** k * p * beta)
    elif kind is SurrogateKind.LB_BETA:
        noise = xi * s2 * g / ((lam * math.pi) ** k * p * beta)
    elif kind is SurrogateKind.APPROX_A:
        noise = xi * s2 * g / ((lam * math.pi * (1.0 + ph)) ** k * p * beta)
    elif kind is SurrogateKind.LB_Q:
        if alpha != 4:
            raise DomainError("the Q-function lower bound requires alpha == 4")
        noise = 2 * xi * s2 / (2 * xi * s2 + (lam * math.pi * inter) ** 2 * p * beta)
    else:  # pragma: no cover
        raise DomainError(f"unknown surrogate {kind}")
    out = (1.0 - noise) / inter
    return out.item() if out.ndim == 0 else out


def psi_surrogate(kind, top: Topology, env: RadioEnv) -> float:
    return psi_surrogate_array(kind, top.lam, top.p, top.beta, env)


def vartheta(beta: float, env: RadioEnv, cn: Constraints) -> float:
    """Threshold on ``lam**(alpha/2) * p`` that guarantees ``psi(lam, p, beta) >= eta``.

    Raises :class:`InfeasibleError` when ``eta >= 1/(1 + phi/beta)``.
    """
    if not beta >= 1:
        raise DomainError(f"beta must be >= 1, got {beta}")
    alpha, xi = env.alpha, env.xi
    ph = phi(xi, alpha)
    inter = 1.0 + ph / beta
    slack = 1.0 - cn.eta * inter
    if slack <= 0:
        raise InfeasibleError(
            f"eta={cn.eta} is not below the coverage ceiling {1 / inter:.6f}",
            assumption="eta < 1/(1+phi/beta)", achieved=1.0 / inter)
    return (xi * env.sigma2 * gamma_factor(alpha) / beta
            / (slack * (math.pi * inter) ** (alpha / 2.0)))


def theta(env: RadioEnv, cn: Constraints) -> float:
    """Universal-reuse threshold: ``lam**(alpha/2) * p >= theta`` implies ``psi >= eta``."""
    return vartheta(1.0, env, cn)


def posynomial_coeffs(kind, env: RadioEnv, cn: Constraints):
    """Coefficients ``(c0, c1, c2)`` of ``c0/(lam**(alpha/2) p beta) + c1/beta + c2/beta**2 <= 1``."""
    kind = SurrogateKind.parse(kind)
    alpha, xi, eta = env.alpha, env.xi, cn.eta
    ph = phi(xi, alpha)
    g = gamma_factor(alpha)
    k = alpha / 2.0
    odds = eta / (1.0 - eta)
    if kind is SurrogateKind.LB_BETA:
        return xi * env.sigma2 * g / (math.pi**k * (1 - eta)), odds * ph, 0.0
    if kind is SurrogateKind.APPROX_A:
        return (xi * env.sigma2 * g / (math.pi**k * (1 - eta) * (1 + ph) ** k),
                odds * ph, 0.0)
    if kind is SurrogateKind.LB_Q:
        if alpha != 4:
            raise DomainError("the Q-function lower bound requires alpha == 4")
        if eta < 0.5:
            raise DomainError(f"LB_Q coefficients need eta >= 1/2, got {eta}")
        return (2 * xi * env.sigma2 * eta / (math.pi**2 * (1 - eta)),
                (2 * eta - 1) / (1 - eta) * ph,
                odds * ph**2)
    raise DomainError(f"{kind.value} has no posynomial constraint form")


def posynomial_lhs(coeffs, lam, p, beta, alpha):
    """Left-hand side ``f(lam, p, beta)`` of the posynomial coverage constraint."""
    c0, c1, c2 = coeffs
    lam, p, beta = (np.asarray(v, dtype=float) for v in (lam, p, beta))
    out = c0 * lam ** (-alpha / 2.0) / (p * beta) + c1 / beta + c2 / beta**2
    return out.item() if np.ndim(out) == 0 else out
