"""Monte-Carlo estimate of downlink coverage on a Poisson deployment.

Each trial places the typical user at the origin of a disc of radius
``window_radius``, draws the active base stations (directly at density
``lam`` or by thinning a deployment at ``lambda_u``), gives every station a
frequency band, attaches the user to the nearest active station and draws
unit-mean exponential fades for every link. A trial succeeds when

    SINR = p*A*h0*r0**-alpha / (noise_total/beta + sum_co-channel p*A*h_j*r_j**-alpha)

exceeds ``xi``. Transmit power is concentrated on one band of width B/beta,
so the noise seen in that band is ``noise_total/beta``; this matches the
``nu = p*beta/sigma2`` normalization of the analytic coverage.

Trials are processed in fixed-size blocks. Block ``b`` draws from a Philox
stream keyed by the seed with ``b`` in the counter, so results do not depend
on how blocks are spread across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .coverage import psi_exact
from .errors import DomainError
from .model import RadioEnv, Topology

__all__ = [
    "SimConfig",
    "SimResult",
    "sample_ppp",
    "thin",
    "block_rng",
    "simulate_sinr",
    "estimate_coverage",
    "coverage_curve",
    "truncated_coverage",
    "truncation_bias",
    "default_window_radius",
]

BLOCK_SIZE = 2000
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    env: RadioEnv
    topology: Topology
    trials: int = 100_000
    seed: int = 0
    window_radius: float | None = None
    lambda_u: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be positive")
        if self.window_radius is not None and not self.window_radius > 0:
            raise DomainError("window_radius must be positive")
        if self.lambda_u is not None and self.lambda_u < self.topology.lam:
            raise DomainError("lambda_u must be at least the active density")

    @property
    def rho(self) -> float:
        return 1.0 if self.lambda_u is None else self.topology.lam / self.lambda_u

    def radius(self) -> float:
        if self.window_radius is not None:
            return self.window_radius
        return default_window_radius(self.env, self.topology)


@dataclass(frozen=True)
class SimResult:
    psi_hat: float
    ci_halfwidth: float
    trials_used: int
    mean_active_count: float
    redrawn_trials: int = 0
    window_radius: float = float("nan")
    truncation_bias: float = float("nan")


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based generator for trial block ``block``."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64, counter=[0, 0, block, 0]))


def sample_ppp(density: float, window_radius: float, rng: np.random.Generator):
    """Homogeneous PPP on the centred disc; returns an ``(n, 2)`` array of km coordinates."""
    if not density >= 0:
        raise DomainError("density must be non-negative")
    n = rng.poisson(density * math.pi * window_radius**2)
    r = window_radius * np.sqrt(rng.random(n))
    ang = rng.random(n) * 2.0 * math.pi
    return np.column_stack((r * np.cos(ang), r * np.sin(ang)))


def thin(points, rho: float, rng: np.random.Generator):
    """Independent thinning: keep each point with probability ``rho``."""
    keep = rng.random(len(points)) < rho
    return points[keep], keep


def _draw_block(cfg: SimConfig, radius: float, n: int, rng: np.random.Generator):
    """Distances (from the origin), owning trial, band and fade for the active BSs of ``n`` trials."""
    top = cfg.topology
    dens = top.lam if cfg.lambda_u is None else cfg.lambda_u
    counts = rng.poisson(dens * math.pi * radius**2, n)
    total = int(counts.sum())
    # Only distances matter for a user at the centre: r = R*sqrt(U) is uniform on the disc.
    r = radius * np.sqrt(rng.random(total))
    owner = np.repeat(np.arange(n), counts)
    if cfg.lambda_u is not None:
        keep = rng.random(total) < cfg.rho
        r, owner = r[keep], owner[keep]
        counts = np.bincount(owner, minlength=n)
    beta = top.beta
    if float(beta).is_integer():
        band = rng.integers(0, int(beta), r.size)
    else:
        band = None
    fade = rng.exponential(1.0, r.size)
    co_draw = rng.random(r.size) if band is None else None
    return r, owner, counts, band, co_draw, fade


def _sinr_block(cfg: SimConfig, radius: float, block: int, n: int):
    rng = block_rng(cfg.seed, block)
    env, top = cfg.env, cfg.topology
    sinr = np.empty(n)
    active = np.empty(n)
    pending = np.arange(n)
    redrawn = 0
    while pending.size:
        r, owner, counts, band, co_draw, fade = _draw_block(cfg, radius, pending.size, rng)
        ok = counts > 0
        m = pending.size
        rx = top.p * env.path_loss_unit * fade * r ** (-env.alpha)
        # Nearest active BS per trial.
        r_min = np.full(m, np.inf)
        np.minimum.at(r_min, owner, r)
        serving = r == r_min[owner]
        # Guard against exact distance ties: keep the first serving point per trial.
        first = np.zeros(r.size, dtype=bool)
        idx = np.flatnonzero(serving)
        _, uniq = np.unique(owner[idx], return_index=True)
        first[idx[uniq]] = True
        serving = first
        sig = np.zeros(m)
        sig[owner[serving]] = rx[serving]
        if band is not None:
            serve_band = np.full(m, -1)
            serve_band[owner[serving]] = band[serving]
            co = (band == serve_band[owner]) & ~serving
        else:
            co = (co_draw < 1.0 / top.beta) & ~serving
        interf = np.bincount(owner, weights=np.where(co, rx, 0.0), minlength=m)
        # A lone BS without noise gives infinite SINR; empty trials are discarded below.
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = sig / (env.noise_total / top.beta + interf)
        done = pending[ok]
        sinr[done] = vals[ok]
        active[done] = counts[ok]
        redrawn += int((~ok).sum())
        pending = pending[~ok]
    return sinr, active, redrawn


def _run_block(args):
    cfg, radius, block, n = args
    return _sinr_block(cfg, radius, block, n)


def simulate_sinr(cfg: SimConfig, radius: float | None = None):
    """Per-trial SINR samples in trial order, with active counts and the redraw tally."""
    radius = cfg.radius() if radius is None else radius
    nblocks = -(-cfg.trials // BLOCK_SIZE)
    jobs = [(cfg, radius, b, min(BLOCK_SIZE, cfg.trials - b * BLOCK_SIZE)) for b in range(nblocks)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(_run_block, jobs))
    else:
        parts = [_run_block(j) for j in jobs]
    sinr = np.concatenate([p[0] for p in parts])
    active = np.concatenate([p[1] for p in parts])
    redrawn = sum(p[2] for p in parts)
    return sinr, active, redrawn


def _result(success, active, redrawn, radius, bias):
    n = success.size
    psi = float(success.mean())
    return SimResult(psi_hat=psi, ci_halfwidth=1.96 * math.sqrt(psi * (1 - psi) / n),
                     trials_used=n, mean_active_count=float(active.mean()),
                     redrawn_trials=redrawn, window_radius=radius, truncation_bias=bias)


def estimate_coverage(cfg: SimConfig, with_bias: bool = True) -> SimResult:
    """Fraction of trials with SINR above ``xi`` plus a 95% normal-approximation half-width."""
    radius = cfg.radius()
    sinr, active, redrawn = simulate_sinr(cfg, radius)
    bias = truncation_bias(cfg.env, cfg.topology, radius) if with_bias else float("nan")
    return _result(sinr > cfg.env.xi, active, redrawn, radius, bias)


def coverage_curve(cfg: SimConfig, xis, with_bias: bool = True):
    """Coverage estimates at several thresholds from one shared set of realizations.

    The window radius defaults to the largest radius any threshold needs.
    """
    xis = [float(x) for x in xis]
    if cfg.window_radius is None:
        radius = max(default_window_radius(cfg.env.with_(xi=x), cfg.topology) for x in xis)
    else:
        radius = cfg.window_radius
    sinr, active, redrawn = simulate_sinr(cfg, radius)
    out = []
    for x in xis:
        bias = (truncation_bias(cfg.env.with_(xi=x), cfg.topology, radius)
                if with_bias else float("nan"))
        out.append(_result(sinr > x, active, redrawn, radius, bias))
    return out


def truncated_coverage(env: RadioEnv, top: Topology, radius: float) -> float:
    """Exact coverage seen by the windowed simulator (interference beyond ``radius`` ignored).

    Conditions on at least one active BS in the window. Rayleigh fading gives,
    for a serving distance ``r``, the success probability
    ``exp(-xi*r**alpha*noise) * exp(-2*pi*(lam/beta) * int_r^R y*dy / (1 + y**alpha/(xi*r**alpha)))``.
    """
    lam, p, beta = top.lam, top.p, top.beta
    a, xi = env.alpha, env.xi
    noise = env.sigma2 / (p * beta)
    lam_co = lam / beta

    def inner(r):
        if r >= radius:
            return 0.0
        # t = y/r maps [r, R] onto [1, R/r].
        val, _ = integrate.quad(lambda t: t / (1.0 + t**a / xi), 1.0, radius / r,
                                epsabs=1e-13, epsrel=1e-11, limit=200)
        return r * r * val

    def integrand(r):
        if r == 0.0:
            return 0.0
        return (2 * math.pi * lam * r * math.exp(-math.pi * lam * r * r)
                * math.exp(-xi * r**a * noise - 2 * math.pi * lam_co * inner(r)))

    # Nearest-BS distance is concentrated within a few multiples of 1/sqrt(pi*lam).
    scale = 1.0 / math.sqrt(math.pi * lam)
    pts = [x for x in (scale, 3 * scale) if x < radius]
    val, _ = integrate.quad(integrand, 0.0, radius, points=pts or None,
                            epsabs=1e-12, epsrel=1e-10, limit=400)
    return val / -math.expm1(-math.pi * lam * radius**2)


def truncation_bias(env: RadioEnv, top: Topology, radius: float) -> float:
    """Expected ``psi_hat - psi`` caused by the finite window (non-negative)."""
    return truncated_coverage(env, top, radius) - psi_exact(top, env)


def default_window_radius(env: RadioEnv, top: Topology, rel_bias: float = 1e-3) -> float:
    """Smallest radius (on a coarse 1/R**2 schedule) whose truncation bias is below ``rel_bias*psi``.

    Starts from ``5/sqrt(pi*lam*min(1, 1/beta))``.
    """
    r = 5.0 / math.sqrt(math.pi * top.lam * min(1.0, 1.0 / top.beta))
    target = rel_bias * psi_exact(top, env)
    for _ in range(30):
        b = truncation_bias(env, top, r)
        if b <= target:
            return r
        # The bias decays like 1/R**2.
        r *= max(1.1, 1.05 * math.sqrt(b / target))
    return r
