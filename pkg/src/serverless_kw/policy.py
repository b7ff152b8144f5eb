"""Scale-up rules: how many extra (init0) servers an unfortunate job spawns.

Two rules are available.

``simplified``
    Keep an average reserve of ``theta`` init0 servers: spawn
    ``floor(theta) + 1{V < frac(theta)} - (x3 - x4)`` extra servers, clipped to
    ``[0, N - x2 - x3 - 1]``.

``binomial``
    Spawn ``Binomial(ceil(M), theta_eps_M / ceil(M))`` extra servers, where
    ``theta_eps_M`` squashes the real line smoothly into ``(0, M)``. The draw is
    clipped to the number of cold servers left after the bound server.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import stats

__all__ = [
    "SmoothingSpec",
    "PolicySpec",
    "smooth_step",
    "smooth_param",
    "simplified_rule",
    "binomial_rule",
    "pi_distribution",
    "penalty",
]

POLICY_KINDS = ("simplified", "binomial")
_TINY = np.nextafter(0.0, 1.0)


@dataclass(frozen=True)
class SmoothingSpec:
    epsilon: float = 0.5
    M: float = 10.0

    def __post_init__(self):
        if not (0 < self.epsilon < self.M / 2):
            raise ValueError(
                f"need 0 < epsilon < M/2, got epsilon={self.epsilon}, M={self.M}"
            )

    def check_capacity(self, N: int) -> None:
        if not self.M < N:
            raise ValueError(f"truncation bound M={self.M} must be below N={N}")

    @classmethod
    def default_for(cls, N: int) -> "SmoothingSpec":
        return cls(epsilon=0.5, M=N / 2)


@dataclass(frozen=True)
class PolicySpec:
    """A scale-up rule with its reserve parameter ``theta``."""

    kind: str = "simplified"
    theta: float = 0.0
    smoothing: SmoothingSpec | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta!r}")
        if self.kind == "binomial" and self.smoothing is None:
            raise ValueError("binomial policy needs a SmoothingSpec")
        if self.kind == "simplified" and self.smoothing is not None:
            raise ValueError("simplified policy takes no SmoothingSpec")

    def with_theta(self, theta: float) -> "PolicySpec":
        return PolicySpec(self.kind, float(theta), self.smoothing)

    @cached_property
    def _targets(self) -> tuple[tuple[int, float], ...]:
        if self.kind == "simplified":
            fl = math.floor(self.theta)
            frac = self.theta - fl
            pairs = [(fl, 1.0 - frac), (fl + 1, frac)]
        else:
            trials = math.ceil(self.smoothing.M)
            p = smooth_param(self.theta, self.smoothing) / trials
            pmf = stats.binom.pmf(np.arange(trials + 1), trials, p)
            pairs = list(zip(range(trials + 1), pmf.tolist()))
        return tuple((k, w) for k, w in pairs if w > 0)

    def target_pmf(self) -> tuple[tuple[int, float], ...]:
        """Pmf of the state-independent part of the rule.

        For ``simplified`` this is the randomized reserve target
        ``floor(theta) + Bernoulli(frac)``; for ``binomial`` the raw binomial
        draw. :func:`pi_distribution` turns it into the number of servers.
        """
        return self._targets


def smooth_step(a: float, b: float, x):
    """C-infinity step from 0 (left of ``a``) to 1 (right of ``b``)."""
    if not a < b:
        raise ValueError(f"smooth_step needs a < b, got a={a}, b={b}")
    if isinstance(x, (int, float)):
        if x >= b:
            return 1.0
        if x <= a:
            return 0.0
        return math.exp(-((b - x) ** 2) / (x - a))
    x = np.asarray(x, dtype=float)
    out = np.where(x >= b, 1.0, 0.0)
    mid = (x > a) & (x < b)
    if mid.any():
        xm = x[mid]
        with np.errstate(over="ignore"):
            out[mid] = np.exp(-((b - xm) ** 2) / (xm - a))
    return out if out.ndim else float(out)


def smooth_param(theta, spec: SmoothingSpec):
    """Smooth map of ``theta`` into ``(0, M)``, identity on ``[eps, M - eps]``."""
    eps, M = spec.epsilon, spec.M
    t = np.asarray(theta, dtype=float)
    with np.errstate(over="ignore"):
        h_lo = (eps / 3) * np.exp(np.minimum(t, M) / eps)
        h_hi = M - (eps / 3) * np.exp(-(np.maximum(t, 0.0) - M) / eps)
    s_lo = smooth_step(0.0, eps, t)
    s_hi = smooth_step(M - eps, M, t)
    out = np.select(
        [t < 0, t <= eps, t < M - eps, t <= M],
        [h_lo, h_lo * (1 - s_lo) + t * s_lo, t, t * (1 - s_hi) + h_hi * s_hi],
        default=h_hi,
    )
    # the tails underflow to exactly 0 or M in double precision
    out = np.clip(out, _TINY, np.nextafter(M, 0.0))
    return out if out.ndim else float(out)


def simplified_rule(x, theta: float, V: float, N: int) -> int:
    """Number of extra servers for an arrival finding no idle-on server."""
    _, x2, x3, x4 = x
    fl = math.floor(theta)
    target = fl + (1 if V < theta - fl else 0)
    cap = max(N - x2 - x3 - 1, 0)
    return int(min(max(target - x3 + x4, 0), cap))


def binomial_rule(theta: float, spec: SmoothingSpec, rng: np.random.Generator, size=None):
    """Draw ``Binomial(ceil(M), theta_eps_M / ceil(M))``; an array when ``size`` is given."""
    trials = math.ceil(spec.M)
    draw = rng.binomial(trials, smooth_param(theta, spec) / trials, size=size)
    return int(draw) if size is None else draw


def pi_distribution(x, policy: PolicySpec, N: int) -> dict[int, float]:
    """Exact pmf of the number of extra servers spawned in state ``x``."""
    _, x2, x3, x4 = x
    cap = max(N - x2 - x3 - 1, 0)
    pmf: dict[int, float] = {}
    for target, w in policy.target_pmf():
        if policy.kind == "simplified":
            k = min(max(target - x3 + x4, 0), cap)
        else:
            k = min(target, cap)
        pmf[k] = pmf.get(k, 0.0) + w
    return pmf


def penalty(theta, spec: SmoothingSpec):
    """Quadratic penalty, zero on ``[eps, M - eps]``."""
    eps, M = spec.epsilon, spec.M
    if isinstance(theta, (int, float)):
        if eps <= theta <= M - eps:
            return 0.0
        theta = float(theta)
        return (1 - smooth_step(0.0, eps, theta)) * (theta - eps) ** 2 + smooth_step(
            M - eps, M, theta
        ) * (theta - M + eps) ** 2
    t = np.asarray(theta, dtype=float)
    out = (1 - smooth_step(0.0, eps, t)) * (t - eps) ** 2 + smooth_step(
        M - eps, M, t
    ) * (t - M + eps) ** 2
    return out if np.ndim(out) else float(out)
