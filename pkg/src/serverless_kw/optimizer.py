"""Kiefer-Wolfowitz search for the reserve that minimizes the long-run cost.

:func:`run_kw` waits ``tau_n = tau * log(n + 1)`` steps before every cost
sample so the samples are close to stationary. :func:`run_fast_update` is the
baseline that updates after a fixed, short number of transitions of one
continuing trajectory.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .cost import CostWeights
from .model import EMPTY_STATE, ModelParams, StateSpace, SystemState
from .policy import PolicySpec, SmoothingSpec
from .simulator import EpisodeRecord, RngStream, run_episode

__all__ = [
    "Schedules",
    "Trajectory",
    "kw_step",
    "run_kw",
    "run_fast_update",
    "write_trajectory_csv",
    "write_replication_csv",
    "oscillation_flag",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Schedules:
    """Step size ``gamma0 / n**gamma_power``, probe ``delta0 / n**delta_power``
    and segment length ``tau_n``.

    ``tau_mode="log"`` gives ``tau_n = max(1, floor(tau * log(n + 1)))``;
    ``tau_mode="const"`` gives ``tau_n = max(1, floor(tau))``.
    """

    gamma0: float = 10.0
    gamma_power: float = 1.0
    delta0: float = 1.0
    delta_power: float = 2 / 3
    tau: float = 1e6
    tau_mode: str = "log"
    K: int = 2
    T: float = 1e8

    def __post_init__(self):
        if self.tau_mode not in ("log", "const"):
            raise ValueError(f"tau_mode must be 'log' or 'const', got {self.tau_mode!r}")
        if not (self.gamma0 >= 0 and self.delta0 > 0 and self.tau >= 1 and self.T > 0):
            raise ValueError("need gamma0 >= 0, delta0 > 0, tau >= 1 and T > 0")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        self.check_monotone()
        if not self.summable():
            warnings.warn(
                "sum of gamma_n**2 / delta_n**2 diverges for these schedules; "
                "the noise of the iterates is not averaged out asymptotically",
                stacklevel=3,
            )

    def gamma(self, n):
        if isinstance(n, int):
            return self.gamma0 / n**self.gamma_power
        return self.gamma0 / np.power(n, self.gamma_power)

    def delta(self, n):
        if isinstance(n, int):
            return self.delta0 / n**self.delta_power
        return self.delta0 / np.power(n, self.delta_power)

    def tau_n(self, n: int) -> int:
        if self.tau_mode == "const":
            return max(1, int(self.tau))
        return max(1, int(math.floor(self.tau * math.log(n + 1))))

    def check_monotone(self, n_max: int = 10**6) -> None:
        """gamma_n, delta_n and gamma_n / delta_n must be nonincreasing."""
        if self.gamma0 == 0:
            return
        if not (self.gamma_power > 0 and self.delta_power > 0 and self.gamma_power >= self.delta_power):
            raise ValueError(
                "gamma_n, delta_n and gamma_n/delta_n must decrease: "
                "need gamma_power >= delta_power > 0"
            )
        n = np.arange(1, n_max + 1, dtype=float)
        for name, seq in (
            ("gamma_n", self.gamma(n)),
            ("delta_n", self.delta(n)),
            ("gamma_n/delta_n", self.gamma(n) / self.delta(n)),
        ):
            if np.any(np.diff(seq) > 0):
                raise ValueError(f"{name} is not decreasing")

    def summable(self) -> bool:
        """Whether sum gamma_n = inf and sum gamma_n**2 / delta_n**2 < inf."""
        return self.gamma_power <= 1 and 2 * (self.gamma_power - self.delta_power) > 1


@dataclass
class Trajectory:
    """Iterates of one run.

    Row ``i`` holds the episode count ``n``, the simulation steps ``t`` spent so
    far and the parameter after ``n`` updates; row 0 is the start point.
    """

    n: list[int] = field(default_factory=list)
    t: list[int] = field(default_factory=list)
    theta: list[float] = field(default_factory=list)
    seed: int = 0
    config: dict = field(default_factory=dict)
    episodes: list[EpisodeRecord] = field(default_factory=list, repr=False)

    def append(self, n: int, t: int, theta: float) -> None:
        self.n.append(n)
        self.t.append(t)
        self.theta.append(theta)

    @property
    def theta_final(self) -> float:
        return self.theta[-1]

    def clamped(self, lo: float, hi: float) -> np.ndarray:
        return np.clip(np.asarray(self.theta), lo, hi)


def kw_step(theta_n: float, gamma_n: float, delta_n: float, fhat_plus: float, fhat_minus: float) -> float:
    if not delta_n > 0:
        raise ValueError("delta_n must be positive")
    return theta_n - gamma_n * (fhat_plus - fhat_minus) / (2 * delta_n)


def _loop(
    theta0, schedules, params, weights, smoothing, policy_kind, seed,
    *, tau_of, gamma_scale, restart, x_start, keep_episodes, space,
):
    # a continuing run draws from a single stream; restarted segments get one per episode
    run_rng = None if restart else RngStream(seed).generator()
    policy = PolicySpec(policy_kind, float(theta0), smoothing if policy_kind == "binomial" else None)
    traj = Trajectory(seed=seed)
    traj.append(0, 0, float(theta0))
    theta, t, n = float(theta0), 0, 1
    x = SystemState(*x_start)
    while t <= schedules.T:
        tau = tau_of(n)
        rec = run_episode(
            n, theta, float(schedules.delta(n)), tau, schedules.K, policy, params,
            weights, smoothing, seed, x_start if restart else x,
            restart=restart, space=space, rng=run_rng,
        )
        theta = kw_step(theta, gamma_scale * float(schedules.gamma(n)), rec.delta_n, rec.fhat_plus, rec.fhat_minus)
        if not math.isfinite(theta):
            raise FloatingPointError(f"theta diverged at episode {n}: {rec}")
        x = rec.final_state
        t += rec.steps_consumed
        traj.append(n, t, theta)
        if keep_episodes:
            traj.episodes.append(rec)
        n += 1
    return traj


def _snapshot(**kw) -> dict:
    out = {}
    for k, v in kw.items():
        out[k] = asdict(v) if hasattr(v, "__dataclass_fields__") else v
    return out


def run_kw(
    theta0: float,
    schedules: Schedules,
    params: ModelParams,
    weights: CostWeights,
    smoothing: SmoothingSpec,
    *,
    policy_kind: str = "simplified",
    seed: int = 0,
    x_start=EMPTY_STATE,
    keep_episodes: bool = False,
    space: StateSpace | None = None,
) -> Trajectory:
    """Non-stationary Kiefer-Wolfowitz iteration until ``T`` steps are spent.

    Every segment restarts from ``x_start``. The penalty of ``smoothing`` is
    added to each observed cost.
    """
    traj = _loop(
        theta0, schedules, params, weights, smoothing, policy_kind, seed,
        tau_of=schedules.tau_n, gamma_scale=1.0, restart=True, x_start=x_start,
        keep_episodes=keep_episodes, space=space,
    )
    traj.config = _snapshot(
        algorithm="kw", theta0=theta0, schedules=schedules, params=params,
        weights=weights, smoothing=smoothing, policy_kind=policy_kind,
    )
    return traj


def run_fast_update(
    theta0: float,
    schedules: Schedules,
    params: ModelParams,
    weights: CostWeights,
    smoothing: SmoothingSpec,
    update_every: int,
    gamma_scale: float = 1.0,
    *,
    policy_kind: str = "simplified",
    seed: int = 0,
    x_start=EMPTY_STATE,
    keep_episodes: bool = False,
) -> Trajectory:
    """Baseline: update after every ``update_every`` transitions of one run.

    The estimator has the same shape as in :func:`run_kw` (``K`` samples per
    side) but segments are chained, so the chain is never restarted and never
    given time to approach stationarity. ``gamma_scale`` multiplies the step
    sizes; ``update_every / tau`` makes the per-step drift comparable to
    :func:`run_kw`.
    """
    if update_every < 1:
        raise ValueError("update_every must be >= 1")
    traj = _loop(
        theta0, schedules, params, weights, smoothing, policy_kind, seed,
        tau_of=lambda n: int(update_every), gamma_scale=gamma_scale, restart=False,
        x_start=x_start, keep_episodes=keep_episodes, space=None,
    )
    traj.config = _snapshot(
        algorithm="fast", theta0=theta0, schedules=schedules, params=params,
        weights=weights, smoothing=smoothing, policy_kind=policy_kind,
        update_every=update_every, gamma_scale=gamma_scale,
    )
    return traj


def oscillation_flag(traj: Trajectory, N: int) -> bool:
    """True when the reported trajectory swings over the whole range ``[0, N]``.

    Reported values are clamped to ``[-N, 2N]``.
    """
    th = traj.clamped(-N, 2 * N)
    return bool(th.max() - th.min() >= N)


def write_trajectory_csv(traj: Trajectory, path, clamp: tuple[float, float] | None = None) -> None:
    """CSV with columns ``n,t,theta`` (plus ``theta_raw`` when clamping)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        if clamp is None:
            wr.writerow(["n", "t", "theta"])
            for row in zip(traj.n, traj.t, traj.theta):
                wr.writerow([row[0], row[1], repr(row[2])])
        else:
            wr.writerow(["n", "t", "theta", "theta_raw"])
            for n, t, th, cl in zip(traj.n, traj.t, traj.theta, traj.clamped(*clamp)):
                wr.writerow([n, t, repr(float(cl)), repr(th)])


def write_replication_csv(rows, path) -> None:
    """Rows of ``(seed, theta_final, abs_err, msq_n_scaled)``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["seed", "theta_final", "abs_err", "msq_n_scaled"])
        for seed, th, err, msq in rows:
            wr.writerow([seed, repr(th), repr(err), repr(msq)])
