"""Seeded simulation of the uniformized chain.

Every step consumes a pair of uniforms: the first picks the event (arrival,
service, expiration, end of initialization or a uniformization self-loop),
the second drives the randomization of the scale-up rule. Pairs are read in
order from a numpy ``Generator``, so a path depends only on the stream and
not on how it is cut into chunks or segments.

Random streams are derived with ``SeedSequence(seed, spawn_key=key)``; the
optimizer uses one stream per episode, ``key = (episode,)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .cost import CostWeights, instant_cost
from .model import EMPTY_STATE, ModelParams, StateSpace, SystemState, uniformization_rate
from .policy import PolicySpec, SmoothingSpec, penalty

__all__ = [
    "RngStream",
    "Segment",
    "EpisodeRecord",
    "simulate_segment",
    "run_episode",
    "batch_means",
    "write_trace",
]

CHUNK = 1 << 16
_SIMPLIFIED, _BINOMIAL = 0, 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    key: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


@numba.njit(cache=True)
def _kernel(
    x, N, lam, mu, beta, gam, rate, cancel,
    kind, fl, frac, cdf,
    u_event, u_pol,
    weights, batch, cost_sums, step0,
    lookup, visits, gap,
):
    # x is updated in place; cost_sums[k] accumulates the cost of steps in batch k
    w_rej = weights[4]
    for i in range(u_event.shape[0]):
        x1, x2, x3, x4 = x[0], x[1], x[2], x[3]
        r = u_event[i] * rate
        if r < lam:
            if x1 > 0:
                x[0] = x1 - 1
                x[1] = x2 + 1
            elif x2 + x4 == N:
                pass
            elif N - x1 - x2 - x3 > 0:
                cap = N - x2 - x3 - 1
                v = u_pol[i]
                if kind == _SIMPLIFIED:
                    target = fl + (1 if v < frac else 0)
                    k = target - x3 + x4
                    if k < 0:
                        k = 0
                else:
                    k = 0
                    while k < cdf.shape[0] - 1 and v >= cdf[k]:
                        k += 1
                if k > cap:
                    k = cap
                x[2] = x3 + k + 1
                x[3] = x4 + 1
            else:
                x[3] = x4 + 1
        else:
            r -= lam
            s = mu * x2
            if r < s:
                if x4 == 0:
                    x[0] = x1 + 1
                    x[1] = x2 - 1
                else:
                    x[3] = x4 - 1
                    if cancel:
                        x[2] = x3 - 1
            else:
                r -= s
                s = gam * x1
                if r < s:
                    x[0] = x1 - 1
                else:
                    r -= s
                    s = beta * x3
                    if r < s:
                        x[2] = x3 - 1
                        if x4 > 0:
                            x[1] = x2 + 1
                            x[3] = x4 - 1
                        else:
                            x[0] = x1 + 1
        if batch > 0:
            c = weights[0] * x[0] + weights[1] * x[1] + weights[2] * x[2] + weights[3] * x[3]
            if x[1] + x[3] == N:
                c += w_rej
            cost_sums[(step0 + i) // batch] += c
        if visits.shape[0] > 0:
            visits[lookup[x[0], x[1], x[2], x[3]]] += 1
        d = x[2] - x[3]
        if d > gap[0]:
            gap[0] = d


@dataclass
class Segment:
    """Outcome of :func:`simulate_segment`.

    ``max_init0`` is the largest number of init0 servers (``x3 - x4``) seen
    along the path, start state included.
    """

    final: SystemState
    steps: int
    batch_means: np.ndarray | None = None
    visits: np.ndarray | None = None
    max_init0: int = 0


def _policy_args(policy: PolicySpec):
    if policy.kind == "simplified":
        fl = math.floor(policy.theta)
        return _SIMPLIFIED, fl, policy.theta - fl, _NO_CDF
    ks, pmf = zip(*policy.target_pmf())
    full = np.zeros(max(ks) + 1)
    full[list(ks)] = pmf
    cdf = np.cumsum(full)
    cdf[-1] = np.inf
    return _BINOMIAL, 0, 0.0, cdf


_NO_CDF = np.zeros(1)
_NO_WEIGHTS = np.zeros(5)
_NO_SUMS = np.zeros(0)
_NO_LOOKUP = np.zeros((1, 1, 1, 1), dtype=np.int64)
_NO_VISITS = np.zeros(0, dtype=np.int64)


def _advance(x, policy_args, params, steps, rng, w=_NO_WEIGHTS, batch=0, cost_sums=_NO_SUMS,
             lookup=_NO_LOOKUP, visits=_NO_VISITS, gap=None, uniforms=None):
    """Move the int64 state array ``x`` forward by ``steps`` transitions in place.

    ``uniforms`` optionally supplies a pre-drawn ``(steps, 2)`` array.
    """
    kind, fl, frac, cdf = policy_args
    if gap is None:
        gap = np.zeros(1, dtype=np.int64)
    rate = uniformization_rate(params)
    cancel = params.handoff == "cancel"
    done = 0
    while done < steps:
        n = min(CHUNK, steps - done)
        u = rng.random((n, 2)) if uniforms is None else uniforms[done:done + n]
        _kernel(
            x, params.N, params.lam, params.mu, params.beta, params.gamma_exp, rate, cancel,
            kind, fl, frac, cdf, u[:, 0], u[:, 1],
            w, batch, cost_sums, done, lookup, visits, gap,
        )
        done += n


def simulate_segment(
    x_start,
    policy: PolicySpec,
    params: ModelParams,
    steps: int,
    rng: np.random.Generator,
    *,
    weights: CostWeights | None = None,
    batch_size: int = 0,
    space: StateSpace | None = None,
) -> Segment:
    """Run ``steps`` uniformized transitions from ``x_start``.

    With ``weights`` and ``batch_size`` the mean instant cost of each
    consecutive batch of steps is returned (cost of the state reached after
    each step). With ``space`` the number of visits of every state is tallied.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x_start = SystemState(*x_start)
    if not x_start.is_valid(params.N):
        raise ValueError(f"{x_start} is not a valid state for N={params.N}")

    kw = {}
    if weights is not None and batch_size > 0:
        kw["w"] = np.array([weights.w1, weights.w2, weights.w3, weights.w4, weights.w_rej])
        kw["batch"] = batch_size
        kw["cost_sums"] = np.zeros(-(-steps // batch_size))
    if space is not None:
        kw["lookup"] = space._lookup
        kw["visits"] = np.zeros(len(space), dtype=np.int64)
    x = np.array(x_start, dtype=np.int64)
    gap = np.array([x[2] - x[3]], dtype=np.int64)
    _advance(x, _policy_args(policy), params, steps, rng, gap=gap, **kw)

    means = None
    if "batch" in kw:
        sums = kw["cost_sums"]
        counts = np.full(len(sums), float(batch_size))
        counts[-1] = steps - batch_size * (len(sums) - 1)
        means = sums / counts
    return Segment(
        final=SystemState(*map(int, x)),
        steps=steps,
        batch_means=means,
        visits=kw.get("visits"),
        max_init0=int(gap[0]),
    )


def batch_means(values: np.ndarray, level: float = 0.99) -> tuple[float, float, float]:
    """Mean and two-sided Student-t confidence interval from batch means."""
    from scipy import stats

    values = np.asarray(values, dtype=float)
    k = len(values)
    if k < 2:
        raise ValueError("need at least two batches")
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(k))
    half = float(stats.t.ppf(0.5 + level / 2, k - 1)) * se
    return mean, mean - half, mean + half


@dataclass
class EpisodeRecord:
    n: int
    theta_n: float
    delta_n: float
    tau_n: int
    fhat_plus: float
    fhat_minus: float
    steps_consumed: int
    visit_counts: np.ndarray | None = field(default=None, repr=False)
    final_state: SystemState = EMPTY_STATE

    def as_trace(self) -> dict:
        return {
            "n": self.n,
            "theta": self.theta_n,
            "delta": self.delta_n,
            "tau": self.tau_n,
            "fhat_plus": self.fhat_plus,
            "fhat_minus": self.fhat_minus,
            "steps": self.steps_consumed,
        }


def run_episode(
    n: int,
    theta_n: float,
    delta_n: float,
    tau_n: int,
    K: int,
    policy: PolicySpec,
    params: ModelParams,
    weights: CostWeights,
    smoothing: SmoothingSpec,
    seed: int,
    x_start=EMPTY_STATE,
    *,
    restart: bool = True,
    space: StateSpace | None = None,
    rng: np.random.Generator | None = None,
) -> EpisodeRecord:
    """One episode of the two-sided cost estimate.

    ``K`` segments of ``tau_n`` steps at ``theta_n + delta_n``, then ``K`` at
    ``theta_n - delta_n``. Each estimate is the mean of the penalized cost of
    the segments' terminal states. All segments of episode ``n`` draw, in
    order, from the stream ``(seed, (n,))`` unless a generator ``rng`` is
    passed in.

    With ``restart`` every segment starts at ``x_start``; otherwise segments
    are chained and ``final_state`` is where the last one stopped.
    """
    N = params.N
    if rng is None:
        rng = RngStream(seed, (n,)).generator()
    kw = {}
    if space is not None:
        kw = {"lookup": space._lookup, "visits": np.zeros(len(space), dtype=np.int64)}
    start = np.array(SystemState(*x_start), dtype=np.int64)
    x = start.copy()
    # draw the whole episode at once when it is short
    u = rng.random((2 * K, tau_n, 2)) if 2 * K * tau_n <= CHUNK else None
    fhat = []
    j = 0
    for theta in (theta_n + delta_n, theta_n - delta_n):
        args = _policy_args(policy.with_theta(theta))
        total = 0.0
        for _ in range(K):
            if restart:
                x[:] = start
            _advance(x, args, params, tau_n, rng, uniforms=None if u is None else u[j], **kw)
            j += 1
            total += instant_cost(x.tolist(), weights, N)
        fhat.append(total / K + penalty(theta, smoothing))
    return EpisodeRecord(
        n=n,
        theta_n=theta_n,
        delta_n=delta_n,
        tau_n=tau_n,
        fhat_plus=fhat[0],
        fhat_minus=fhat[1],
        steps_consumed=2 * K * tau_n,
        visit_counts=kw.get("visits"),
        final_state=SystemState(*map(int, x)),
    )


def write_trace(records, path) -> None:
    """JSON-lines trace, one object per episode."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.as_trace()) + "\n")
