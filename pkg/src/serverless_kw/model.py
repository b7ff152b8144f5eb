"""Controlled Markov chain of the scale-per-request platform.

A state ``(x1, x2, x3, x4)`` counts idle-on, busy, initializing (init0 and
init1 together) and init1 servers. Init1 servers are bound to a waiting job,
so ``x4`` is also the number of blocked jobs. Servers not counted in
``x1 + x2 + x3`` are cold.

The module offers two routes to the transition structure:

* :func:`out_transitions` lists the outgoing transitions of a single state and
  is meant for reading, testing and small chains;
* :func:`build_generator` assembles the whole sparse generator with numpy
  array arithmetic and is what the stationary solver uses.

The two are cross-checked in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .policy import PolicySpec, pi_distribution

__all__ = [
    "SystemState",
    "ModelParams",
    "StateSpace",
    "EMPTY_STATE",
    "enumerate_states",
    "out_transitions",
    "uniformization_rate",
    "dtmc_row",
    "build_generator",
]


class SystemState(NamedTuple):
    x1: int
    x2: int
    x3: int
    x4: int

    def cold(self, N: int) -> int:
        return N - self.x1 - self.x2 - self.x3

    def is_valid(self, N: int) -> bool:
        return (
            min(self) >= 0
            and self.x1 + self.x2 + self.x3 <= N
            and self.x4 <= self.x3
        )


EMPTY_STATE = SystemState(0, 0, 0, 0)
HANDOFFS = ("release", "cancel")


@dataclass(frozen=True)
class ModelParams:
    """Rates and capacity of the chain.

    ``gamma_exp`` is the expiration rate of idle-on servers (named so it does
    not collide with the optimizer step sizes).

    ``handoff`` says what happens to the init1 server of a blocked job that a
    finishing busy server picks up: with ``"cancel"`` (default) it goes back
    to cold, with ``"release"`` it keeps initializing as an init0 server.
    Only ``"cancel"`` keeps ``x3 == x4`` forever when no reserve is requested.
    """

    lam: float
    mu: float
    beta: float
    gamma_exp: float
    N: int
    handoff: str = "cancel"

    def __post_init__(self):
        for name in ("lam", "mu", "beta", "gamma_exp"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite rate, got {value!r}")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError(f"N must be a nonnegative integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.handoff not in HANDOFFS:
            raise ValueError(f"handoff must be one of {HANDOFFS}, got {self.handoff!r}")


class StateSpace:
    """All valid states for capacity ``N`` in lexicographic order.

    ``states`` is an ``(S, 4)`` int array; ``index_of`` maps a state to its row.
    A dense ``(N+1)^4`` lookup table backs the vectorized index computation.
    """

    def __init__(self, N: int):
        self.N = int(N)
        n1 = self.N + 1
        grid = []
        for x1 in range(n1):
            for x2 in range(n1 - x1):
                for x3 in range(n1 - x1 - x2):
                    for x4 in range(x3 + 1):
                        grid.append((x1, x2, x3, x4))
        self.states = np.array(grid, dtype=np.int64).reshape(-1, 4)
        self._lookup = np.full((n1, n1, n1, n1), -1, dtype=np.int64)
        self._lookup[tuple(self.states.T)] = np.arange(len(self.states))
        self.states.setflags(write=False)
        self._lookup.setflags(write=False)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return (SystemState(*map(int, row)) for row in self.states)

    def __getitem__(self, i: int) -> SystemState:
        return SystemState(*map(int, self.states[i]))

    def index_of(self, x) -> int:
        i = int(self._lookup[tuple(x)])
        if i < 0:
            raise KeyError(f"{tuple(x)} is not a valid state for N={self.N}")
        return i

    def indices(self, arr: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`index_of` for an ``(n, 4)`` int array."""
        idx = self._lookup[arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]]
        assert (idx >= 0).all(), "transition left the state space"
        return idx


def enumerate_states(N: int) -> StateSpace:
    return StateSpace(N)


def out_transitions(x, policy: PolicySpec, params: ModelParams) -> list[tuple[float, SystemState]]:
    """Outgoing ``(rate, next_state)`` pairs of state ``x``.

    Rates of zero are omitted. A rejected arrival appears as a self-loop so the
    list accounts for the full arrival rate.
    """
    x = SystemState(*x)
    N = params.N
    if not x.is_valid(N):
        raise ValueError(f"{x} is not a valid state for N={N}")
    x1, x2, x3, x4 = x
    lam, mu, beta, gam = params.lam, params.mu, params.beta, params.gamma_exp
    out: list[tuple[float, SystemState]] = []

    if x1 > 0:
        out.append((lam, SystemState(x1 - 1, x2 + 1, x3, x4)))
    elif x2 + x4 == N:
        out.append((lam, x))
    elif x.cold(N) > 0:
        for k, p in pi_distribution(x, policy, N).items():
            if p > 0:
                out.append((lam * p, SystemState(x1, x2, x3 + k + 1, x4 + 1)))
    else:
        # no cold server left: the job binds an existing init0 server
        out.append((lam, SystemState(x1, x2, x3, x4 + 1)))

    if x2 > 0:
        if x4 == 0:
            out.append((mu * x2, SystemState(x1 + 1, x2 - 1, x3, x4)))
        else:
            freed = 1 if params.handoff == "cancel" else 0
            out.append((mu * x2, SystemState(x1, x2, x3 - freed, x4 - 1)))
    if x1 > 0:
        out.append((gam * x1, SystemState(x1 - 1, x2, x3, x4)))
    if x3 > 0:
        if x4 > 0:
            out.append((beta * x3, SystemState(x1, x2 + 1, x3 - 1, x4 - 1)))
        else:
            out.append((beta * x3, SystemState(x1 + 1, x2, x3 - 1, x4)))
    return out


def uniformization_rate(params: ModelParams) -> float:
    """Uniform bound on the total outflow rate of every state."""
    return params.lam + params.N * (params.mu + params.beta + params.gamma_exp)


def dtmc_row(x, policy: PolicySpec, params: ModelParams) -> dict[SystemState, float]:
    """One row of the uniformized kernel ``P = I + Q / rate``."""
    x = SystemState(*x)
    rate = uniformization_rate(params)
    row: dict[SystemState, float] = {}
    total = 0.0
    for r, y in out_transitions(x, policy, params):
        if y != x:
            row[y] = row.get(y, 0.0) + r / rate
            total += r
    stay = 1.0 - total / rate
    assert stay >= -1e-12, f"uniformization bound violated at {x}"
    row[x] = row.get(x, 0.0) + max(stay, 0.0)
    return row


def _arrival_pi_pmf(policy: PolicySpec, x: np.ndarray, N: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Vectorized pmf of the number of extra servers for arrival states.

    Returns ``(pi_values, weights)`` pairs; each pair is one branch of the
    randomization applied to every row of ``x``.
    """
    x2, x3, x4 = x[:, 1], x[:, 2], x[:, 3]
    cap = N - x2 - x3 - 1
    branches = []
    for target, w in policy.target_pmf():
        if policy.kind == "simplified":
            pi = np.minimum(np.maximum(target - x3 + x4, 0), cap)
        else:
            pi = np.minimum(target, cap)
        branches.append((pi, np.full(len(x), w)))
    return branches


def build_generator(policy: PolicySpec, params: ModelParams, space: StateSpace | None = None) -> sp.csr_matrix:
    """Sparse generator of the chain with the policy randomization marginalized."""
    N = params.N
    if space is None:
        space = StateSpace(N)
    if space.N != N:
        raise ValueError("state space capacity does not match params.N")
    X = space.states
    idx = np.arange(len(space))
    x1, x2, x3, x4 = X.T
    rows, cols, vals = [], [], []

    def add(mask, delta, rate):
        if not mask.any():
            return
        src = X[mask]
        dst = src + np.asarray(delta, dtype=np.int64)
        rows.append(idx[mask])
        cols.append(space.indices(dst))
        vals.append(np.broadcast_to(rate, mask.shape)[mask].astype(float))

    lam, mu, beta, gam = params.lam, params.mu, params.beta, params.gamma_exp
    cold = N - x1 - x2 - x3

    add(x1 > 0, (-1, 1, 0, 0), lam)
    spawn = (x1 == 0) & (cold > 0)
    if spawn.any():
        src = X[spawn]
        for pi, w in _arrival_pi_pmf(policy, src, N):
            keep = w > 0
            dst = src[keep].copy()
            dst[:, 2] += pi[keep] + 1
            dst[:, 3] += 1
            rows.append(idx[spawn][keep])
            cols.append(space.indices(dst))
            vals.append(lam * w[keep])
    add((x1 == 0) & (cold == 0) & (x3 > x4), (0, 0, 0, 1), lam)

    add((x2 > 0) & (x4 == 0), (1, -1, 0, 0), mu * x2)
    freed = 1 if params.handoff == "cancel" else 0
    add((x2 > 0) & (x4 > 0), (0, 0, -freed, -1), mu * x2)
    add(x1 > 0, (-1, 0, 0, 0), gam * x1)
    add((x3 > 0) & (x4 > 0), (0, 1, -1, -1), beta * x3)
    add((x3 > 0) & (x4 == 0), (1, 0, -1, 0), beta * x3)

    r = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    c = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    v = np.concatenate(vals) if vals else np.empty(0)
    off = r != c
    S = len(space)
    Q = sp.coo_matrix((v[off], (r[off], c[off])), shape=(S, S)).tocsr()
    Q.sum_duplicates()
    out_rate = np.asarray(Q.sum(axis=1)).ravel()
    Q = (Q - sp.diags(out_rate)).tocsr()
    Q.sort_indices()
    return Q
