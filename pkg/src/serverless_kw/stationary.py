"""Exact long-run cost from the stationary distribution of the generator.

This is the ground truth against which the simulator and the optimizer are
checked: ``c(theta) = sum_x C(x) m_theta(x)``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import breadth_first_order

from .cost import CostWeights, cost_vector
from .model import ModelParams, StateSpace, build_generator, uniformization_rate
from .policy import PolicySpec

__all__ = [
    "SolverError",
    "UnimodalityError",
    "StationarySolution",
    "reachable_states",
    "solve_stationary",
    "expected_cost",
    "CostOracle",
    "SweepPoint",
    "sweep",
    "write_sweep_csv",
    "fd_derivative",
    "locate_minimum",
]

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
POWER_MAX_ITER = 1_000_000


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class UnimodalityError(ValueError):
    pass


@dataclass
class StationarySolution:
    m: np.ndarray
    residual: float
    iterations: int
    n_reachable: int = 0

    def expectation(self, values: np.ndarray) -> float:
        return float(values @ self.m)


def reachable_states(Q: sp.spmatrix, start: int = 0) -> np.ndarray:
    """Sorted indices reachable from ``start`` through positive rates."""
    order = breadth_first_order(Q, start, directed=True, return_predecessors=False)
    return np.sort(order)


def _residual(m: np.ndarray, Q: sp.spmatrix) -> float:
    return float(np.abs(Q.T @ m).max()) if Q.shape[0] else 0.0


def _solve_direct(Qr: sp.csr_matrix) -> np.ndarray:
    # Pin the first component to 1 and solve the remaining balance equations.
    A = Qr.T.tocsc()
    rhs = -np.asarray(A[1:, 0].todense()).ravel()
    x = spla.spsolve(A[1:, 1:].tocsc(), rhs, permc_spec="MMD_AT_PLUS_A")
    m = np.concatenate([[1.0], np.atleast_1d(x)])
    return m / m.sum()


def _solve_power(Qr: sp.csr_matrix, rate: float, tol: float, max_iter: int, m0=None):
    S = Qr.shape[0]
    PT = (sp.identity(S, format="csr") + Qr / rate).T.tocsr()
    m = np.full(S, 1.0 / S) if m0 is None else m0.copy()
    check_every = 100
    for it in range(1, max_iter + 1):
        m = PT @ m
        if it % check_every == 0 or it == max_iter:
            m /= m.sum()
            # residual of m Q equals rate * |m P - m|
            if _residual(m, Qr) < tol:
                return m, it
    return m, max_iter


def solve_stationary(
    Q: sp.spmatrix,
    space: StateSpace | None = None,
    *,
    method: str = "direct",
    rate: float | None = None,
    tol: float = RESIDUAL_TOL,
    max_iter: int = POWER_MAX_ITER,
) -> StationarySolution:
    """Stationary distribution of generator ``Q`` restricted to the class of state 0.

    States unreachable from state 0 (the empty platform) get mass zero.

    Parameters
    ----------
    method : {"direct", "power"}
        ``direct`` solves the balance equations with a sparse LU factorization
        and falls back to power iteration if the residual is above ``tol``.
        ``power`` iterates the uniformized kernel until the residual target.
    rate : float, optional
        Uniformization rate for power iteration; defaults to the largest
        outflow rate.
    """
    Q = sp.csr_matrix(Q)
    S = Q.shape[0]
    if space is not None and len(space) != S:
        raise ValueError("generator and state space sizes differ")
    keep = reachable_states(Q)
    Qr = Q[keep][:, keep].tocsr()
    if rate is None:
        rate = float(-Qr.diagonal().min()) if len(keep) else 1.0
        rate = rate if rate > 0 else 1.0

    iterations = 0
    if len(keep) == 1:
        mr = np.ones(1)
    elif method == "direct":
        mr = _solve_direct(Qr)
        if not (np.all(np.isfinite(mr)) and _residual(mr, Qr) < tol):
            log.warning("direct solve missed the residual target, polishing by power iteration")
            mr, iterations = _solve_power(Qr, rate, tol, max_iter, np.clip(np.nan_to_num(mr), 0, None))
    elif method == "power":
        mr, iterations = _solve_power(Qr, rate, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")

    mr = np.clip(mr, 0.0, None)
    mr /= mr.sum()
    res = _residual(mr, Qr)
    if not res < tol:
        raise SolverError("stationary solve did not converge", res)
    m = np.zeros(S)
    m[keep] = mr
    return StationarySolution(m=m, residual=res, iterations=iterations, n_reachable=len(keep))


class CostOracle:
    """Evaluates ``c(theta)`` for a fixed model, cost and policy family.

    The state space and cost vector are built once and shared by every
    evaluation. Results are memoized by ``theta``.
    """

    def __init__(
        self,
        params: ModelParams,
        weights: CostWeights,
        policy: PolicySpec | None = None,
        *,
        method: str = "direct",
    ):
        self.params = params
        self.weights = weights
        self.policy = policy or PolicySpec()
        self.method = method
        self.space = StateSpace(params.N)
        self.costs = cost_vector(self.space.states, weights, params.N)
        self._cache: dict[float, StationarySolution] = {}

    def solve(self, theta: float) -> StationarySolution:
        theta = float(theta)
        if theta not in self._cache:
            Q = build_generator(self.policy.with_theta(theta), self.params, self.space)
            self._cache[theta] = solve_stationary(
                Q, self.space, method=self.method, rate=uniformization_rate(self.params)
            )
        return self._cache[theta]

    def __call__(self, theta: float) -> float:
        return self.solve(theta).expectation(self.costs)


def expected_cost(
    theta: float,
    params: ModelParams,
    weights: CostWeights,
    policy: PolicySpec | None = None,
) -> float:
    return CostOracle(params, weights, policy)(theta)


@dataclass
class SweepPoint:
    theta: float
    cost: float
    residual: float
    states: int
    iterations: int
    error: str | None = field(default=None)


def sweep(theta_grid: Iterable[float], oracle: CostOracle) -> list[SweepPoint]:
    """Evaluate the oracle on a grid; failed points are kept with ``cost=nan``."""
    grid = [float(t) for t in theta_grid]
    if not grid:
        raise ValueError("empty theta grid")
    points = []
    for theta in grid:
        try:
            sol = oracle.solve(theta)
        except SolverError as exc:
            log.error("theta=%g: %s", theta, exc)
            points.append(SweepPoint(theta, math.nan, exc.residual, 0, 0, str(exc)))
            continue
        points.append(
            SweepPoint(theta, sol.expectation(oracle.costs), sol.residual, sol.n_reachable, sol.iterations)
        )
    return points


def write_sweep_csv(points: list[SweepPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["theta", "cost", "residual", "states", "iterations"])
        for p in points:
            wr.writerow([repr(p.theta), repr(p.cost), f"{p.residual:.6e}", p.states, p.iterations])


def fd_derivative(f: Callable[[float], float], theta: float, h: float = 1e-3) -> float:
    if not h > 0:
        raise ValueError("h must be positive")
    return (f(theta + h) - f(theta - h)) / (2 * h)


_INVPHI = (math.sqrt(5) - 1) / 2


def locate_minimum(
    f: Callable[[float], float], bracket: tuple[float, float], tol: float = 1e-3
) -> tuple[float, float]:
    """Golden-section search for the minimum of ``f`` on ``[lo, hi]``.

    The bracket is checked at its two golden points first; if an end point is
    lower than both interior points the function is not unimodal on it.
    """
    a, b = map(float, bracket)
    if not a < b:
        raise ValueError(f"bad bracket {bracket}")
    fa, fb = f(a), f(b)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    if min(fa, fb) < min(fc, fd):
        raise UnimodalityError(
            f"not unimodal on bracket: f({a})={fa}, f({c})={fc}, f({d})={fd}, f({b})={fb}"
        )
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    theta = (a + b) / 2
    return theta, f(theta)
