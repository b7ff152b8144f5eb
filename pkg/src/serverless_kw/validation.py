"""Invariant checks run by the ``validate`` command.

Every check returns a :class:`Check` with a name, a pass flag and the
measured quantities, so the report can be written as JSON.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .cost import CostWeights, cost_vector
from .model import (
    EMPTY_STATE,
    ModelParams,
    StateSpace,
    build_generator,
    dtmc_row,
    out_transitions,
)
from .policy import PolicySpec, SmoothingSpec, penalty, pi_distribution, smooth_param, smooth_step
from .simulator import RngStream, simulate_segment
from .stationary import CostOracle, solve_stationary

__all__ = ["Check", "brute_force_count", "run_validation"]

MAX_N = 6


@dataclass
class Check:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "measured": self.measured}


def brute_force_count(N: int) -> int:
    """Number of valid states, counted without the enumeration code."""
    return sum(
        x3 + 1
        for x1 in range(N + 1)
        for x2 in range(N + 1 - x1)
        for x3 in range(N + 1 - x1 - x2)
    )


def _policies(N: int):
    yield PolicySpec("simplified", 0.0)
    yield PolicySpec("simplified", 1.5)
    yield PolicySpec("simplified", 3.7)
    if N >= 3:
        yield PolicySpec("binomial", 1.5, SmoothingSpec(0.5, N / 2))


def _check_state_counts() -> Check:
    counts = {N: (len(StateSpace(N)), brute_force_count(N)) for N in range(MAX_N + 1)}
    n1 = [tuple(x) for x in StateSpace(1)]
    ok = all(a == b for a, b in counts.values()) and n1 == [
        (0, 0, 0, 0), (0, 0, 1, 0), (0, 0, 1, 1), (0, 1, 0, 0), (1, 0, 0, 0)
    ]
    return Check("state_space_size", ok, {"counts": {str(k): v[0] for k, v in counts.items()}})


def _check_transitions(base: ModelParams) -> list[Check]:
    bad = 0
    row_err = 0.0
    neg_off = 0.0
    mismatch = 0.0
    dtmc_err = 0.0
    min_stay = 1.0
    for N in range(MAX_N + 1):
        params = replace(base, N=N)
        space = StateSpace(N)
        for policy in _policies(N):
            Q = build_generator(policy, params, space)
            row_err = max(row_err, float(np.abs(np.asarray(Q.sum(axis=1))).max()))
            off = Q - sp.diags(Q.diagonal())
            if off.nnz:
                neg_off = min(neg_off, float(off.data.min()))
            dense = Q.toarray() if N <= 4 else None
            for i, x in enumerate(space):
                out = out_transitions(x, policy, params)
                bad += sum(not y.is_valid(N) or r < 0 for r, y in out)
                row = dtmc_row(x, policy, params)
                dtmc_err = max(dtmc_err, abs(sum(row.values()) - 1.0))
                min_stay = min(min_stay, row[x])
                if dense is not None:
                    ref = np.zeros(len(space))
                    for r, y in out:
                        if y != x:
                            ref[space.index_of(y)] += r
                    ref[i] = -ref.sum()
                    mismatch = max(mismatch, float(np.abs(ref - dense[i]).max()))
    return [
        Check("transitions_stay_in_space", bad == 0, {"violations": bad}),
        Check("generator_row_sums", row_err < 1e-12, {"max_abs_row_sum": row_err}),
        Check("generator_offdiag_nonneg", neg_off >= 0, {"min_offdiag": neg_off}),
        Check("generator_matches_transitions", mismatch < 1e-12, {"max_abs_diff": mismatch}),
        Check("dtmc_rows_stochastic", dtmc_err < 1e-12 and min_stay >= 0,
              {"max_mass_error": dtmc_err, "min_self_loop": min_stay}),
    ]


def _check_policy() -> list[Check]:
    spec = SmoothingSpec(0.5, 10.0)
    psi = smooth_step(0.0, 1.0, 0.5)
    grid = np.linspace(-1.0, 2.0, 10_001)
    steps = smooth_step(0.0, 1.0, grid)
    inner = np.linspace(spec.epsilon, spec.M - spec.epsilon, 1000)
    wide = np.linspace(-1e3, 1e3, 20_001)
    sp_wide = smooth_param(wide, spec)
    pen = penalty(wide, spec)
    in_band = (wide >= spec.epsilon) & (wide <= spec.M - spec.epsilon)
    pi_err = 0.0
    for N in (5, 50):
        for policy in (PolicySpec("simplified", 6.5), PolicySpec("binomial", 3.2, SmoothingSpec(0.5, 4.5))):
            for x in ((0, 0, 0, 0), (0, 1, 2, 1), (0, N // 2, 1, 1)):
                pi_err = max(pi_err, abs(sum(pi_distribution(x, policy, N).values()) - 1.0))
    return [
        Check("smooth_step_value", abs(psi - math.exp(-0.5)) < 1e-12, {"psi_0_1(0.5)": psi}),
        Check("smooth_step_monotone", bool(np.all(np.diff(steps) >= 0)), {}),
        Check("smooth_param_identity", bool(np.all(smooth_param(inner, spec) == inner)), {}),
        Check("smooth_param_range", bool(np.all((sp_wide > 0) & (sp_wide < spec.M))),
              {"min": float(sp_wide.min()), "max": float(sp_wide.max())}),
        Check("penalty_zero_band", bool(np.all((pen == 0) == in_band)), {}),
        Check("pi_mass", pi_err < 1e-12, {"max_mass_error": pi_err}),
    ]


def _check_oracle(params: ModelParams, weights: CostWeights) -> list[Check]:
    space = StateSpace(params.N)
    worst = 0.0
    diff = 0.0
    mass = 0.0
    for theta in (0.0, 1.5, 3.0):
        Q = build_generator(PolicySpec("simplified", theta), params, space)
        direct = solve_stationary(Q, space, method="direct")
        power = solve_stationary(Q, space, method="power", tol=1e-13)
        worst = max(worst, direct.residual, power.residual)
        mass = max(mass, abs(direct.m.sum() - 1.0))
        diff = max(diff, float(np.abs(direct.m - power.m).max()))
    bound = float(cost_vector(space.states, weights, params.N).max())
    return [
        Check("stationary_residual", worst < 1e-10 and mass < 1e-12,
              {"max_residual": worst, "max_mass_error": mass}),
        Check("power_matches_direct", diff < 1e-9, {"max_abs_diff": diff}),
        Check("cost_bound", bound <= weights.bound(params.N), {"max_cost": bound}),
    ]


def _check_simulation(params: ModelParams, weights: CostWeights, seed: int) -> list[Check]:
    out = []
    seg = simulate_segment(EMPTY_STATE, PolicySpec("simplified", 0.0), params, 10**6,
                           RngStream(seed, (0,)).generator())
    out.append(Check("theta0_reduction", seg.max_init0 == 0,
                     {"max_init0": seg.max_init0, "handoff": params.handoff}))
    oracle = CostOracle(params, weights)
    steps, batch, burn = 2 * 10**6, 2 * 10**4, 10
    for k, theta in enumerate((0.0, 2.0)):
        seg = simulate_segment(EMPTY_STATE, PolicySpec("simplified", theta), params, steps,
                               RngStream(seed, (1, k)).generator(), weights=weights, batch_size=batch)
        means = seg.batch_means[burn:]
        mean = float(means.mean())
        se = float(means.std(ddof=1) / math.sqrt(len(means)))
        exact = oracle(theta)
        out.append(Check(f"oracle_vs_simulation_theta{theta:g}", abs(mean - exact) <= 3 * se,
                         {"simulated": mean, "std_error": se, "oracle": exact}))
    return out


def run_validation(params: ModelParams, weights: CostWeights, seed: int = 0) -> list[Check]:
    """All invariant checks at small capacity.

    ``params`` supplies the rates and the handoff rule; capacities up to 6
    are enumerated exhaustively and the oracle checks use ``N = 5``.
    """
    small = replace(params, N=5)
    checks = [_check_state_counts()]
    checks += _check_transitions(params)
    checks += _check_policy()
    checks += _check_oracle(small, weights)
    checks += _check_simulation(small, weights, seed)
    return checks
