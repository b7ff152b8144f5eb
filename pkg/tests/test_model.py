import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from serverless_kw import (
    EMPTY_STATE,
    ModelParams,
    PolicySpec,
    SmoothingSpec,
    StateSpace,
    SystemState,
    build_generator,
    dtmc_row,
    enumerate_states,
    out_transitions,
    uniformization_rate,
)
from serverless_kw.validation import brute_force_count

LAM, MU, BETA, GAM = 0.3, 1.0, 0.1, 0.01


def params(N, **kw):
    return ModelParams(LAM, MU, BETA, GAM, N, **kw)


@st.composite
def states(draw, N):
    x1 = draw(st.integers(0, N))
    x2 = draw(st.integers(0, N - x1))
    x3 = draw(st.integers(0, N - x1 - x2))
    x4 = draw(st.integers(0, x3))
    return SystemState(x1, x2, x3, x4)


@st.composite
def state_and_capacity(draw):
    N = draw(st.integers(1, 12))
    return N, draw(states(N))


policies = st.tuples(st.sampled_from(["simplified", "binomial"]), st.floats(-30, 30))


class TestStateSpace:
    def test_n1_states(self):
        assert sorted(StateSpace(1)) == sorted(
            [(0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 1, 1)]
        )

    def test_n0_single_state(self):
        assert list(StateSpace(0)) == [EMPTY_STATE]

    def test_lexicographic_order(self):
        rows = [tuple(r) for r in StateSpace(4).states]
        assert rows == sorted(rows)

    @pytest.mark.parametrize("N", range(8))
    def test_size_matches_brute_force(self, N):
        assert len(StateSpace(N)) == brute_force_count(N)

    def test_n50_size_regression(self):
        # frozen from brute_force_count(50)
        assert len(enumerate_states(50)) == 316_251

    def test_all_and_only_valid_states(self):
        N = 4
        valid = {
            x for x in itertools.product(range(N + 1), repeat=4) if SystemState(*x).is_valid(N)
        }
        assert set(StateSpace(N)) == valid

    def test_index_roundtrip(self):
        space = StateSpace(5)
        for i, x in enumerate(space):
            assert space.index_of(x) == i
            assert space[i] == x

    def test_invalid_index_raises(self):
        with pytest.raises(KeyError):
            StateSpace(3).index_of((1, 1, 1, 2))


class TestParams:
    @pytest.mark.parametrize("field", ["lam", "mu", "beta", "gamma_exp"])
    def test_rates_must_be_positive(self, field):
        kw = dict(lam=LAM, mu=MU, beta=BETA, gamma_exp=GAM, N=3)
        kw[field] = 0.0
        with pytest.raises(ValueError):
            ModelParams(**kw)

    def test_bad_capacity_and_handoff(self):
        with pytest.raises(ValueError):
            ModelParams(LAM, MU, BETA, GAM, 2.5)
        with pytest.raises(ValueError):
            ModelParams(LAM, MU, BETA, GAM, 3, handoff="keep")


class TestTransitions:
    def test_idle_server_example(self):
        out = out_transitions((1, 0, 0, 0), PolicySpec("simplified", 3.0), params(50))
        assert sorted(out) == sorted([(LAM, (0, 1, 0, 0)), (GAM, (0, 0, 0, 0))])

    def test_rejection_self_loop(self):
        out = out_transitions((0, 49, 1, 1), PolicySpec("simplified", 3.0), params(50))
        assert (LAM, (0, 49, 1, 1)) in out

    def test_empty_state_theta0_spawns_one_init1(self):
        out = out_transitions(EMPTY_STATE, PolicySpec("simplified", 0.0), params(50))
        assert out == [(LAM, (0, 0, 1, 1))]

    def test_no_cold_binds_init0(self):
        # x1 = 0, no cold server, one init0 server available
        out = out_transitions((0, 2, 3, 1), PolicySpec("simplified", 0.0), params(5))
        assert (LAM, (0, 2, 3, 2)) in out

    @pytest.mark.parametrize("handoff,expected", [("cancel", (0, 2, 1, 0)), ("release", (0, 2, 2, 0))])
    def test_service_with_queue(self, handoff, expected):
        out = out_transitions((0, 2, 2, 1), PolicySpec("simplified", 0.0), params(5, handoff=handoff))
        assert (2 * MU, expected) in out

    def test_init_completion(self):
        pol = PolicySpec("simplified", 0.0)
        assert (BETA * 2, (0, 2, 1, 0)) in out_transitions((0, 1, 2, 1), pol, params(5))
        assert (BETA * 2, (1, 1, 1, 0)) in out_transitions((0, 1, 2, 0), pol, params(5))

    def test_theta_6_5_split(self):
        out = out_transitions((0, 10, 3, 2), PolicySpec("simplified", 6.5), params(50))
        arrivals = {y: r for r, y in out if y[3] == 3}
        # pi = 5 or 6 with equal mass; each adds pi + 1 initializing servers
        assert arrivals == {(0, 10, 9, 3): LAM / 2, (0, 10, 10, 3): LAM / 2}

    @given(state_and_capacity(), policies)
    def test_successors_valid_and_rates_complete(self, nx, policy):
        N, x = nx
        kind, theta = policy
        smoothing = SmoothingSpec(0.25, 1.0 + N / 2) if kind == "binomial" else None
        out = out_transitions(x, PolicySpec(kind, theta, smoothing), params(N))
        assert all(r > 0 and y.is_valid(N) for r, y in out)
        x1, x2, x3, _ = x
        total = LAM + MU * x2 + GAM * x1 + BETA * x3
        assert sum(r for r, _ in out) == pytest.approx(total)

    def test_invalid_state_rejected(self):
        with pytest.raises(ValueError):
            out_transitions((3, 3, 0, 0), PolicySpec(), params(5))


class TestUniformization:
    def test_rates(self):
        assert uniformization_rate(params(50)) == pytest.approx(55.8)
        assert uniformization_rate(ModelParams(0.15, MU, BETA, GAM, 50)) == pytest.approx(55.65)
        assert uniformization_rate(params(0)) == LAM

    def test_row_example(self):
        row = dtmc_row((1, 0, 0, 0), PolicySpec(), params(50))
        assert row[(0, 1, 0, 0)] == pytest.approx(0.3 / 55.8, abs=1e-12)
        assert sum(row.values()) == pytest.approx(1.0, abs=1e-12)

    def test_rejection_in_self_loop(self):
        p = params(50)
        x = (0, 49, 1, 1)
        row = dtmc_row(x, PolicySpec(), p)
        moves = sum(r for r, y in out_transitions(x, PolicySpec(), p) if y != x)
        assert row[x] == pytest.approx(1 - moves / 55.8, abs=1e-12)
        assert row[x] >= LAM / 55.8

    @given(state_and_capacity(), st.floats(-2, 12))
    def test_rows_are_distributions(self, nx, theta):
        N, x = nx
        row = dtmc_row(x, PolicySpec("simplified", theta), params(N))
        assert abs(sum(row.values()) - 1) < 1e-12
        assert min(row.values()) >= 0


def hand_generator_n1():
    """Generator for N = 1, theta = 0, written out state by state."""
    order = [(0, 0, 0, 0), (0, 0, 1, 0), (0, 0, 1, 1), (0, 1, 0, 0), (1, 0, 0, 0)]
    ix = {s: i for i, s in enumerate(order)}
    Q = np.zeros((5, 5))
    Q[ix[(0, 0, 0, 0)], ix[(0, 0, 1, 1)]] = LAM
    Q[ix[(0, 0, 1, 0)], ix[(0, 0, 1, 1)]] = LAM
    Q[ix[(0, 0, 1, 0)], ix[(1, 0, 0, 0)]] = BETA
    Q[ix[(0, 0, 1, 1)], ix[(0, 1, 0, 0)]] = BETA
    Q[ix[(0, 1, 0, 0)], ix[(1, 0, 0, 0)]] = MU
    Q[ix[(1, 0, 0, 0)], ix[(0, 1, 0, 0)]] = LAM
    Q[ix[(1, 0, 0, 0)], ix[(0, 0, 0, 0)]] = GAM
    Q -= np.diag(Q.sum(axis=1))
    return order, Q


class TestGenerator:
    def test_n1_hand_checked(self):
        order, ref = hand_generator_n1()
        space = StateSpace(1)
        assert [tuple(x) for x in space] == order
        Q = build_generator(PolicySpec("simplified", 0.0), params(1), space).toarray()
        np.testing.assert_allclose(Q, ref, atol=1e-15)

    @pytest.mark.parametrize("N", [2, 4, 6])
    @pytest.mark.parametrize("theta", [0.0, 1.25, 4.5])
    @pytest.mark.parametrize("handoff", ["cancel", "release"])
    def test_matches_out_transitions(self, N, theta, handoff):
        p = params(N, handoff=handoff)
        space = StateSpace(N)
        pol = PolicySpec("simplified", theta)
        Q = build_generator(pol, p, space)
        ref = np.zeros((len(space), len(space)))
        for i, x in enumerate(space):
            for r, y in out_transitions(x, pol, p):
                if y != x:
                    ref[i, space.index_of(y)] += r
        ref -= np.diag(ref.sum(axis=1))
        np.testing.assert_allclose(Q.toarray(), ref, atol=1e-13)

    @pytest.mark.parametrize("N", range(7))
    def test_row_sums_and_signs(self, N):
        for pol in (PolicySpec("simplified", 2.3), PolicySpec("simplified", 0.0)):
            Q = build_generator(pol, params(N))
            assert np.abs(np.asarray(Q.sum(axis=1))).max() < 1e-12
            off = Q.toarray() - np.diag(Q.diagonal())
            assert off.min() >= 0

    def test_binomial_policy_rows(self):
        pol = PolicySpec("binomial", 1.7, SmoothingSpec(0.5, 2.5))
        Q = build_generator(pol, params(6))
        assert np.abs(np.asarray(Q.sum(axis=1))).max() < 1e-12

    def test_theta_6_5_split_in_generator(self):
        space = StateSpace(50)
        Q = build_generator(PolicySpec("simplified", 6.5), params(50), space)
        i = space.index_of((0, 10, 3, 2))
        assert Q[i, space.index_of((0, 10, 9, 3))] == pytest.approx(LAM / 2)
        assert Q[i, space.index_of((0, 10, 10, 3))] == pytest.approx(LAM / 2)
