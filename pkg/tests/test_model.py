import warnings

import numpy as np
import pytest

from psirank import (
    ActivityRates,
    NonConvergenceError,
    SingularSystemError,
    birth_death_check,
    build_graph,
    build_system,
    load_rates,
    pagerank,
    psi_scores,
    save_rates,
    solve_all_labels,
    solve_dense,
    solve_iterative,
    spectral_bounds,
)
from psirank.model import DenseFactorization, iter_label_solutions

from conftest import random_sparse_graph, random_strongly_connected


class TestActivityRates:
    def test_validation(self):
        with pytest.raises(ValueError):
            ActivityRates(np.array([1.0, -0.1]), np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            ActivityRates(np.array([1.0]), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            ActivityRates(np.array([np.inf]), np.array([1.0]))

    def test_inactive_users(self):
        r = ActivityRates(np.array([0.0, 1.0]), np.array([0.0, 0.5]))
        assert r.inactive_users().tolist() == [0]


class TestBuildSystem:
    def test_toy_entries(self, toy_graph, toy_rates_homogeneous):
        system = build_system(toy_graph, toy_rates_homogeneous)
        A = system.A.toarray()
        beta = 2.0 / 2.105
        # row C has a single entry pointing at its only leader A
        assert np.flatnonzero(A[2]).tolist() == [0]
        assert A[2, 0] == pytest.approx(beta)
        # row A spreads over its three leaders
        assert np.flatnonzero(A[0]).tolist() == [1, 2, 3]
        assert np.allclose(A[0, 1:], beta / 3)
        # A equals beta * W^T for homogeneous rates
        W = np.zeros((4, 4))
        for j in range(4):
            lead = toy_graph.leaders(j)
            W[lead, j] = 1.0 / lead.size
        assert np.allclose(A, beta * W.T, atol=1e-15)

    def test_no_reposting_zero_matrix(self, toy_graph):
        rates = ActivityRates(np.full(4, 0.5), np.zeros(4))
        system = build_system(toy_graph, rates)
        assert system.A.nnz == 0
        assert spectral_bounds(system) == (0.0, 0.0)

    def test_two_cycle_entries(self, two_cycle):
        rates = ActivityRates(np.ones(2), np.ones(2))
        system = build_system(two_cycle, rates)
        A = system.A.toarray()
        assert A[0, 1] == pytest.approx(0.5)
        assert A[1, 0] == pytest.approx(0.5)
        assert np.allclose(system.c_diag, 0.5)

    def test_zero_rate_leader_has_no_entry(self):
        g = build_graph([(0, 1), (0, 2), (1, 0), (2, 0)], 3)
        rates = ActivityRates(np.array([1.0, 1.0, 1.0]), np.array([1.0, 0.0, 1.0]))
        system = build_system(g, rates)
        A = system.A.toarray()
        assert A[0, 1] == 0.0  # leader 1 never re-posts
        assert A[0, 2] > 0.0

    def test_dimension_mismatch(self, toy_graph):
        with pytest.raises(ValueError, match="rates cover"):
            build_system(toy_graph, ActivityRates(np.ones(3), np.ones(3)))

    def test_inactive_rejected_unless_allowed(self, two_cycle):
        rates = ActivityRates(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        with pytest.raises(ValueError, match="allow_inactive"):
            build_system(two_cycle, rates)
        system = build_system(two_cycle, rates, allow_inactive=True)
        assert system.c_diag[0] == 0.0
        assert system.self_share[0] == 0.0

    def test_row_invariants_random(self):
        rng = np.random.default_rng(17)
        for _ in range(15):
            n = int(rng.integers(3, 40))
            g = random_sparse_graph(n, int(rng.integers(1, 4 * n)), rng)
            rates = ActivityRates(rng.uniform(0.01, 2, n), rng.uniform(0, 2, n))
            system = build_system(g, rates)
            A = system.A.toarray()
            assert np.allclose(np.diag(A), 0.0)
            assert (system.row_sums >= 0).all() and (system.row_sums <= 1 + 1e-12).all()
            # row of A plus the lambda shares of all leaders sums to 1 when leaders exist
            for j in range(n):
                lead = g.leaders(j)
                if lead.size == 0:
                    assert system.row_sums[j] == 0.0
                    continue
                lam_share = rates.lam[lead].sum() / system.inflow[j]
                assert A[j].sum() + lam_share == pytest.approx(1.0, abs=1e-12)
            for i in range(n):
                assert system.b_column(i)[i] == 0.0


class TestSpectralBounds:
    def test_homogeneous(self, toy_graph):
        rates = ActivityRates(np.full(4, 0.5), np.full(4, 1.5))
        assert spectral_bounds(build_system(toy_graph, rates)) == pytest.approx((0.75, 0.75))

    def test_toy_value(self, toy_graph, toy_rates_homogeneous):
        lo, hi = spectral_bounds(build_system(toy_graph, toy_rates_homogeneous))
        assert lo == pytest.approx(0.9501187648456058)
        assert hi == lo

    def test_ignores_leaderless_rows(self):
        g = build_graph([(0, 1), (1, 0)], 3)  # user 2 has no leaders
        rates = ActivityRates(np.ones(3), np.ones(3))
        assert spectral_bounds(build_system(g, rates)) == pytest.approx((0.5, 0.5))


class TestSolvers:
    def test_two_cycle_closed_form(self, two_cycle):
        rates = ActivityRates(np.full(2, 0.7), np.full(2, 0.7))
        system = build_system(two_cycle, rates)
        vec = solve_iterative(system, 0)
        assert vec.p == pytest.approx([1 / 3, 2 / 3], abs=1e-9)
        assert vec.q == pytest.approx([2 / 3, 1 / 3], abs=1e-9)

    def test_no_reposting_direct_solution(self, toy_graph):
        rates = ActivityRates(np.array([0.5, 1.0, 2.0, 0.25]), np.zeros(4))
        system = build_system(toy_graph, rates)
        for label in range(4):
            vec = solve_iterative(system, label)
            assert vec.p == pytest.approx(system.b_column(label))
            expected_q = np.zeros(4)
            expected_q[label] = 1.0
            assert vec.q == pytest.approx(expected_q)

    def test_toy_homogeneous_scores(self, toy_graph, toy_rates_homogeneous):
        system = build_system(toy_graph, toy_rates_homogeneous)
        _, Q, _ = solve_all_labels(system)
        table = psi_scores(Q, 4)
        assert table.psi_tilde == pytest.approx([0.331, 0.223, 0.223, 0.223], abs=1e-3)

    def test_dense_matches_iterative(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = int(rng.integers(4, 60))
            g = random_sparse_graph(n, int(rng.integers(1, 4 * n)), rng)
            rates = ActivityRates(rng.uniform(0.1, 2, n), rng.uniform(0.0, 2, n))
            system = build_system(g, rates)
            fact = DenseFactorization(system)
            for label in rng.choice(n, size=3):
                vi = solve_iterative(system, int(label))
                vd = fact.solve(int(label))
                assert np.abs(vi.p - vd.p).max() < 1e-8
                assert np.abs(vi.q - vd.q).max() < 1e-8

    def test_zero_b_label(self, toy_graph):
        rates = ActivityRates(np.array([0.0, 1.0, 1.0, 1.0]), np.ones(4))
        system = build_system(toy_graph, rates)
        vec = solve_dense(system, 0)
        assert np.allclose(vec.p, 0.0)
        assert np.allclose(vec.q, 0.0)

    def test_dense_cap(self, toy_graph, toy_rates_homogeneous):
        system = build_system(toy_graph, toy_rates_homogeneous)
        with pytest.raises(ValueError, match="cap"):
            solve_dense(system, 0, cap=2)

    def test_singular_system_named(self, two_cycle):
        rates = ActivityRates(np.zeros(2), np.ones(2))  # no self-posts anywhere
        system = build_system(two_cycle, rates)
        with pytest.raises(SingularSystemError, match="spectral radius"):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                solve_dense(system, 0)

    def test_row_sum_one_warns(self, two_cycle):
        rates = ActivityRates(np.zeros(2), np.ones(2))
        system = build_system(two_cycle, rates)
        with pytest.warns(RuntimeWarning, match="row sum"):
            solve_iterative(system, 0)

    def test_non_convergence_carries_residual(self, toy_graph, toy_rates_homogeneous):
        system = build_system(toy_graph, toy_rates_homogeneous)
        with pytest.raises(NonConvergenceError) as err:
            solve_iterative(system, 0, tol=1e-14, max_iter=3)
        assert err.value.residual > 0
        assert err.value.iterations == 3

    def test_leaderless_rows_solve_to_zero(self):
        g = build_graph([(0, 1), (1, 0), (2, 0)], 4)  # user 3 isolated, user 2 follows 0
        rates = ActivityRates(np.ones(4), np.ones(4))
        system = build_system(g, rates)
        assert system.leaderless_users().tolist() == [3]
        vec = solve_iterative(system, 0)
        assert vec.p[3] == 0.0
        assert vec.q[3] == 0.0
        vd = solve_dense(system, 0)
        assert vd.p[3] == pytest.approx(0.0, abs=1e-15)

    def test_wall_normalization(self):
        rng = np.random.default_rng(11)
        g = random_strongly_connected(25, 50, rng)
        rates = ActivityRates(rng.uniform(0.1, 1, 25), rng.uniform(0.1, 1, 25))
        system = build_system(g, rates)
        _, Q, _ = solve_all_labels(system, tol=1e-12)
        assert np.abs(Q.sum(axis=0) - 1.0).max() < 25 * 1e-12 * 10

    def test_geometric_convergence_bound(self):
        rng = np.random.default_rng(3)
        g = random_strongly_connected(30, 90, rng)
        rates = ActivityRates(rng.uniform(0.2, 1, 30), rng.uniform(0.2, 2, 30))
        system = build_system(g, rates)
        vec = solve_iterative(system, 2, tol=1e-12, record_history=True)
        _, hi = spectral_bounds(system)
        h = vec.step_norms
        ratios = [h[k + 1] / h[k] for k in range(5, len(h) - 1) if h[k] > 0]
        assert max(ratios) <= hi + 1e-9

    def test_blocked_solves_identical_across_blockings(self, toy_graph, toy_rates_homogeneous):
        rng = np.random.default_rng(23)
        g = random_strongly_connected(40, 120, rng)
        rates = ActivityRates(rng.uniform(0.1, 1, 40), rng.uniform(0.1, 2, 40))
        system = build_system(g, rates)
        _, Q1, _ = solve_all_labels(system, block_size=40)
        _, Q2, _ = solve_all_labels(system, block_size=7)
        assert np.array_equal(Q1, Q2)
        single = solve_iterative(system, 13)
        assert np.array_equal(single.q, Q1[13])

    def test_worker_parallelism_identical(self):
        rng = np.random.default_rng(29)
        g = random_strongly_connected(30, 60, rng)
        rates = ActivityRates(rng.uniform(0.1, 1, 30), rng.uniform(0.1, 2, 30))
        system = build_system(g, rates)
        _, Q1, _ = solve_all_labels(system, block_size=8, workers=1)
        _, Q2, _ = solve_all_labels(system, block_size=8, workers=3)
        assert np.array_equal(Q1, Q2)

    def test_label_subset_iteration_order(self, toy_graph, toy_rates_homogeneous):
        system = build_system(toy_graph, toy_rates_homogeneous)
        labels = [2, 0]
        got = [v.label for v in iter_label_solutions(system, labels)]
        assert got == labels


class TestBirthDeathCheck:
    def test_two_cycle_exact(self, two_cycle):
        rates = ActivityRates(np.ones(2), np.ones(2))
        system = build_system(two_cycle, rates)
        vec = solve_iterative(system, 0, tol=1e-12)
        resid = birth_death_check(system, 0, vec)
        assert resid.max() < 1e-11
        # the stationary-mean form: p equals inflow share num/(num+den); for user 1 the
        # only leader is the label itself, so the den lambda sum is empty
        num = 1.0 + 1.0 * vec.p[0]
        den = 0.0 + 1.0 * (1.0 - vec.p[0])
        assert num / den == pytest.approx(2.0, abs=1e-9)
        assert vec.p[1] == pytest.approx(num / (num + den), abs=1e-10)

    def test_no_reposting_residual_zero(self, toy_graph):
        rates = ActivityRates(np.array([0.4, 0.8, 1.6, 0.2]), np.zeros(4))
        system = build_system(toy_graph, rates)
        vec = solve_iterative(system, 0)
        assert birth_death_check(system, 0, vec).max() < 1e-14

    def test_random_instances(self):
        rng = np.random.default_rng(101)
        for _ in range(8):
            g = random_sparse_graph(10, int(rng.integers(5, 30)), rng)
            rates = ActivityRates(rng.uniform(0.1, 1, 10), rng.uniform(0, 1, 10))
            system = build_system(g, rates)
            for label in (0, 3):
                vec = solve_iterative(system, label)
                assert birth_death_check(system, label, vec).max() <= 1e-8


class TestPageRank:
    def test_toy_values(self, toy_graph):
        pi = pagerank(toy_graph, beta=0.95, tol=1e-13)
        assert pi == pytest.approx([0.331, 0.223, 0.223, 0.223], abs=1e-3)
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)

    def test_teleport_limit_uniform(self, toy_graph):
        pi = pagerank(toy_graph, beta=1e-9)
        assert pi == pytest.approx(np.full(4, 0.25), abs=1e-8)

    def test_two_cycle_any_beta(self, two_cycle):
        for beta in (0.1, 0.5, 0.95):
            assert pagerank(two_cycle, beta) == pytest.approx([0.5, 0.5], abs=1e-10)

    def test_dangling_columns_handled(self):
        g = build_graph([(0, 1), (1, 0), (0, 2)], 3)  # user 2 has no leaders
        pi = pagerank(g, beta=0.85)
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)
        assert (pi > 0).all()

    def test_beta_out_of_range(self, toy_graph):
        with pytest.raises(ValueError):
            pagerank(toy_graph, beta=1.0)

    def test_homogeneous_equivalence(self):
        rng = np.random.default_rng(55)
        g = random_strongly_connected(20, 60, rng)
        lam, mu = 0.3, 1.2
        rates = ActivityRates(np.full(20, lam), np.full(20, mu))
        system = build_system(g, rates)
        _, Q, _ = solve_all_labels(system, tol=1e-12)
        table = psi_scores(Q, 20)
        pi = pagerank(g, beta=mu / (lam + mu), tol=1e-14)
        assert np.abs(table.psi_tilde - pi).max() < 1e-9


class TestRatesIO:
    def test_round_trip(self, tmp_path):
        rates = ActivityRates(np.array([0.1, 0.0, 2.5]), np.array([1.0, 0.5, 0.0]))
        path = tmp_path / "rates.tsv"
        save_rates(rates, path)
        loaded = load_rates(path)
        assert np.array_equal(loaded.lam, rates.lam)
        assert np.array_equal(loaded.mu, rates.mu)
