"""Tests for the closed-form resource calculators."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qhdsim.errors import DomainError, InvalidParameterError
from qhdsim.resources import (
    CONVENTION_NOTE,
    ResourceEstimate,
    baseline_queries,
    eps_f_budget,
    estimate_resources,
    gate_count,
    qhd_query_lower,
    qhd_query_upper,
    qubit_count,
    queries_binary,
    queries_phase,
    stochastic_queries,
)


class TestEpsFBudget:
    def test_reference_value(self):
        # x = 1e6: ln x = 13.81551..., lnln x = 2.62579...
        assert eps_f_budget(1e-3, 10.0, 100.0) == pytest.approx(
            1.9006115651385115e-06, rel=1e-12
        )

    def test_unit_log_ratio(self):
        # b_l1 = eps and x = e^2 collapse the formula to ln2/2
        assert eps_f_budget(1.0, math.e**2, 1.0) == pytest.approx(
            math.log(2.0) / 2.0, rel=1e-12
        )

    def test_more_than_doubles_with_eps(self):
        assert eps_f_budget(2e-3, 10.0, 100.0) > 2.0 * eps_f_budget(1e-3, 10.0, 100.0)

    def test_log_domain_guard(self):
        with pytest.raises(DomainError):
            eps_f_budget(1.0, 1.0, 2.0)  # x = 2 < e
        with pytest.raises(DomainError):
            eps_f_budget(1.0, math.e, 1.0)  # x = e exactly
        with pytest.raises(InvalidParameterError):
            eps_f_budget(-1.0, 10.0, 100.0)

    @settings(max_examples=40, deadline=None)
    @given(
        eps=st.floats(1e-6, 0.1),
        Lambda=st.floats(0.5, 100.0),
        b_l1=st.floats(0.5, 1e4),
    )
    def test_monotone_in_eps(self, eps, Lambda, b_l1):
        # monotone once lnln is past its knee; below x ~ e^e the budget
        # collapses toward the domain edge instead
        assume(Lambda * b_l1 / (2.0 * eps) > math.e**math.e)
        assert eps_f_budget(2.0 * eps, Lambda, b_l1) > eps_f_budget(eps, Lambda, b_l1)


class TestQueryCounts:
    def test_binary_reference(self):
        assert queries_binary(10.0, 100.0, 1e-3) == 5262

    def test_phase_reference(self):
        assert abs(queries_phase(10.0, 100.0, 1e-3) - 382454877476) <= 1

    def test_binary_scales_roughly_linearly_in_lambda(self):
        base = queries_binary(10.0, 100.0, 1e-3)
        doubled = queries_binary(20.0, 100.0, 1e-3)
        assert 2.0 * base <= doubled <= 2.2 * base

    def test_phase_to_binary_ratio(self):
        Lambda, b_l1, eps = 10.0, 100.0, 1e-3
        lx = math.log(Lambda * b_l1 / eps)
        expected = (Lambda * b_l1 / eps) * lx**2 / math.log(lx)
        ratio = queries_phase(Lambda, b_l1, eps) / queries_binary(Lambda, b_l1, eps)
        assert ratio == pytest.approx(expected, rel=1e-3)

    def test_domain_guard(self):
        with pytest.raises(DomainError):
            queries_binary(1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            queries_phase(1.0, 1.0, 1.0)


class TestQubitsAndGates:
    def test_formula_values(self):
        # d log2 N + log2(d N^2) + log2(a/eps) + log2(Lambda b/eps), ceilinged
        assert qubit_count(1, 2, 1.0, 1.0, 1.0, 1.0) == 3
        assert qubit_count(2, 16, 1.0, 1.0, 1.0, 1.0) == 17

    def test_monotone_in_inverse_eps(self):
        assert qubit_count(1, 2, 1.0, 1.0, 1.0, 0.25) > qubit_count(
            1, 2, 1.0, 1.0, 1.0, 1.0
        )

    def test_rejects_non_power_of_two(self):
        with pytest.raises(InvalidParameterError):
            qubit_count(1, 3, 1.0, 1.0, 1.0, 1.0)
        with pytest.raises(InvalidParameterError):
            qubit_count(0, 2, 1.0, 1.0, 1.0, 1.0)

    def test_gate_tally_matches_inline_formula(self):
        d, N, a, L, b, eps = 1, 16, 1.0, 10.0, 100.0, 1e-3
        lx = math.log(L * b / eps)
        llx = math.log(lx)
        pref = (L * b) ** 2 / eps * lx**3 / llx**2
        bracket = (d * math.log(N) * math.log(d * N * N)
                   + d * math.log(N) * math.log((a + L * b / (d * N * N)) / eps)
                   + lx**3)
        got = gate_count(d, N, a, L, b, eps)
        assert got == pytest.approx(pref * bracket, rel=1e-12)
        assert abs(got - 1023403413477022) <= 2

    def test_estimate_bundle(self):
        est = estimate_resources(2, 64, 5.0, 10.0, 100.0, 1e-3)
        assert est.queries_binary == queries_binary(10.0, 100.0, 1e-3)
        assert est.qubits == qubit_count(2, 64, 5.0, 10.0, 100.0, 1e-3)
        assert est.eps_f == pytest.approx(eps_f_budget(1e-3, 10.0, 100.0))
        assert est.convention_note == CONVENTION_NOTE
        assert CONVENTION_NOTE == "leading-order, constants = 1"

    def test_bundle_rejects_negative_counts(self):
        with pytest.raises(InvalidParameterError):
            ResourceEstimate(queries_binary=-1, queries_phase=1, qubits=1,
                             gates=1, eps_f=0.1)
        with pytest.raises(InvalidParameterError):
            ResourceEstimate(queries_binary=1, queries_phase=1, qubits=1,
                             gates=1, eps_f=0.0)


class TestDescentBounds:
    def test_upper_reference(self):
        ub = qhd_query_upper(4, 1.0, 1.0, 0.1)
        assert ub.count == pytest.approx(800.0, rel=1e-13)
        assert qhd_query_upper(1, 1.0, 1.0, 0.1).noise == pytest.approx(1e-3, rel=1e-12)

    def test_upper_inverse_square_in_eps(self):
        a = qhd_query_upper(3, 2.0, 1.5, 0.2).count
        b = qhd_query_upper(3, 2.0, 1.5, 0.1).count
        assert b == pytest.approx(4.0 * a, rel=1e-12)

    def test_lower_reference(self):
        lb = qhd_query_lower(4, 1.0, 1.0, 0.1, lambda_f=2.0)
        assert lb.general == pytest.approx(400.0, rel=1e-12)
        assert lb.hypercube == pytest.approx(400.0, rel=1e-12)

    def test_lower_default_convention_coincides(self):
        lb = qhd_query_lower(7, 1.3, 0.8, 0.05)
        assert lb.general == pytest.approx(lb.hypercube, rel=1e-12)

    def test_lower_below_upper_on_sweep(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            d = int(rng.integers(1, 17))
            G = float(rng.uniform(1.0, 3.0))
            R = float(rng.uniform(1.0, 3.0))
            eps = float(rng.uniform(0.01, 0.5))
            lb = qhd_query_lower(d, G, R, eps)
            ub = qhd_query_upper(d, G, R, eps)
            assert lb.hypercube <= ub.count * (1 + 1e-12)

    def test_stochastic_reference(self):
        assert stochastic_queries(2, 1.0, 1.0, 0.5) == pytest.approx(256.0, rel=1e-13)

    def test_stochastic_decomposition(self):
        d, G, R, eps = 3, 1.7, 0.9, 0.23
        lhs = stochastic_queries(d, G, R, eps)
        rhs = qhd_query_upper(d, G, R, eps).count * d**1.5 / eps**3 * (G * R) ** 3
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_stochastic_fifth_power(self):
        a = stochastic_queries(2, 1.0, 1.0, 0.5)
        b = stochastic_queries(2, 1.0, 1.0, 0.25)
        assert b == pytest.approx(32.0 * a, rel=1e-12)


class TestBaselines:
    def test_risteski_li_exact(self):
        row = baseline_queries("risteski_li", 2, 1.0, 1.0, 0.5)
        assert row.count == 1024.0
        assert row.noise == pytest.approx(0.25, rel=1e-12)

    def test_li_zhang_noise(self):
        assert baseline_queries("li_zhang", 10, 1.0, 1.0, 0.1).noise == pytest.approx(
            0.01, rel=1e-12
        )

    def test_subgradient_count_dimension_free(self):
        a = baseline_queries("subgradient", 2, 1.0, 1.0, 0.1)
        b = baseline_queries("subgradient", 64, 1.0, 1.0, 0.1)
        assert a.count == b.count == pytest.approx(100.0, rel=1e-13)
        assert b.noise < a.noise  # noise floor tightens with dimension

    def test_walk_based_counts_eps_free(self):
        for name in ("belloni", "li_zhang"):
            a = baseline_queries(name, 8, 1.0, 1.0, 0.5).count
            b = baseline_queries(name, 8, 1.0, 1.0, 0.001).count
            assert a == b

    def test_unknown_algorithm(self):
        with pytest.raises(InvalidParameterError):
            baseline_queries("gradient_descent", 2, 1.0, 1.0, 0.1)


class TestScalingInvariants:
    EPS_GRID = np.geomspace(0.5, 1e-4, 10)

    def test_counts_increase_as_eps_decreases(self):
        sweeps = [
            lambda e: queries_binary(10.0, 100.0, e),
            lambda e: queries_phase(10.0, 100.0, e),
            lambda e: qubit_count(2, 16, 1.0, 10.0, 100.0, e),
            lambda e: qhd_query_upper(4, 1.0, 1.0, e).count,
            lambda e: qhd_query_lower(4, 1.0, 1.0, e).general,
            lambda e: stochastic_queries(4, 1.0, 1.0, e),
            lambda e: baseline_queries("risteski_li", 4, 1.0, 1.0, e).count,
            lambda e: baseline_queries("subgradient", 4, 1.0, 1.0, e).count,
        ]
        for formula in sweeps:
            values = [formula(float(e)) for e in self.EPS_GRID]
            assert all(b > a for a, b in zip(values, values[1:]))

    def test_crossover_against_classical_baselines(self):
        for rho in (0.1, 0.5):
            for d in (16, 32, 64, 128, 256, 512, 1024):
                eps = d ** (-rho)
                ours = qhd_query_upper(d, 1.0, 1.0, eps).count
                assert ours < baseline_queries("risteski_li", d, 1.0, 1.0, eps).count
                assert ours < baseline_queries("belloni", d, 1.0, 1.0, eps).count

    def test_noise_floor_below_annealing_tolerance(self):
        # the descent simulation asks for cleaner evaluations than the
        # walk-based baseline accepts
        d = 10
        for eps in (1e-2, 1e-3, 1e-4, 1e-5):
            ours = eps_f_budget(eps, 10.0, 100.0)
            theirs = baseline_queries("belloni", d, 1.0, 1.0, eps).noise
            assert ours < theirs
