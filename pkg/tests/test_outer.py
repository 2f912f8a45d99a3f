from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jscc_bounds.gaussian import GaussianProblem
from jscc_bounds.outer import (
    CONSTRAINTS,
    OuterGrid,
    bisect_min_distortion,
    check_constraints,
    conditional_correlation,
    no_common_constraints,
    outer_membership,
    rd_branches,
    rd_joint,
    rd_joint_given_common,
    symmetric_member,
    symmetric_outer_min_distortion,
)

from oracles import rd_equal_oracle

REF = GaussianProblem(0.8, 0.8, 0.3, 1.0, 1.0)
SMALL = OuterGrid(21, 11, 11)


class TestRd:
    def test_no_rate_at_unit_distortion(self):
        assert rd_joint(1.0, 1.0, 0.7) == 0.0

    def test_independent_sources(self):
        assert rd_joint(0.25, 0.25, 0.0) == pytest.approx(math.log(4), abs=1e-15)

    def test_symmetric_against_branch_oracle(self):
        for rho in (0.3, -0.6, 0.9):
            for d in (0.05, 0.2, 0.5, 0.9):
                want = rd_equal_oracle(d, rho)
                assert float(rd_joint(d, d, rho)) == pytest.approx(want, abs=1e-12)

    def test_argument_order_irrelevant(self):
        assert rd_joint(0.2, 0.6, 0.5) == rd_joint(0.6, 0.2, 0.5)

    def test_nonpositive_distortion(self):
        assert rd_joint(0.0, 0.5, 0.3) == math.inf

    def test_continuity_at_boundaries(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            rho = rng.uniform(0.05, 0.95)
            d1 = rng.uniform(0.05, 0.95)
            # boundary rho^2 = (1 - d2)/(1 - d1): d2 = 1 - rho^2 (1 - d1)
            d2 = 1 - rho ** 2 * (1 - d1)
            a, _, c = rd_branches(d1, d2, rho)
            assert a == pytest.approx(c, abs=1e-9)
            # boundary rho^2 = (1 - d1)(1 - d2)
            d2 = 1 - rho ** 2 / (1 - d1)
            if d1 <= d2 <= 1:
                _, b, c = rd_branches(d1, d2, rho)
                assert b == pytest.approx(c, abs=1e-9)

    @given(st.floats(0.01, 1), st.floats(0.01, 1), st.floats(-0.99, 0.99),
           st.floats(0, 0.2), st.floats(0, 0.2))
    @settings(max_examples=300, deadline=None)
    def test_monotone(self, d1, d2, rho, e1, e2):
        assert rd_joint(min(d1 + e1, 1), min(d2 + e2, 1), rho) <= rd_joint(d1, d2, rho) + 1e-12

    def test_given_common_without_common_part(self):
        prob = GaussianProblem(0, 0, 0.4, 1, 1)
        for d1, d2 in ((0.2, 0.3), (0.5, 0.5), (0.9, 0.1)):
            assert rd_joint_given_common(d1, d2, prob) == rd_joint(d1, d2, 0.4)

    def test_given_common_substitution(self):
        r = conditional_correlation(REF)
        assert rd_joint_given_common(0.2, 0.2, REF) == rd_joint(0.2 / 0.36, 0.2 / 0.36, r)

    def test_given_common_unit_scaled_distortion(self):
        assert rd_joint_given_common(0.36, 0.36, REF) == 0.0


class TestConstraints:
    def test_unit_distortion_all_slack(self):
        m = check_constraints(1, 1, REF, 0.0, 0.0, 1.0, 0.0, 0.0)
        assert all(v >= 0 for v in m.values())
        assert list(m) == list(CONSTRAINTS)

    def test_no_power_small_distortion(self):
        m = check_constraints(0.01, 0.01, REF.with_powers(0.0), 0.0, 0.0, 1.0, 0.0, 0.0)
        assert m["sum_rate"] < 0

    def test_reduces_without_common_part(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            rho12 = rng.uniform(-0.9, 0.9)
            p = float(np.exp(rng.uniform(-1, 3)))
            prob = GaussianProblem(0, 0, rho12, p, p)
            d1, d2 = rng.uniform(0.05, 1, 2)
            rh = rng.uniform(0, 1)
            rh0 = rng.uniform(0, abs(rho12))
            b1 = rng.uniform(abs(rho12), 1)
            th1 = rng.uniform(rh, 1) if rh < 1 else 1.0
            th2 = min(rh / th1, 1.0) if th1 > 0 else 0.0
            a = check_constraints(d1, d2, prob, rh, rh0, b1, th1, th2)
            b = no_common_constraints(d1, d2, rho12, p, p, rh, rh0, b1, th1, th2)
            for k in CONSTRAINTS:
                assert a[k] == pytest.approx(b[k], abs=1e-12), k


class TestMembership:
    def test_unit_distortion_member(self):
        for prob in (REF, GaussianProblem(0, 0, 0.3, 0, 0)):
            assert outer_membership(1, 1, prob, SMALL).member

    def test_tiny_distortion_fails_first(self):
        v = outer_membership(1e-6, 1e-6, REF, SMALL)
        assert not v.member and v.violated_constraint == "sum_rate"
        assert v.tightest_margin < 0

    def test_witness_consistency(self):
        v = outer_membership(0.4, 0.45, REF.with_powers(2.0), SMALL)
        assert v.member and v.violated_constraint is None
        for rec in v.witness.records:
            assert v.witness.rho_hat <= rec.theta1 * rec.theta2 + 1e-12

    def test_verdict_json(self):
        d = outer_membership(0.5, 0.5, REF, SMALL).to_dict()
        assert d["member"] is True and d["grid"] == SMALL.to_dict()

    @given(st.integers(0, 1000), st.floats(0.01, 0.99), st.floats(0.01, 0.99),
           st.floats(0.0, 0.3))
    @settings(max_examples=40, deadline=None)
    def test_monotone(self, seed, d1, d2, delta):
        rng = np.random.default_rng(seed)
        while True:
            r = rng.uniform(-0.9, 0.9, 3)
            try:
                prob = GaussianProblem(*r, *(2 * [float(np.exp(rng.uniform(-1, 2)))]))
                break
            except ValueError:
                continue
        if outer_membership(d1, d2, prob, SMALL).member:
            assert outer_membership(min(d1 + delta, 1), min(d2 + delta, 1), prob, SMALL).member


class TestSymmetric:
    def test_no_power_zero_rate_distortion(self):
        # with P = 0 the sum rate must vanish: D_min is the zero-rate distortion 1
        d = symmetric_outer_min_distortion(REF.with_powers(0.0), SMALL, 1e-9)
        assert d == pytest.approx(1.0, abs=1e-8)

    def test_large_power(self):
        assert symmetric_outer_min_distortion(REF.with_powers(1e6), SMALL, 1e-9) < 1e-3

    def test_bisection_tolerance(self):
        d = bisect_min_distortion(lambda x: x >= 0.3, 1e-8)
        assert 0.3 <= d <= 0.3 + 1e-8

    def test_direct_form_agrees(self):
        for p in (0.5, 3.0, 30.0):
            prob = REF.with_powers(p)
            for d in np.linspace(0.05, 0.95, 10):
                general = outer_membership(d, d, prob, SMALL).member
                assert symmetric_member(d, prob, SMALL) == general

    def test_requires_equal_powers(self):
        with pytest.raises(ValueError):
            symmetric_outer_min_distortion(GaussianProblem(0, 0, 0.3, 1, 2))
