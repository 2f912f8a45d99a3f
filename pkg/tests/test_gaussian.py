from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jscc_bounds.errors import DegenerateConditioningError, InvalidProblemError
from jscc_bounds.gaussian import (
    GaussianProblem,
    LabeledCovariance,
    build_source_covariance,
    conditional_rho,
    gaussian_cmi,
    log_det_ratio,
    logdet_psd,
    mmse_reduce,
    sample_sources,
)

from oracles import det_cofactor, mmse_oracle, random_psd

REF = GaussianProblem(0.8, 0.8, 0.3, 1.0, 1.0)


def valid_problems():
    """Random feasible correlation triples built from unit vectors."""
    def build(v):
        a = np.array(v).reshape(3, 3)
        norms = np.linalg.norm(a, axis=1)
        if np.any(norms < 1e-3):
            return None
        a = a / norms[:, None]
        c = np.clip(a @ a.T, -1.0, 1.0)  # rounding can push |c| just past 1
        return GaussianProblem(float(c[0, 1]), float(c[0, 2]), float(c[1, 2]), 1.0, 1.0)
    return st.lists(st.floats(-1, 1), min_size=9, max_size=9).map(build).filter(
        lambda p: p is not None)


class TestSourceCovariance:
    def test_independent_is_identity(self):
        cov = build_source_covariance(GaussianProblem(0, 0, 0, 1, 1))
        assert np.array_equal(cov.matrix, np.eye(3))

    def test_reference_parameters(self):
        cov = build_source_covariance(REF)
        expected = [[1, .8, .8], [.8, 1, .3], [.8, .3, 1]]
        assert np.array_equal(cov.matrix, np.array(expected))
        assert cov.labels == ("S0", "S1p", "S2p")

    def test_infeasible_correlations_rejected(self):
        with pytest.raises(InvalidProblemError, match="eigenvalue"):
            GaussianProblem(1, 1, -1, 1, 1)

    def test_negative_power_rejected(self):
        with pytest.raises(InvalidProblemError):
            GaussianProblem(0, 0, 0, -1, 1)

    def test_round_trip(self):
        assert GaussianProblem.from_dict(REF.to_dict()) == REF


class TestConditionalRho:
    def test_no_common_part(self):
        dec = conditional_rho(GaussianProblem(0, 0, 0.3, 1, 1))
        assert dec.rho12_given_0 == pytest.approx(0.3, abs=1e-15)

    def test_reference_parameters(self):
        dec = conditional_rho(REF)
        assert dec.rho12_given_0 == pytest.approx(-0.34 / 0.36, abs=1e-14)
        assert dec.rho12_given_0 == pytest.approx(-0.9444, abs=1e-4)
        # negative value: sign carried by beta2
        assert dec.beta1 > 0 > dec.beta2

    def test_product_zero(self):
        dec = conditional_rho(GaussianProblem(0.6, 0.5, 0.3, 1, 1))
        assert dec.rho12_given_0 == pytest.approx(0.0, abs=1e-15)

    def test_degenerate(self):
        with pytest.raises(DegenerateConditioningError):
            conditional_rho(GaussianProblem(1.0, 0.3, 0.3, 1, 1))

    @given(valid_problems())
    @settings(max_examples=200, deadline=None)
    def test_split_invariants(self, problem):
        if max(abs(problem.rho01), abs(problem.rho02)) > 1 - 1e-9:
            return
        dec = conditional_rho(problem)
        assert abs(dec.rho12_given_0) <= 1
        assert abs(dec.beta1 * dec.beta2 - dec.rho12_given_0) <= 1e-12
        assert abs(dec.beta1) <= 1 + 1e-12 and abs(dec.beta2) <= 1 + 1e-12


class TestMMSE:
    def test_observed_target(self):
        cov = LabeledCovariance(("a", "b"), [[1.0, 0.5], [0.5, 1.0]])
        assert mmse_reduce(cov, "a", ["a", "b"]).error_variance == pytest.approx(0, abs=1e-12)

    def test_bivariate(self):
        cov = LabeledCovariance(("a", "b"), [[1.0, 0.5], [0.5, 1.0]])
        res = mmse_reduce(cov, "a", ["b"])
        assert res.error_variance == pytest.approx(0.75, abs=1e-15)
        assert res.coefficients[0] == pytest.approx(0.5, abs=1e-15)

    def test_random_instance_against_normal_equations(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            m = random_psd(rng, 3)
            cov = LabeledCovariance(("x", "y", "z"), m)
            res = mmse_reduce(cov, "x", ["y", "z"])
            coef, err = mmse_oracle(m, 0, [1, 2])
            assert np.allclose(res.coefficients, coef, atol=1e-9)
            assert res.error_variance == pytest.approx(err, abs=1e-9)

    def test_singular_block_uses_pseudo_inverse(self):
        m = np.array([[1.0, 0.5, 0.5], [0.5, 1.0, 1.0], [0.5, 1.0, 1.0]])
        res = mmse_reduce(LabeledCovariance(("x", "y", "z"), m), "x", ["y", "z"])
        assert res.pseudo_inverse
        assert res.error_variance == pytest.approx(0.75, abs=1e-10)

    @given(st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_more_observations_never_hurt(self, seed):
        rng = np.random.default_rng(seed)
        m = random_psd(rng, 5)
        cov = LabeledCovariance(tuple("abcde"), m)
        errs = [mmse_reduce(cov, "a", list("bcde")[:k]).error_variance for k in range(5)]
        scale = m[0, 0]
        assert all(e2 <= e1 + 1e-10 * scale for e1, e2 in zip(errs, errs[1:]))


class TestLogDet:
    def test_same_subset(self):
        cov = build_source_covariance(REF)
        assert log_det_ratio(cov, ["S0", "S1p"], ["S0", "S1p"]).value == 0.0

    def test_identity_blocks(self):
        cov = LabeledCovariance(tuple("abcd"), np.eye(4))
        assert log_det_ratio(cov, list("abc"), ["d"]).value == 0.0

    def test_random_against_cofactor(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            m = random_psd(rng, 4)
            got = logdet_psd(m).value
            want = math.log(det_cofactor(m.tolist()))
            assert abs(got - want) <= 1e-9 * max(1.0, abs(want))

    def test_label_order_irrelevant(self):
        rng = np.random.default_rng(6)
        cov = LabeledCovariance(tuple("abcd"), random_psd(rng, 4))
        a = log_det_ratio(cov, ["a", "b", "c"], ["d"]).value
        b = log_det_ratio(cov, ["c", "a", "b"], ["d"]).value
        assert a == pytest.approx(b, abs=1e-12)

    def test_singular_gives_flagged_infinity(self):
        m = np.array([[1.0, 1.0], [1.0, 1.0]])
        res = log_det_ratio(LabeledCovariance(("a", "b"), m), ["a", "b"], ["a"])
        assert res.singular and res.value == -math.inf

    @given(st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_adding_a_coordinate_bounded_by_its_variance(self, seed):
        rng = np.random.default_rng(seed)
        m = random_psd(rng, 4)
        d = np.sqrt(np.diag(m))
        m = m / np.outer(d, d)
        cov = LabeledCovariance(tuple("abcd"), m)
        gain = log_det_ratio(cov, list("abcd"), list("abc")).value
        assert gain <= 0.5 * math.log(cov.var("d")) + 1e-10


def test_cmi_matches_determinant_form():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = random_psd(rng, 5)
        cov = LabeledCovariance(tuple("abcde"), m)
        # I(a; b | c) = h(a|c) + h(b|c) - h(ab|c) - ... via joint determinants
        want = (log_det_ratio(cov, ["a", "c"], ["c"]).value
                + log_det_ratio(cov, ["b", "c"], ["a", "b", "c"]).value)
        assert gaussian_cmi(m, [0], [1], [2]) == pytest.approx(want, abs=1e-10)


class TestSampling:
    def test_empirical_correlation(self):
        s = sample_sources(REF, None, 1_000_000, 0)
        assert abs(np.corrcoef(s.s1p, s.s2p)[0, 1] - 0.3) <= 0.005

    def test_unit_beta_copies_u(self):
        from jscc_bounds.gaussian import SourceDecomposition
        p = GaussianProblem(0.0, 0.0, 1.0, 1, 1)
        s = sample_sources(p, SourceDecomposition(1.0, 1.0, 1.0), 100, 1)
        assert np.array_equal(s.u1, s.u)

    def test_deterministic(self):
        a = sample_sources(REF, None, 1000, 42)
        b = sample_sources(REF, None, 1000, 42)
        for x, y in zip(a, b):
            assert x.tobytes() == y.tobytes()

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_sources(REF, None, 0, 0)
