from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jscc_bounds.correlation import (
    ace_maximal_correlation,
    correlation_ratio,
    correlation_ratio_forms,
    correlation_report,
    dsbs,
    gaussian_maximal_correlation_mc,
    markov_joint,
    maximal_correlation,
    pearson,
    pearson_samples,
    random_markov,
    random_pmf,
    verify_dpi,
    verify_lemma_chain,
    verify_tensorization,
)
from jscc_bounds.errors import DegenerateVariableError, NotMarkovError
from jscc_bounds.pmf import JointPmf

DIAG = JointPmf.from_array(np.diag([0.2, 0.5, 0.3]), ("W1", "W2"), [["-1", "0", "2"]] * 2)
INDEP = JointPmf.from_array(np.outer([0.2, 0.8], [0.3, 0.3, 0.4]), ("W1", "W2"),
                            [["0", "1"], ["-1", "0", "1"]])


def q_matrix_oracle(t: np.ndarray) -> float:
    """Second singular value of ``p(a, b) / sqrt(p(a) p(b))`` on the support."""
    pa, pb = t.sum(1), t.sum(0)
    t = t[pa > 0][:, pb > 0]
    q = t / np.sqrt(np.outer(pa[pa > 0], pb[pb > 0]))
    s = np.linalg.svd(q, compute_uv=False)
    return float(s[1]) if s.size > 1 else 0.0


class TestPearson:
    def test_identical(self):
        assert pearson(DIAG, "W1", "W2") == pytest.approx(1.0, abs=1e-14)

    def test_independent(self):
        assert abs(pearson(INDEP, "W1", "W2")) <= 1e-12

    def test_samples(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(100_000)
        y = 0.5 * x + np.sqrt(0.75) * rng.standard_normal(100_000)
        assert pearson_samples(x, y) == pytest.approx(0.5, abs=0.01)

    def test_zero_variance(self):
        p = JointPmf.from_array([[0.5, 0.5]], ("W1", "W2"))
        with pytest.raises(DegenerateVariableError):
            pearson(p, "W1", "W2")


class TestRatio:
    def test_identical(self):
        assert correlation_ratio(DIAG, "W1", ["W2"]) == pytest.approx(1.0, abs=1e-14)

    def test_independent(self):
        assert correlation_ratio(INDEP, "W1", ["W2"]) == pytest.approx(0.0, abs=1e-7)

    def test_dsbs(self):
        assert correlation_ratio(dsbs(0.1), "W1", ["W2"]) == pytest.approx(0.8, abs=1e-14)

    def test_zero_variance(self):
        p = JointPmf.from_array([[0.5, 0.5]], ("W1", "W2"))
        with pytest.raises(DegenerateVariableError):
            correlation_ratio(p, "W1", ["W2"])

    @given(st.integers(0, 10_000))
    @settings(max_examples=200, deadline=None)
    def test_two_forms(self, seed):
        rng = np.random.default_rng(seed)
        p = random_pmf((3, 3, 2), ("W1", "W2", "W0"), rng)
        for given_ in ([], ["W0"]):
            f = correlation_ratio_forms(p, "W1", ["W2"], given_)
            assert f.explained == pytest.approx(f.residual, abs=1e-12)


class TestMaximal:
    def test_independent(self):
        assert maximal_correlation(INDEP, ["W1"], ["W2"]) == pytest.approx(0, abs=1e-7)

    @pytest.mark.parametrize("p", [0.0, 0.1, 0.3, 0.5, 0.9])
    def test_dsbs(self, p):
        t = dsbs(p).table
        assert maximal_correlation(dsbs(p), "W1", "W2") == pytest.approx(abs(1 - 2 * p), abs=1e-12)
        assert q_matrix_oracle(t) == pytest.approx(abs(1 - 2 * p), abs=1e-12)

    def test_against_ace(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            shape = tuple(int(k) for k in rng.integers(2, 5, 2))
            p = random_pmf(shape, ("W1", "W2"), rng)
            m = maximal_correlation(p, "W1", "W2")
            assert ace_maximal_correlation(p, "W1", "W2", seed=3) == pytest.approx(m, abs=1e-8)
            assert q_matrix_oracle(p.table) == pytest.approx(m, abs=1e-12)

    @given(st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_relabeling_and_recoding(self, seed):
        rng = np.random.default_rng(seed)
        p = random_pmf((3, 4), ("W1", "W2"), rng)
        perm = rng.permutation(4)
        q = JointPmf.from_array(p.table[:, perm], ("W1", "W2"),
                                [p.alphabets[0], [repr(float(np.exp(v))) for v in range(4)]])
        assert maximal_correlation(q, "W1", "W2") == pytest.approx(
            maximal_correlation(p, "W1", "W2"), abs=1e-12)

    def test_gaussian_equality(self):
        est = gaussian_maximal_correlation_mc(0.5, 1_000_000, 64, seed=0)
        assert est == pytest.approx(0.5, abs=0.02)


class TestReport:
    def test_chain_on_report(self):
        rng = np.random.default_rng(2)
        p = random_pmf((3, 3, 2), ("W1", "W2", "W0"), rng)
        r = correlation_report(p, "W1", "W2", ["W0"])
        assert abs(r.pearson) <= min(r.ratio_12, r.ratio_21) + 1e-9
        assert max(r.ratio_12, r.ratio_21) <= r.maximal + 1e-9 <= 1 + 2e-9
        assert set(r.conditional) == {"W0"}


class TestSuites:
    def test_lemma_chain(self):
        rng = np.random.default_rng(3)
        rep = verify_lemma_chain([random_pmf((3, 3, 3), ("W0", "W1", "W2"), rng)
                                  for _ in range(100)])
        assert rep.passed and rep.instances == 100

    def test_lemma_chain_degenerate_w0(self):
        rng = np.random.default_rng(4)
        pair = rng.dirichlet(np.ones(9)).reshape(1, 3, 3)
        p = JointPmf.from_array(pair, ("W0", "W1", "W2"),
                                [["0"], ["-1", "0", "1"], ["0", "1", "3"]])
        t = correlation_ratio(p, "W1", ["W2", "W0"])
        assert t == pytest.approx(correlation_ratio(p, "W1", ["W2"]), abs=1e-12)
        assert verify_lemma_chain([p]).passed

    def test_lemma_chain_independent(self):
        t = np.einsum("a,b,c->abc", [0.5, 0.5], [0.2, 0.3, 0.5], [0.6, 0.4])
        p = JointPmf.from_array(t, ("W0", "W1", "W2"),
                                [["0", "1"], ["0", "1", "2"], ["0", "1"]])
        assert correlation_ratio(p, "W1", ["W2", "W0"]) == pytest.approx(0, abs=1e-7)
        assert verify_lemma_chain([p]).passed

    def test_dpi(self):
        rng = np.random.default_rng(5)
        assert verify_dpi([random_markov(rng) for _ in range(100)]).passed

    def test_dpi_equality(self):
        rng = np.random.default_rng(6)
        pmfs = [random_markov(rng, identical=True) for _ in range(50)]
        pmfs += [random_markov(rng, ny=2, nw=1, identical=True) for _ in range(50)]
        rep = verify_dpi(pmfs, check_equality=True)
        assert rep.passed and "theta_equality" in rep.worst

    def test_dpi_middle_equality_is_not_general(self):
        rng = np.random.default_rng(7)
        p = random_markov(rng, ny=3, nw=2, identical=True)
        w = ["W"]
        lhs = correlation_ratio(p, "X", ["Z"], w)
        rhs = correlation_ratio(p, "X", ["Y"], w) * maximal_correlation(p, ["Z"], ["Y"], w)
        assert lhs < rhs - 1e-6

    def test_dpi_independent_x(self):
        p_yw = np.full((2, 2), 0.25)
        px = np.broadcast_to([0.3, 0.7], (2, 2, 2))
        pz = np.array([[[0.9, 0.1], [0.2, 0.8]], [[0.5, 0.5], [0.1, 0.9]]])
        pmf = markov_joint(p_yw, px, pz, {"X": [0, 1], "Y": [0, 1], "Z": [0, 1]})
        assert abs(pearson(pmf, "X", "Z", ["W"])) <= 1e-12
        assert maximal_correlation(pmf, ["X"], ["Z"], ["W"]) == pytest.approx(0, abs=1e-7)

    def test_non_markov_rejected(self):
        from jscc_bounds.correlation import check_markov
        t = np.zeros((2, 1, 2, 1))
        t[0, 0, 0, 0] = t[1, 0, 1, 0] = 0.5
        with pytest.raises(NotMarkovError):
            check_markov(JointPmf.from_array(t, ("X", "Y", "Z", "W")))

    def test_tensorization_dsbs(self):
        res = verify_tensorization(dsbs(0.1), 2)
        assert res.product == pytest.approx(0.8, abs=1e-9)

    def test_tensorization_n1_and_independent(self):
        rng = np.random.default_rng(8)
        p = random_pmf((3, 3), ("W1", "W2"), rng)
        assert verify_tensorization(p, 1).margin == pytest.approx(0, abs=1e-15)
        assert verify_tensorization(INDEP, 3).product == pytest.approx(0, abs=1e-7)
