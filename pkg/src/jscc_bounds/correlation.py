"""Correlation coefficient, correlation ratio and maximal correlation.

Exact computations on finite joint pmfs, in plain and conditional form,
plus randomized property checks of the standard inequalities between
them.  Conditional versions normalise by expected conditional variances:

    rho(A, B | C)   = E[cov(A, B | C)] / sqrt(E[var(A | C)] E[var(B | C)])
    theta(A, B | C) = sqrt(E[var(E[A | B, C] | C)] / E[var(A | C)])

and the conditional maximal correlation is the supremum of the former
over functions ``f(A, C)``, ``g(B, C)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .errors import DegenerateVariableError, NotMarkovError
from .pmf import JointPmf

VAR_TOL = 1e-15


def _as_list(labels) -> list[str]:
    return [labels] if isinstance(labels, str) else list(labels)


def _grouped(pmf: JointPmf, groups: Sequence[Sequence[str]]) -> np.ndarray:
    """Marginal on the given label groups, each group flattened into one axis."""
    flat = [lab for g in groups for lab in g]
    arr = pmf.marginal(flat).table if flat else np.array(1.0)
    shape = [int(np.prod([len(pmf.alphabets[pmf.axes([lab])[0]]) for lab in g])) for g in groups]
    return arr.reshape(shape)


def _conditional_moments(pmf: JointPmf, a: str, b: str, given: Sequence[str]):
    """Per-slice weights, variances and covariance of two real coordinates."""
    t = _grouped(pmf, [[a], [b], list(given)])
    va, vb = pmf.values(a), pmf.values(b)
    pc = t.sum(axis=(0, 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(pc > 0, t / np.where(pc > 0, pc, 1.0), 0.0)
    ea = np.einsum("ijc,i->c", cond, va)
    eb = np.einsum("ijc,j->c", cond, vb)
    var_a = np.einsum("ijc,i->c", cond, va ** 2) - ea ** 2
    var_b = np.einsum("ijc,j->c", cond, vb ** 2) - eb ** 2
    cov = np.einsum("ijc,i,j->c", cond, va, vb) - ea * eb
    return pc, np.maximum(var_a, 0.0), np.maximum(var_b, 0.0), cov


def pearson(pmf: JointPmf, a: str, b: str, given: Sequence[str] | str = ()) -> float:
    """(Conditional) correlation coefficient of two real-valued coordinates."""
    given = _as_list(given)
    pc, var_a, var_b, cov = _conditional_moments(pmf, a, b, given)
    ea, eb, ec = pc @ var_a, pc @ var_b, pc @ cov
    if ea <= VAR_TOL or eb <= VAR_TOL:
        raise DegenerateVariableError(f"{a} or {b} has zero (conditional) variance")
    return float(np.clip(ec / math.sqrt(ea * eb), -1.0, 1.0))


def pearson_samples(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.var(x) <= VAR_TOL or np.var(y) <= VAR_TOL:
        raise DegenerateVariableError("samples have zero variance")
    return float(np.corrcoef(x, y)[0, 1])


@dataclass(frozen=True)
class RatioForms:
    """Both variance-decomposition forms of the squared correlation ratio."""

    explained: float
    residual: float

    @property
    def theta(self) -> float:
        return math.sqrt(min(max(self.explained, 0.0), 1.0))


def correlation_ratio_forms(pmf: JointPmf, target: str, predictors: Sequence[str] | str,
                            given: Sequence[str] | str = ()) -> RatioForms:
    predictors = _as_list(predictors)
    given = _as_list(given)
    t = _grouped(pmf, [[target], predictors, given])
    v = pmf.values(target)
    p_bc = t.sum(axis=0)
    p_c = p_bc.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        m_bc = np.where(p_bc > 0, np.einsum("ijc,i->jc", t, v) / np.where(p_bc > 0, p_bc, 1), 0)
        s_bc = np.where(p_bc > 0, np.einsum("ijc,i->jc", t, v * v) / np.where(p_bc > 0, p_bc, 1), 0)
        m_c = np.where(p_c > 0, np.einsum("ijc,i->c", t, v) / np.where(p_c > 0, p_c, 1), 0)
        s_c = np.where(p_c > 0, np.einsum("ijc,i->c", t, v * v) / np.where(p_c > 0, p_c, 1), 0)
    total = float(p_c @ np.maximum(s_c - m_c ** 2, 0.0))  # E[var(A | C)]
    if total <= VAR_TOL:
        raise DegenerateVariableError(f"{target} has zero (conditional) variance")
    explained = float(np.sum(p_bc * (m_bc - m_c[None, :]) ** 2))  # E[var(E[A|B,C] | C)]
    residual = float(np.sum(p_bc * np.maximum(s_bc - m_bc ** 2, 0.0)))  # E[var(A | B, C)]
    return RatioForms(explained / total, 1.0 - residual / total)


def correlation_ratio(pmf: JointPmf, target: str, predictors: Sequence[str] | str,
                      given: Sequence[str] | str = ()) -> float:
    """(Conditional) correlation ratio of a real coordinate on any predictors."""
    return correlation_ratio_forms(pmf, target, predictors, given).theta


def _centered_blocks(pmf: JointPmf, a: Sequence[str], b: Sequence[str], given: Sequence[str]):
    """Per-slice normalised and centred joint matrices ``Q_c``.

    Rows and columns with zero mass are dropped.  The top singular value of
    the slice matrix is that slice's maximal correlation.
    """
    t = _grouped(pmf, [a, b, given])
    blocks = []
    for c in range(t.shape[2]):
        m = t[:, :, c]
        pc = m.sum()
        if pc <= 0:
            continue
        m = m / pc
        pa, pb = m.sum(axis=1), m.sum(axis=0)
        ra, rb = pa > 0, pb > 0
        m, pa, pb = m[np.ix_(ra, rb)], pa[ra], pb[rb]
        q = m / np.sqrt(np.outer(pa, pb)) - np.outer(np.sqrt(pa), np.sqrt(pb))
        blocks.append((pc, q))
    return blocks


def maximal_correlation(pmf: JointPmf, a: Sequence[str] | str, b: Sequence[str] | str,
                        given: Sequence[str] | str = ()) -> float:
    """(Conditional) maximal correlation via singular values.

    Unconditionally this is the second singular value of
    ``p(a, b) / sqrt(p(a) p(b))``, i.e. the first of its centred version.
    Conditionally the supremum of the normalised expected covariance puts
    all weight on the best slice of the conditioner, giving the largest
    singular value of the block-diagonal centred matrix.
    """
    blocks = _centered_blocks(pmf, _as_list(a), _as_list(b), _as_list(given))
    best = 0.0
    for _, q in blocks:
        if q.size:
            best = max(best, float(np.linalg.norm(q, 2)))
    return min(best, 1.0)


def ace_maximal_correlation(pmf: JointPmf, a: Sequence[str] | str, b: Sequence[str] | str,
                            given: Sequence[str] | str = (), seed: int = 0,
                            max_iter: int = 200000, tol: float = 1e-15) -> float:
    """Maximal correlation by alternating conditional expectations.

    Starts from a random ``f(A, C)``; repeatedly sets ``g = E[f | B, C]``
    and ``f = E[g | A, C]``, centring within each slice of ``C`` and
    normalising ``E[f^2] = 1``.  ``sqrt(E[g^2])`` increases to the answer.
    """
    t = _grouped(pmf, [_as_list(a), _as_list(b), _as_list(given)])
    p_ac = t.sum(axis=1)
    p_bc = t.sum(axis=0)
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(p_ac.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        inv_ac = np.where(p_ac > 0, 1.0 / p_ac, 0.0)
        inv_bc = np.where(p_bc > 0, 1.0 / p_bc, 0.0)
        p_c = p_ac.sum(axis=0)
        inv_c = np.where(p_c > 0, 1.0 / p_c, 0.0)

    def center(h, p):
        return h - (np.sum(h * p, axis=0) * inv_c)[None, :]

    f = center(f, p_ac)
    norm_f = math.sqrt(float(np.sum(p_ac * f * f)))
    if norm_f == 0:
        return 0.0
    f /= norm_f
    value = 0.0
    for _ in range(max_iter):
        g = np.einsum("ijc,ic->jc", t, f) * inv_bc
        g = center(g, p_bc)
        new = math.sqrt(max(float(np.sum(p_bc * g * g)), 0.0))
        if new == 0:
            return 0.0
        f = np.einsum("ijc,jc->ic", t, g / new) * inv_ac
        f = center(f, p_ac)
        nf = math.sqrt(max(float(np.sum(p_ac * f * f)), 0.0))
        if nf == 0:
            return new
        f /= nf
        if abs(new - value) <= tol:
            value = new
            break
        value = new
    return min(value, 1.0)


@dataclass(frozen=True)
class CorrelationReport:
    pearson: float
    ratio_12: float
    ratio_21: float
    maximal: float
    conditional: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"pearson": self.pearson, "ratio_12": self.ratio_12, "ratio_21": self.ratio_21,
                "maximal": self.maximal, "conditional": self.conditional}


def correlation_report(pmf: JointPmf, a: str, b: str,
                       given: Sequence[str] = ()) -> CorrelationReport:
    cond = {}
    for c in given:
        cond[c] = {"pearson": pearson(pmf, a, b, [c]),
                   "ratio_12": correlation_ratio(pmf, a, [b], [c]),
                   "ratio_21": correlation_ratio(pmf, b, [a], [c]),
                   "maximal": maximal_correlation(pmf, [a], [b], [c])}
    return CorrelationReport(pearson(pmf, a, b), correlation_ratio(pmf, a, [b]),
                             correlation_ratio(pmf, b, [a]), maximal_correlation(pmf, [a], [b]),
                             cond)


# ------------------------------------------------------------------ property suites

@dataclass
class PropertyReport:
    """Worst margin (``rhs - lhs``; negative means violated) per checked property."""

    instances: int = 0
    tol: float = 1e-9
    worst: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)

    def record(self, name: str, margin: float):
        prev = self.worst.get(name, math.inf)
        self.worst[name] = min(prev, float(margin))
        if margin < -self.tol:
            self.violations[name] = self.violations.get(name, 0) + 1
        else:
            self.violations.setdefault(name, 0)

    @property
    def passed(self) -> bool:
        return not any(self.violations.values())

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    def to_dict(self) -> dict:
        return {"instances": self.instances, "tol": self.tol, "passed": self.passed,
                "worst": dict(sorted(self.worst.items())),
                "violations": dict(sorted(self.violations.items()))}


def random_pmf(shape: Sequence[int], names: Sequence[str], rng: np.random.Generator,
               real_values: bool = True) -> JointPmf:
    """Dirichlet-random full-support pmf; symbols are random reals when ``real_values``."""
    table = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    alphabets = []
    for n in shape:
        vals = np.sort(rng.normal(size=n)) if real_values else np.arange(n)
        alphabets.append([repr(float(v)) for v in vals])
    return JointPmf.from_array(table, names, alphabets)


def verify_lemma_chain(pmfs: Sequence[JointPmf], tol: float = 1e-9) -> PropertyReport:
    """Ordering chains, monotonicity and the product identity on ``(W0, W1, W2)`` pmfs."""
    rep = PropertyReport(tol=tol)
    for pmf in pmfs:
        rep.instances += 1
        r = abs(pearson(pmf, "W1", "W2"))
        t12 = correlation_ratio(pmf, "W1", ["W2"])
        t21 = correlation_ratio(pmf, "W2", ["W1"])
        m = maximal_correlation(pmf, ["W1"], ["W2"])
        rep.record("rho<=theta12", t12 - r)
        rep.record("rho<=theta21", t21 - r)
        rep.record("theta12<=rho_m", m - t12)
        rep.record("theta21<=rho_m", m - t21)
        rep.record("rho_m<=1", 1 - m)
        rc = abs(pearson(pmf, "W1", "W2", ["W0"]))
        tc = correlation_ratio(pmf, "W1", ["W2"], ["W0"])
        mc = maximal_correlation(pmf, ["W1"], ["W2"], ["W0"])
        rep.record("cond_rho<=cond_theta", tc - rc)
        rep.record("cond_theta<=cond_rho_m", mc - tc)
        rep.record("cond_rho_m<=1", 1 - mc)
        t_joint = correlation_ratio(pmf, "W1", ["W2", "W0"])
        t_0 = correlation_ratio(pmf, "W1", ["W0"])
        rep.record("theta_monotone", t_joint - t_0)
        rep.record("rho_m_monotone", maximal_correlation(pmf, ["W1"], ["W2", "W0"])
                   - maximal_correlation(pmf, ["W1"], ["W0"]))
        lhs = 1 - t_joint ** 2
        rhs = (1 - t_0 ** 2) * (1 - tc ** 2)
        rep.record("product_identity", -abs(lhs - rhs))
        for target, pred, given in (("W1", ["W2"], []), ("W1", ["W2"], ["W0"]),
                                    ("W1", ["W2", "W0"], [])):
            forms = correlation_ratio_forms(pmf, target, pred, given)
            rep.record("ratio_two_forms", -abs(forms.explained - forms.residual))
    return rep


def markov_joint(p_yw, p_x_given_yw, p_z_given_yw, values=None) -> JointPmf:
    """Joint of ``(X, Y, Z, W)`` with ``X - (Y, W) - Z`` by construction.

    ``p_yw[y, w]``, ``p_x_given_yw[y, w, x]``, ``p_z_given_yw[y, w, z]``.
    ``values`` optionally maps ``"X"``, ``"Y"``, ``"Z"``, ``"W"`` to real symbol values.
    """
    p_yw = np.asarray(p_yw, dtype=float)
    px = np.asarray(p_x_given_yw, dtype=float)
    pz = np.asarray(p_z_given_yw, dtype=float)
    table = np.einsum("yw,ywx,ywz->xyzw", p_yw, px, pz)
    names = ("X", "Y", "Z", "W")
    values = values or {}
    alphabets = [[repr(float(v)) for v in values[n]] if n in values
                 else [str(i) for i in range(k)] for n, k in zip(names, table.shape)]
    pmf = JointPmf.from_array(table, names, alphabets)
    check_markov(pmf)
    return pmf


def check_markov(pmf: JointPmf, tol: float = 1e-12) -> None:
    """Raise unless ``X`` and ``Z`` are independent given ``(Y, W)``."""
    t = pmf.marginal(["X", "Y", "Z", "W"]).table
    p_yw = t.sum(axis=(0, 2))
    p_xyw = t.sum(axis=2)
    p_zyw = t.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        prod = np.where(p_yw[None, :, None, :] > 0,
                        p_xyw[:, :, None, :] * p_zyw[None, :, :, :]
                        / np.where(p_yw > 0, p_yw, 1.0)[None, :, None, :], 0.0)
    if np.max(np.abs(prod - t)) > tol:
        raise NotMarkovError("X and Z are not conditionally independent given (Y, W)")


def random_markov(rng: np.random.Generator, nx=3, ny=3, nz=3, nw=2,
                  identical: bool = False) -> JointPmf:
    p_yw = rng.dirichlet(np.ones(ny * nw)).reshape(ny, nw)
    px = rng.dirichlet(np.ones(nx), (ny, nw))
    pz = px.copy() if identical else rng.dirichlet(np.ones(nz), (ny, nw))
    vx = np.sort(rng.normal(size=nx))
    values = {"X": vx, "Z": vx if identical else np.sort(rng.normal(size=pz.shape[2])),
              "Y": np.sort(rng.normal(size=ny))}
    return markov_joint(p_yw, px, pz, values)


def verify_dpi(pmfs: Sequence[JointPmf], tol: float = 1e-9,
               check_equality: bool = False) -> PropertyReport:
    """Data-processing inequalities for ``X - (Y, W) - Z``.

    With ``check_equality`` (for pmfs whose ``(X, Y, W)`` and ``(Z, Y, W)``
    laws coincide) the correlation and maximal-correlation bounds are
    also checked for equality; the middle bound is checked for equality
    only when ``Y`` is binary and ``W`` is constant, the only setting where
    it is tight in general.
    """
    rep = PropertyReport(tol=tol)
    for pmf in pmfs:
        check_markov(pmf)
        rep.instances += 1
        w = ["W"]
        rho_xz = abs(pearson(pmf, "X", "Z", w))
        th_xy = correlation_ratio(pmf, "X", ["Y"], w)
        th_zy = correlation_ratio(pmf, "Z", ["Y"], w)
        th_xz = correlation_ratio(pmf, "X", ["Z"], w)
        m_xz = maximal_correlation(pmf, ["X"], ["Z"], w)
        m_xy = maximal_correlation(pmf, ["X"], ["Y"], w)
        m_zy = maximal_correlation(pmf, ["Z"], ["Y"], w)
        rep.record("rho<=theta*theta", th_xy * th_zy - rho_xz)
        rep.record("theta<=theta*rho_m", th_xy * m_zy - th_xz)
        rep.record("rho_m<=rho_m*rho_m", m_xy * m_zy - m_xz)
        if check_equality:
            rep.record("rho_equality", -abs(th_xy * th_zy - rho_xz))
            rep.record("rho_m_equality", -abs(m_xy * m_zy - m_xz))
            ny = len(pmf.alphabets[pmf.axes(["Y"])[0]])
            nw = len(pmf.alphabets[pmf.axes(["W"])[0]])
            if ny == 2 and nw == 1:
                rep.record("theta_equality", -abs(th_xy * m_zy - th_xz))
    return rep


def product_pmf(pmf: JointPmf, n: int) -> JointPmf:
    """``n`` independent copies of a pair pmf, as a pmf over ``(W1^n, W2^n)`` super-symbols."""
    if n < 1:
        raise ValueError("n must be at least 1")
    t = pmf.table
    n1, n2 = t.shape
    out = t
    for _ in range(n - 1):
        out = np.einsum("ab,cd->acbd", out, t).reshape(out.shape[0] * n1, out.shape[1] * n2)
    return JointPmf.from_array(out, ("W1", "W2"))


@dataclass(frozen=True)
class TensorizationResult:
    single: float
    product: float

    @property
    def margin(self) -> float:
        return self.single - self.product


def verify_tensorization(pmf: JointPmf, n: int) -> TensorizationResult:
    """Maximal correlation of ``n`` iid copies against the single-letter value."""
    single = maximal_correlation(JointPmf.from_array(pmf.table, ("W1", "W2")), "W1", "W2")
    prod = product_pmf(pmf, n)
    return TensorizationResult(single, maximal_correlation(prod, "W1", "W2"))


def dsbs(p: float) -> JointPmf:
    """Doubly symmetric binary pair with crossover ``p`` on symbols ``-1, +1``."""
    t = np.array([[1 - p, p], [p, 1 - p]]) / 2
    return JointPmf.from_array(t, ("W1", "W2"), [["-1", "1"], ["-1", "1"]])


def gaussian_maximal_correlation_mc(rho: float, n: int = 1_000_000, bins: int = 64,
                                    seed: int = 0) -> float:
    """Maximal correlation of a quantised Gaussian pair estimated from samples.

    Each coordinate is cut into ``bins`` equiprobable cells of the standard
    normal law; the empirical cell frequencies form the pmf.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = rho * x + math.sqrt(1 - rho * rho) * rng.standard_normal(n)
    edges = norm.ppf(np.linspace(0, 1, bins + 1)[1:-1])
    ix = np.searchsorted(edges, x)
    iy = np.searchsorted(edges, y)
    counts = np.zeros((bins, bins))
    np.add.at(counts, (ix, iy), 1.0)
    return maximal_correlation(JointPmf.from_array(counts / n, ("W1", "W2")), "W1", "W2")
