"""Gaussian source model and covariance toolkit.

Three unit-variance sources ``(S0, S1', S2')`` with a common component
``S0`` are sent over the additive MAC ``Y = X1 + X2 + Z`` with unit noise.
This module holds the problem description, covariance bookkeeping with
named coordinates, Schur-complement MMSE, log-determinants and Gaussian
(conditional) mutual information, plus seeded sampling of the source
decomposition ``S_k' = rho_0k S0 + sqrt(1 - rho_0k^2) U_k`` with
``U_k = beta_k U + sqrt(1 - beta_k^2) B_k``.

All logarithms are natural (nats).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import lapack

from .errors import DegenerateConditioningError, InvalidProblemError, ValidationError

PSD_TOL = 1e-9
SYMMETRY_TOL = 1e-12
SOURCE_LABELS = ("S0", "S1p", "S2p")


@dataclass(frozen=True)
class GaussianProblem:
    """Correlations of ``(S0, S1', S2')`` and the two transmit powers.

    Powers are linear (not dB); source variances and channel noise are one.
    """

    rho01: float
    rho02: float
    rho12: float
    p1: float
    p2: float

    def __post_init__(self):
        for name in ("rho01", "rho02", "rho12", "p1", "p2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidProblemError(f"{name} must be finite, got {value!r}")
        for name in ("rho01", "rho02", "rho12"):
            if abs(getattr(self, name)) > 1.0:
                raise InvalidProblemError(f"{name} must lie in [-1, 1]")
        if self.p1 < 0 or self.p2 < 0:
            raise InvalidProblemError("powers must be non-negative")
        build_source_covariance(self)

    @property
    def has_common_part(self) -> bool:
        """False when S0 is independent of both S1' and S2'."""
        return not (self.rho01 == 0.0 and self.rho02 == 0.0)

    @property
    def symmetric_power(self) -> bool:
        return self.p1 == self.p2

    def with_powers(self, p1: float, p2: float | None = None) -> GaussianProblem:
        return GaussianProblem(self.rho01, self.rho02, self.rho12, p1, p1 if p2 is None else p2)

    def to_dict(self) -> dict:
        return {"rho01": self.rho01, "rho02": self.rho02, "rho12": self.rho12,
                "p1": self.p1, "p2": self.p2}

    @classmethod
    def from_dict(cls, data: dict) -> GaussianProblem:
        try:
            return cls(*(float(data[k]) for k in ("rho01", "rho02", "rho12", "p1", "p2")))
        except KeyError as exc:
            raise ValidationError(f"problem is missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidProblemError):
                raise
            raise ValidationError(f"problem values must be numbers: {exc}") from None


@dataclass(frozen=True)
class LabeledCovariance:
    """Symmetric PSD matrix whose rows/columns are addressed by name."""

    labels: tuple[str, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        matrix = np.array(self.matrix, dtype=float)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            raise InvalidProblemError(f"duplicate labels in {labels}")
        if matrix.shape != (len(labels), len(labels)):
            raise InvalidProblemError(
                f"matrix shape {matrix.shape} does not match {len(labels)} labels")
        if not np.all(np.isfinite(matrix)):
            raise InvalidProblemError("covariance has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(np.diag(matrix))))) if labels else 1.0
        if np.max(np.abs(matrix - matrix.T), initial=0.0) > SYMMETRY_TOL * scale:
            raise InvalidProblemError("covariance is not symmetric")
        if labels:
            lo = float(np.linalg.eigvalsh(matrix)[0])
            if lo < -PSD_TOL * scale:
                raise InvalidProblemError(
                    f"covariance is not positive semidefinite (eigenvalue {lo:.3e})")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    def index(self, labels: Iterable[str]) -> list[int]:
        try:
            return [self.labels.index(lab) for lab in labels]
        except ValueError:
            missing = [lab for lab in labels if lab not in self.labels]
            raise KeyError(f"unknown labels {missing}; have {self.labels}") from None

    def sub(self, labels: Sequence[str]) -> np.ndarray:
        """Sub-block for ``labels`` in the given order."""
        idx = self.index(labels)
        return self.matrix[np.ix_(idx, idx)]

    def cross(self, rows: Sequence[str], cols: Sequence[str]) -> np.ndarray:
        return self.matrix[np.ix_(self.index(rows), self.index(cols))]

    def restrict(self, labels: Sequence[str]) -> LabeledCovariance:
        return LabeledCovariance(tuple(labels), self.sub(labels))

    def var(self, label: str) -> float:
        i = self.labels.index(label)
        return float(self.matrix[i, i])


@dataclass(frozen=True)
class SourceDecomposition:
    """Split of the conditional correlation as ``beta1 * beta2``."""

    beta1: float
    beta2: float
    rho12_given_0: float

    def __post_init__(self):
        if abs(self.beta1) > 1 + 1e-12 or abs(self.beta2) > 1 + 1e-12:
            raise InvalidProblemError("|beta_k| must not exceed 1")
        if abs(self.beta1 * self.beta2 - self.rho12_given_0) > 1e-12:
            raise InvalidProblemError("beta1 * beta2 must equal rho12|0")


def build_source_covariance(problem: GaussianProblem) -> LabeledCovariance:
    """Covariance of ``(S0, S1', S2')`` with unit diagonal."""
    r01, r02, r12 = problem.rho01, problem.rho02, problem.rho12
    matrix = np.array([[1.0, r01, r02],
                       [r01, 1.0, r12],
                       [r02, r12, 1.0]])
    lo = float(np.linalg.eigvalsh(matrix)[0])
    if lo < -1e-10:
        raise InvalidProblemError(
            f"source correlations ({r01}, {r02}, {r12}) are not jointly feasible: "
            f"smallest eigenvalue {lo:.6g}")
    return LabeledCovariance(SOURCE_LABELS, matrix)


def conditional_rho(problem: GaussianProblem) -> SourceDecomposition:
    """Correlation of S1' and S2' given S0, with the default beta split.

    ``beta1 = beta2 = sqrt(rho)`` for non-negative ``rho = rho12|0``; for
    negative values the sign goes to ``beta2``.
    """
    r01, r02, r12 = problem.rho01, problem.rho02, problem.rho12
    denom = (1.0 - r01 ** 2) * (1.0 - r02 ** 2)
    if denom <= 0.0:
        raise DegenerateConditioningError(
            "rho12|0 is undefined when S0 determines S1' or S2' (|rho_0k| = 1)")
    rho = (r12 - r01 * r02) / math.sqrt(denom)
    rho = min(1.0, max(-1.0, rho))
    mag = math.sqrt(abs(rho))
    beta2 = mag if rho >= 0 else -mag
    # product of the two square roots may miss rho by an ulp
    beta1 = rho / beta2 if beta2 != 0.0 else 0.0
    return SourceDecomposition(beta1, beta2, rho)


class MMSEResult(NamedTuple):
    coefficients: np.ndarray
    error_variance: float
    pseudo_inverse: bool


def _solve_psd(block: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve ``block @ x = rhs``; fall back to the pseudo-inverse when singular."""
    if block.size == 0:
        return np.zeros_like(rhs), False
    scale = max(1.0, float(np.max(np.diag(block))))
    try:
        chol = np.linalg.cholesky(block)
        if np.min(np.diag(chol)) ** 2 > 1e-12 * scale:
            y = np.linalg.solve(chol, rhs)
            return np.linalg.solve(chol.T, y), False
    except np.linalg.LinAlgError:
        pass
    pinv = np.linalg.pinv(block, rcond=1e-12, hermitian=True)
    return pinv @ rhs, True


def mmse_reduce(cov: LabeledCovariance, target: str, observed: Sequence[str]) -> MMSEResult:
    """Linear MMSE estimate of ``target`` from ``observed``.

    Returns the regression coefficients (in the order of ``observed``) and
    the Schur-complement error variance, clamped at zero.
    """
    observed = list(observed)
    t = cov.index([target])
    o = cov.index(observed)
    m = cov.matrix
    var_t = float(m[t[0], t[0]])
    if not observed:
        return MMSEResult(np.zeros(0), var_t, False)
    s_oo = m[np.ix_(o, o)]
    s_ot = m[np.ix_(o, t)][:, 0]
    coef, used_pinv = _solve_psd(s_oo, s_ot)
    err = var_t - float(s_ot @ coef)
    return MMSEResult(coef, max(err, 0.0), used_pinv)


class LogDet(NamedTuple):
    value: float
    singular: bool


def logdet_psd(matrix: np.ndarray, rel_tol: float = 1e-13) -> LogDet:
    """Log-determinant of a PSD matrix via pivoted Cholesky.

    A numerically rank-deficient matrix returns ``-inf`` with the flag set.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if n == 0:
        return LogDet(0.0, False)
    scale = max(float(np.max(np.diag(matrix))), 0.0)
    if scale == 0.0:
        return LogDet(-math.inf, True)
    c, _piv, rank, _info = lapack.dpstrf(matrix, tol=rel_tol * scale, lower=1)
    if rank < n:
        return LogDet(-math.inf, True)
    return LogDet(2.0 * float(np.sum(np.log(np.diag(c)))), False)


class LogDetRatio(NamedTuple):
    value: float
    singular: bool


def log_det_ratio(cov: LabeledCovariance, subset_a: Sequence[str],
                  subset_b: Sequence[str]) -> LogDetRatio:
    """``0.5 * (log|Sigma_a| - log|Sigma_b|)`` in nats.

    If either determinant vanishes the value is a signed infinity (``nan``
    when both do) and ``singular`` is set.
    """
    la = logdet_psd(cov.sub(list(subset_a)))
    lb = logdet_psd(cov.sub(list(subset_b)))
    if la.singular and lb.singular:
        return LogDetRatio(math.nan, True)
    return LogDetRatio(0.5 * (la.value - lb.value), la.singular or lb.singular)


def conditional_covariance(matrix: np.ndarray, keep: Sequence[int],
                           given: Sequence[int]) -> np.ndarray:
    """Schur complement ``S_kk - S_kg S_gg^+ S_gk``."""
    keep, given = list(keep), list(given)
    s_kk = matrix[np.ix_(keep, keep)]
    if not given:
        return s_kk
    s_kg = matrix[np.ix_(keep, given)]
    sol, _ = _solve_psd(matrix[np.ix_(given, given)], s_kg.T)
    out = s_kk - s_kg @ sol
    return 0.5 * (out + out.T)


def gaussian_cmi(matrix: np.ndarray, a: Sequence[int], b: Sequence[int],
                 given: Sequence[int] = (), rel_tol: float = 1e-11) -> float:
    """Conditional mutual information ``I(A; B | C)`` of jointly Gaussian coordinates.

    Works on the range of ``Cov(A | C)``, so coordinates of ``A`` that are
    already determined by ``C`` contribute nothing instead of producing
    ``0/0``; if ``B`` pins down a remaining direction the result is ``inf``.
    """
    a, b, given = list(a), list(b), list(given)
    scale = max(1.0, float(np.max(np.diag(matrix))))
    tol = rel_tol * scale
    k_a = conditional_covariance(matrix, a, given)
    lam, vec = np.linalg.eigh(k_a)
    live = lam > tol
    if not np.any(live):
        return 0.0
    q = vec[:, live]
    k_ab = conditional_covariance(matrix, a, b + given)
    mu = np.linalg.eigvalsh(q.T @ k_ab @ q)
    if mu[0] <= tol:
        return math.inf
    value = 0.5 * float(np.sum(np.log(lam[live])) - np.sum(np.log(mu)))
    return max(value, 0.0)


class SourceSamples(NamedTuple):
    s0: np.ndarray
    s1p: np.ndarray
    s2p: np.ndarray
    u: np.ndarray
    u1: np.ndarray
    u2: np.ndarray


def sample_sources(problem: GaussianProblem, decomposition: SourceDecomposition | None,
                   n: int, seed: int | np.random.SeedSequence) -> SourceSamples:
    """Draw ``n`` i.i.d. source triples through the ``(S0, U, B1, B2)`` construction."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if decomposition is None:
        decomposition = conditional_rho(problem)
    rng = np.random.default_rng(seed)
    s0, u, b1, b2 = rng.standard_normal((4, n))
    b1_, b2_ = decomposition.beta1, decomposition.beta2
    u1 = b1_ * u + math.sqrt(max(0.0, 1.0 - b1_ ** 2)) * b1
    u2 = b2_ * u + math.sqrt(max(0.0, 1.0 - b2_ ** 2)) * b2
    r01, r02 = problem.rho01, problem.rho02
    s1p = r01 * s0 + math.sqrt(1.0 - r01 ** 2) * u1
    s2p = r02 * s0 + math.sqrt(1.0 - r02 ** 2) * u2
    return SourceSamples(s0, s1p, s2p, u, u1, u2)
