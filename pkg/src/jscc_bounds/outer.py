"""Outer bound on the Gaussian distortion region.

A pair ``(D1, D2)`` passes when some correlation budget ``(rho_hat,
rho_hat0)`` makes seven rate / SNR inequalities hold for every split
``beta1 * beta2 = rho12|0``, the last three for some ``theta1, theta2``
with ``rho_hat <= theta1 * theta2``.  Membership is grid-relative in
``(rho_hat, rho_hat0, beta1)``; the ``theta`` step is solved exactly.

Margins are in nats: rate constraints report ``rhs - lhs`` and the
SNR-type constraints report ``0.5 * log(rhs / lhs)``, so a negative
margin always means violation and the scales are comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConditioningError
from .gaussian import GaussianProblem

CONSTRAINTS = (
    "sum_rate",
    "sum_rate_given_common",
    "snr_1_given_common",
    "snr_2_given_common",
    "private_product",
    "private_1",
    "private_2",
)
MEMBER_TOL = 1e-12


def _log_plus(x):
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(x), 0.0)


def _rd_core(d1, d2, rho):
    """Vectorised cooperative rate-distortion for ``d1 <= d2`` in (0, 1]."""
    r2 = rho * rho
    b = (1.0 - d1) * (1.0 - d2)
    with np.errstate(divide="ignore", invalid="ignore"):
        case1 = r2 * (1.0 - d1) >= (1.0 - d2)
        case2 = r2 <= b
        v1 = 0.5 * _log_plus(1.0 / d1)
        v2 = 0.5 * _log_plus((1.0 - r2) / (d1 * d2))
        den3 = d1 * d2 - (abs(rho) - np.sqrt(b)) ** 2
        v3 = 0.5 * _log_plus((1.0 - r2) / den3)
    return np.where(case1, v1, np.where(case2, v2, v3))


def rd_joint(d1, d2, rho12):
    """Minimum sum rate (nats) for cooperative encoding of two unit Gaussians.

    Accepts scalars or broadcastable arrays.  Distortions above one are
    clamped to one; a non-positive distortion needs infinite rate.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    lo = np.minimum(np.minimum(d1, d2), 1.0)
    hi = np.minimum(np.maximum(d1, d2), 1.0)
    safe_lo = np.where(lo > 0, lo, 1.0)
    out = _rd_core(safe_lo, np.where(lo > 0, hi, 1.0), float(rho12))
    out = np.where(lo <= 0, np.inf, out)
    return float(out) if out.ndim == 0 else out


def rd_branches(d1: float, d2: float, rho12: float) -> tuple[float, float, float]:
    """All three case formulas evaluated without selection (``d1 <= d2``)."""
    r2 = rho12 * rho12
    b = (1 - d1) * (1 - d2)
    v1 = 0.5 * max(math.log(1 / d1), 0.0)
    v2 = 0.5 * max(math.log((1 - r2) / (d1 * d2)), 0.0)
    den3 = d1 * d2 - (abs(rho12) - math.sqrt(b)) ** 2
    v3 = 0.5 * max(math.log((1 - r2) / den3), 0.0) if den3 > 0 else math.inf
    return v1, v2, v3


def conditional_correlation(problem: GaussianProblem) -> float:
    """``rho12|0`` as a plain number (no split)."""
    den = (1.0 - problem.rho01 ** 2) * (1.0 - problem.rho02 ** 2)
    if den <= 0.0:
        raise DegenerateConditioningError("rho12|0 is undefined when |rho_0k| = 1")
    return float(np.clip((problem.rho12 - problem.rho01 * problem.rho02) / math.sqrt(den), -1, 1))


def rd_joint_given_common(d1, d2, problem: GaussianProblem):
    """Sum rate when ``S0`` is known to both encoders and the decoder."""
    r12_0 = conditional_correlation(problem)
    d1p = np.asarray(d1, dtype=float) / (1.0 - problem.rho01 ** 2)
    d2p = np.asarray(d2, dtype=float) / (1.0 - problem.rho02 ** 2)
    return rd_joint(d1p, d2p, r12_0)


@dataclass(frozen=True)
class OuterGrid:
    rho_hat: int = 101
    rho_hat0: int = 51
    beta1: int = 51

    def __post_init__(self):
        for name in ("rho_hat", "rho_hat0", "beta1"):
            if getattr(self, name) < 1:
                raise ValueError(f"grid size {name} must be positive")

    def to_dict(self) -> dict:
        return {"rho_hat": self.rho_hat, "rho_hat0": self.rho_hat0, "beta1": self.beta1}


@dataclass(frozen=True)
class BetaRecord:
    beta1: float
    beta2: float
    theta1: float
    theta2: float
    margins: tuple[float, ...]


@dataclass(frozen=True)
class OuterWitness:
    rho_hat: float
    rho_hat0: float
    records: tuple[BetaRecord, ...] = ()

    def to_dict(self) -> dict:
        return {"rho_hat": self.rho_hat, "rho_hat0": self.rho_hat0,
                "records": [{"beta1": r.beta1, "beta2": r.beta2, "theta1": r.theta1,
                             "theta2": r.theta2, "margins": list(r.margins)}
                            for r in self.records]}


@dataclass(frozen=True)
class MembershipVerdict:
    member: bool
    violated_constraint: str | None
    tightest_margin: float
    witness: OuterWitness | None = None
    grid: OuterGrid = field(default_factory=OuterGrid)

    def to_dict(self) -> dict:
        return {"member": self.member, "violated_constraint": self.violated_constraint,
                "tightest_margin": self.tightest_margin,
                "witness": None if self.witness is None else self.witness.to_dict(),
                "grid": self.grid.to_dict()}


def _half_log_ratio(rhs, lhs):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * (np.log(rhs) - np.log(lhs))
    # 0 <= rhs always; lhs == 0 means the constraint is vacuous
    return np.where(lhs <= 0, np.inf, out)


def _split(r12_0: float, beta1):
    """``beta2`` and the squares used by the bound; ``0/0`` read as zero."""
    beta1 = np.asarray(beta1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        beta2 = np.where(beta1 != 0, r12_0 / beta1, 0.0)
    return beta2


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den != 0, num / den, 0.0)


def _fixed_parts(d1, d2, problem, r12_0, rho_hat, rho_hat0, beta1):
    """Everything in the seven constraints that does not involve theta."""
    p1, p2 = problem.p1, problem.p2
    a1 = 1.0 - problem.rho01 ** 2
    a2 = 1.0 - problem.rho02 ** 2
    sp = math.sqrt(p1 * p2)
    beta2 = _split(r12_0, beta1)
    q1 = _ratio(rho_hat0 ** 2, beta2 ** 2)  # rho_hat0^2 / beta2^2
    q2 = _ratio(rho_hat0 ** 2, beta1 ** 2)
    cond = 1.0 - r12_0 ** 2
    shrink = np.minimum(_ratio(1.0 - rho_hat ** 2, cond), 1.0) if cond > 0 else 1.0
    shrink = np.where(cond > 0, shrink, 1.0)

    m = {}
    m["sum_rate"] = 0.5 * np.log1p(p1 + p2 + 2 * rho_hat * sp) - rd_joint(d1, d2, problem.rho12)
    m["sum_rate_given_common"] = (0.5 * np.log1p(shrink * (p1 + p2 + 2 * rho_hat0 * sp))
                                  - rd_joint_given_common(d1, d2, problem))
    common_snr = np.minimum(1 - rho_hat ** 2, 1 - rho_hat0 ** 2)
    m["snr_1_given_common"] = _half_log_ratio(1 + common_snr * p1, a1 * cond / d1)
    m["snr_2_given_common"] = _half_log_ratio(1 + common_snr * p2, a2 * cond / d2)
    lhs5 = np.maximum(a1 * (1 - beta1 ** 2) / d1, 1.0) * np.maximum(a2 * (1 - beta2 ** 2) / d2, 1.0)
    lhs6 = a1 * (1 - beta1 ** 2) / d1
    lhs7 = a2 * (1 - beta2 ** 2) / d2
    cap5 = (1 - q1) * p1 + (1 - q2) * p2
    cap6 = (1 - q1) * p1
    cap7 = (1 - q2) * p2
    return m, beta2, (lhs5, lhs6, lhs7), (cap5, cap6, cap7)


def _theta_margins(t, rho_hat, p1, p2, lhs, caps):
    """Margins of the theta-dependent constraints at ``theta1^2 = t``."""
    lhs5, lhs6, lhs7 = lhs
    cap5, cap6, cap7 = caps
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(t > 0, rho_hat ** 2 / t, 0.0)  # theta2^2
    m5 = _half_log_ratio(1 + np.minimum((1 - t) * p1 + (1 - u) * p2, cap5), lhs5)
    m6 = _half_log_ratio(1 + np.minimum((1 - t) * p1, cap6), lhs6)
    m7 = _half_log_ratio(1 + np.minimum((1 - u) * p2, cap7), lhs7)
    return m5, m6, m7


def _best_theta(rho_hat, p1, p2, lhs, caps):
    """Exact choice of ``theta1^2`` on the curve ``theta1 * theta2 = rho_hat``.

    The first theta constraint is concave in ``t = theta1^2`` and the other
    two cut out an interval of ``t``; the best ``t`` is the concave
    maximiser clipped to that interval.  When the interval is empty the
    point balancing the two interval constraints is returned, which makes
    the reported margins informative.
    """
    _, lhs6, lhs7 = lhs
    r2 = rho_hat ** 2
    t_lo = np.broadcast_to(r2, np.broadcast(r2, lhs6).shape).astype(float)
    t_hi = np.ones_like(t_lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        if p1 > 0:
            t_hi = np.minimum(t_hi, 1 - (lhs6 - 1) / p1)
        if p2 > 0:
            room = 1 - (lhs7 - 1) / p2
            t_lo = np.maximum(t_lo, np.where(room > 0, r2 / room, np.inf))
        if p1 > 0 and p2 > 0:
            t_star = rho_hat * math.sqrt(p2 / p1)
        elif p2 > 0:
            t_star = np.ones_like(t_lo)
        else:
            t_star = r2
    t_star = np.broadcast_to(t_star, t_lo.shape)
    ok = t_lo <= t_hi
    t = np.where(ok, np.clip(t_star, t_lo, t_hi),
                 np.clip(0.5 * (np.minimum(t_lo, 1.0) + np.maximum(t_hi, r2)), r2, 1.0))
    t = np.clip(t, r2, 1.0)
    return np.where(rho_hat == 0, 0.0, t)


def _beta_grid(r12_0: float, n: int) -> np.ndarray:
    lo = abs(r12_0)
    return np.linspace(lo, 1.0, n) if n > 1 else np.array([lo])


def _rho_hat0_grid(r12_0: float, n: int) -> np.ndarray:
    hi = abs(r12_0)
    return np.linspace(0.0, hi, n) if n > 1 else np.array([0.0])


def check_constraints(d1: float, d2: float, problem: GaussianProblem, rho_hat: float,
                      rho_hat0: float, beta1: float, theta1: float,
                      theta2: float) -> dict[str, float]:
    """Margins of the seven inequalities at one explicit witness point."""
    r12_0 = conditional_correlation(problem)
    m, _, lhs, caps = _fixed_parts(d1, d2, problem, r12_0, rho_hat, rho_hat0, beta1)
    p1, p2 = problem.p1, problem.p2
    lhs5, lhs6, lhs7 = lhs
    cap5, cap6, cap7 = caps
    t, u = theta1 ** 2, theta2 ** 2
    m["private_product"] = _half_log_ratio(1 + min((1 - t) * p1 + (1 - u) * p2, cap5), lhs5)
    m["private_1"] = _half_log_ratio(1 + min((1 - t) * p1, cap6), lhs6)
    m["private_2"] = _half_log_ratio(1 + min((1 - u) * p2, cap7), lhs7)
    return {k: float(m[k]) for k in CONSTRAINTS}


def outer_membership(d1: float, d2: float, problem: GaussianProblem,
                     grid: OuterGrid = OuterGrid()) -> MembershipVerdict:
    """Grid test of the outer bound at ``(d1, d2)``.

    Passing requires a grid point ``(rho_hat, rho_hat0)`` satisfying the four
    theta-free constraints such that, at every ``beta1`` grid point, some
    ``theta`` satisfies the remaining three.  For a failing pair the witness
    is the candidate with the largest worst-case margin and the reported
    violation is the first constraint (in order) failing there.
    """
    r12_0 = conditional_correlation(problem)
    rh = np.linspace(0.0, 1.0, grid.rho_hat) if grid.rho_hat > 1 else np.array([0.0])
    rh0 = _rho_hat0_grid(r12_0, grid.rho_hat0)
    b1 = _beta_grid(r12_0, grid.beta1)
    RH, RH0, B1 = np.meshgrid(rh, rh0, b1, indexing="ij")

    fixed, beta2, lhs, caps = _fixed_parts(d1, d2, problem, r12_0, RH, RH0, B1)
    t = _best_theta(RH, problem.p1, problem.p2, lhs, caps)
    m5, m6, m7 = _theta_margins(t, RH, problem.p1, problem.p2, lhs, caps)

    shape = RH.shape
    stack = np.stack([np.broadcast_to(fixed[k], shape) for k in CONSTRAINTS[:4]]
                     + [m5, m6, m7])
    stack = np.nan_to_num(stack, nan=-np.inf)
    # worst over beta for every (rho_hat, rho_hat0) candidate
    worst_per_beta = stack.min(axis=0)
    worst = worst_per_beta.min(axis=-1)
    flat = int(np.argmax(worst))
    i, j = np.unravel_index(flat, worst.shape)
    tightest = float(worst[i, j])
    member = tightest >= -MEMBER_TOL

    records = []
    for k in range(b1.size):
        th1 = math.sqrt(t[i, j, k])
        th2 = RH[i, j, k] / th1 if th1 > 0 else 0.0
        records.append(BetaRecord(float(b1[k]), float(beta2[i, j, k]), th1, min(th2, 1.0),
                                  tuple(float(v) for v in stack[:, i, j, k])))
    witness = OuterWitness(float(rh[i]), float(rh0[j]), tuple(records))
    violated = None
    if not member:
        per_constraint = stack[:, i, j, :].min(axis=-1)
        violated = CONSTRAINTS[int(np.flatnonzero(per_constraint < -MEMBER_TOL)[0])]
    return MembershipVerdict(member, violated, tightest, witness, grid)


def no_common_constraints(d1: float, d2: float, rho12: float, p1: float, p2: float,
                          rho_hat: float, rho_hat0: float, beta1: float, theta1: float,
                          theta2: float) -> dict[str, float]:
    """The seven margins written for sources without a common part.

    ``S0`` is dropped: conditional quantities reduce to unconditional ones
    and ``rho12|0`` to ``rho12``.  Kept separate from :func:`check_constraints`
    so the two can be compared.
    """
    cond = 1 - rho12 ** 2
    beta2 = rho12 / beta1 if beta1 != 0 else 0.0
    q1 = rho_hat0 ** 2 / beta2 ** 2 if beta2 != 0 else 0.0
    q2 = rho_hat0 ** 2 / beta1 ** 2 if beta1 != 0 else 0.0
    shrink = min((1 - rho_hat ** 2) / cond, 1.0) if cond > 0 else 1.0
    sp = math.sqrt(p1 * p2)
    rd = float(rd_joint(d1, d2, rho12))

    def hl(rhs, lhs):
        return math.inf if lhs <= 0 else 0.5 * math.log(rhs / lhs)

    snr = min(1 - rho_hat ** 2, 1 - rho_hat0 ** 2)
    l6 = (1 - beta1 ** 2) / d1
    l7 = (1 - beta2 ** 2) / d2
    t, u = theta1 ** 2, theta2 ** 2
    return {
        "sum_rate": 0.5 * math.log(1 + p1 + p2 + 2 * rho_hat * sp) - rd,
        "sum_rate_given_common": 0.5 * math.log(1 + shrink * (p1 + p2 + 2 * rho_hat0 * sp)) - rd,
        "snr_1_given_common": hl(1 + snr * p1, cond / d1),
        "snr_2_given_common": hl(1 + snr * p2, cond / d2),
        "private_product": hl(1 + min((1 - t) * p1 + (1 - u) * p2,
                                      (1 - q1) * p1 + (1 - q2) * p2),
                              max(l6, 1.0) * max(l7, 1.0)),
        "private_1": hl(1 + min((1 - t) * p1, (1 - q1) * p1), l6),
        "private_2": hl(1 + min((1 - u) * p2, (1 - q2) * p2), l7),
    }


def bisect_min_distortion(member, tol: float = 1e-8) -> float:
    """Smallest ``D`` in ``[0, 1]`` with ``member(D)`` for a monotone predicate."""
    lo, hi = 0.0, 1.0
    if not member(hi):
        return math.nan
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid > 0 and member(mid):
            hi = mid
        else:
            lo = mid
    return hi


def symmetric_outer_min_distortion(problem: GaussianProblem, grid: OuterGrid = OuterGrid(),
                                   tol: float = 1e-8) -> float:
    """Smallest common distortion ``D = D1 = D2`` passing the outer bound."""
    if not problem.symmetric_power:
        raise ValueError("symmetric outer bound needs p1 == p2")
    return bisect_min_distortion(lambda d: outer_membership(d, d, problem, grid).member, tol)


# ------------------------------------------------- equal-power, equal-distortion form

def _rd_equal(d: float, rho: float) -> float:
    """Cooperative sum rate at equal distortions."""
    if d <= 0:
        return math.inf
    d = min(d, 1.0)
    r = abs(rho)
    if r <= 1 - d:
        return 0.5 * max(math.log((1 - rho * rho) / (d * d)), 0.0)
    return 0.5 * max(math.log((1 + r) / (2 * d - (1 - r))), 0.0)


def symmetric_member(d: float, problem: GaussianProblem, grid: OuterGrid = OuterGrid(),
                     theta_points: int = 2001) -> bool:
    """Direct test for ``P1 = P2`` and ``D1 = D2 = D`` by plain enumeration.

    Written independently of :func:`outer_membership`: equal-distortion rate
    formulas, explicit loops over the witness grid and a dense grid over
    ``theta1`` with ``theta2 = rho_hat / theta1``.
    """
    if not problem.symmetric_power:
        raise ValueError("symmetric test needs p1 == p2")
    p = problem.p1
    a1 = 1 - problem.rho01 ** 2
    a2 = 1 - problem.rho02 ** 2
    if a1 <= 0 or a2 <= 0:
        raise DegenerateConditioningError("rho12|0 is undefined when |rho_0k| = 1")
    r = (problem.rho12 - problem.rho01 * problem.rho02) / math.sqrt(a1 * a2)
    r = max(-1.0, min(1.0, r))
    rate = _rd_equal(d, problem.rho12)
    rate0 = _rd_equal(d / a1, r) if problem.rho01 == problem.rho02 else \
        float(rd_joint(d / a1, d / a2, r))
    tol = 1e-12
    rh_grid = [k / (grid.rho_hat - 1) for k in range(grid.rho_hat)] if grid.rho_hat > 1 else [0.0]
    rh0_grid = ([abs(r) * k / (grid.rho_hat0 - 1) for k in range(grid.rho_hat0)]
                if grid.rho_hat0 > 1 else [0.0])
    b_grid = ([abs(r) + (1 - abs(r)) * k / (grid.beta1 - 1) for k in range(grid.beta1)]
              if grid.beta1 > 1 else [abs(r)])

    for rh in rh_grid:
        if rate > 0.5 * math.log(1 + 2 * (1 + rh) * p) + tol:
            continue
        for rh0 in rh0_grid:
            f = 1.0 if 1 - r * r <= 0 else min((1 - rh * rh) / (1 - r * r), 1.0)
            if rate0 > 0.5 * math.log(1 + f * 2 * (1 + rh0) * p) + tol:
                continue
            snr = 1 + min(1 - rh * rh, 1 - rh0 * rh0) * p
            if a1 * (1 - r * r) / d > snr * (1 + tol) or a2 * (1 - r * r) / d > snr * (1 + tol):
                continue
            if all(_beta_ok(d, p, a1, a2, r, rh, rh0, b, theta_points, tol) for b in b_grid):
                return True
    return False


def _beta_ok(d, p, a1, a2, r, rh, rh0, b1, theta_points, tol):
    b2 = r / b1 if b1 != 0 else 0.0
    q1 = rh0 * rh0 / (b2 * b2) if b2 != 0 else 0.0
    q2 = rh0 * rh0 / (b1 * b1) if b1 != 0 else 0.0
    l6 = a1 * (1 - b1 * b1) / d
    l7 = a2 * (1 - b2 * b2) / d
    l5 = max(l6, 1.0) * max(l7, 1.0)
    if rh == 0:
        thetas = [(0.0, 0.0)]
    else:
        thetas = []
        for k in range(theta_points):
            th1 = rh + (1 - rh) * k / (theta_points - 1)
            thetas.append((th1, min(rh / th1, 1.0)))
        thetas.append((math.sqrt(rh), math.sqrt(rh)))
    for th1, th2 in thetas:
        ok5 = l5 <= (1 + min(2 - th1 * th1 - th2 * th2, 2 - q1 - q2) * p) * (1 + tol)
        ok6 = l6 <= (1 + min(1 - th1 * th1, 1 - q1) * p) * (1 + tol)
        ok7 = l7 <= (1 + min(1 - th2 * th2, 1 - q2) * p) * (1 + tol)
        if ok5 and ok6 and ok7:
            return True
    return False
