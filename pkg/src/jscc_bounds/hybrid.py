"""Hybrid analog/digital coding inner bound for the Gaussian problem.

Auxiliaries and inputs are linear Gaussian:

    V0 = S0 + W0
    Vk = Fk (S0, Sk, V0)^T + Wk
    Xk = Gk (S0, Sk, V0, Vk)^T
    Y  = X1 + X2 + Z

so ``(S0, S1, S2, V0, V1, V2, Y) = A (S0, S1, S2, W0, W1, W2, Z)``.  Here
``Sk`` is the scalar ``S_k'``.  A noise variance of ``inf`` switches the
corresponding auxiliary off (it carries no information); coefficients that
would multiply an infinite-variance auxiliary must then be zero.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConditioningError, ParameterOverflowError
from .gaussian import (
    GaussianProblem,
    LabeledCovariance,
    build_source_covariance,
    gaussian_cmi,
    log_det_ratio,
    mmse_reduce,
)
from .search import Objective, pattern_search
from .uncoded import UncodedGains, UncodedOptimum, optimize_uncoded

JOINT_LABELS = ("S0", "S1", "S2", "V0", "V1", "V2", "Y")
BASE_LABELS = ("S0", "S1", "S2", "W0", "W1", "W2", "Z")
OBSERVED = ("V0", "V1", "V2", "Y")
MARGIN_TOL = 1e-9
ZERO_RATE_TOL = 1e-12

# (digital layer, source side, given) of the four decodability conditions;
# the channel side of each replaces the source set with Y.
CONDITIONS = (
    (("V1",), ("S0", "S1"), ("V0", "V2")),
    (("V2",), ("S0", "S2"), ("V0", "V1")),
    (("V1", "V2"), ("S0", "S1", "S2"), ("V0",)),
    (("V0", "V1", "V2"), ("S0", "S1", "S2"), ()),
)

_IDX = {lab: i for i, lab in enumerate(JOINT_LABELS)}


@dataclass(frozen=True)
class HybridParams:
    f1: tuple[float, float, float]
    f2: tuple[float, float, float]
    g1: tuple[float, float, float, float]
    g2: tuple[float, float, float, float]
    omega0: float
    omega1: float
    omega2: float

    def __post_init__(self):
        for name, size in (("f1", 3), ("f2", 3), ("g1", 4), ("g2", 4)):
            row = tuple(float(v) for v in getattr(self, name))
            if len(row) != size:
                raise ValueError(f"{name} must have {size} entries")
            if not all(math.isfinite(v) for v in row):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, row)
        for name in ("omega0", "omega1", "omega2"):
            w = float(getattr(self, name))
            if math.isnan(w) or w < 0:
                raise ValueError(f"{name} must be a non-negative variance")
            object.__setattr__(self, name, w)

    def to_vector(self) -> np.ndarray:
        return np.array([*self.f1, *self.f2, *self.g1, *self.g2,
                         self.omega0, self.omega1, self.omega2])

    @classmethod
    def from_vector(cls, v) -> HybridParams:
        v = [float(x) for x in v]
        return cls(tuple(v[0:3]), tuple(v[3:6]), tuple(v[6:10]), tuple(v[10:14]),
                   v[14], v[15], v[16])

    @classmethod
    def zeros(cls) -> HybridParams:
        return cls((0, 0, 0), (0, 0, 0), (0, 0, 0, 0), (0, 0, 0, 0), 0.0, 0.0, 0.0)

    def to_dict(self) -> dict:
        def enc(w):
            return "inf" if math.isinf(w) else w
        return {"f1": list(self.f1), "f2": list(self.f2), "g1": list(self.g1),
                "g2": list(self.g2), "omega0": enc(self.omega0),
                "omega1": enc(self.omega1), "omega2": enc(self.omega2)}

    @classmethod
    def from_dict(cls, data: dict) -> HybridParams:
        return cls(tuple(data["f1"]), tuple(data["f2"]), tuple(data["g1"]),
                   tuple(data["g2"]), float(data["omega0"]), float(data["omega1"]),
                   float(data["omega2"]))

    def scaled_gains(self, c1: float, c2: float) -> HybridParams:
        return HybridParams(self.f1, self.f2, tuple(c1 * g for g in self.g1),
                            tuple(c2 * g for g in self.g2),
                            self.omega0, self.omega1, self.omega2)


def assemble_transfer_matrix(params: HybridParams) -> np.ndarray:
    """The 7x7 map from ``(S0,S1,S2,W0,W1,W2,Z)`` to ``(S0,S1,S2,V0,V1,V2,Y)``."""
    f11, f12, f13 = params.f1
    f21, f22, f23 = params.f2
    g11, g12, g13, g14 = params.g1
    g21, g22, g23, g24 = params.g2
    a71 = g11 + g21 + g13 + g23 + g14 * (f11 + f13) + g24 * (f21 + f23)
    return np.array([
        [1, 0, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0, 0],
        [1, 0, 0, 1, 0, 0, 0],
        [f11 + f13, f12, 0, f13, 1, 0, 0],
        [f21 + f23, 0, f22, f23, 0, 1, 0],
        [a71, g12 + g14 * f12, g22 + g24 * f22,
         g13 + g14 * f13 + g23 + g24 * f23, g14, g24, 1],
    ], dtype=float)


def _switched_off(params: HybridParams) -> list[str]:
    """Auxiliaries with infinite noise; checks nothing multiplies them."""
    off = []
    if math.isinf(params.omega0):
        if any(v != 0.0 for v in (params.f1[2], params.f2[2], params.g1[2], params.g2[2])):
            raise ParameterOverflowError("V0 has infinite noise but is used with a nonzero weight")
        off.append("V0")
    if math.isinf(params.omega1):
        if params.g1[3] != 0.0:
            raise ParameterOverflowError("V1 has infinite noise but X1 uses it")
        off.append("V1")
    if math.isinf(params.omega2):
        if params.g2[3] != 0.0:
            raise ParameterOverflowError("V2 has infinite noise but X2 uses it")
        off.append("V2")
    return off


def _joint_matrix(params: HybridParams, source: np.ndarray) -> np.ndarray:
    off = _switched_off(params)
    omegas = [0.0 if math.isinf(w) else w for w in (params.omega0, params.omega1, params.omega2)]
    base = np.zeros((7, 7))
    base[:3, :3] = source
    base[3, 3], base[4, 4], base[5, 5] = omegas
    base[6, 6] = 1.0
    a = assemble_transfer_matrix(params)
    joint = a @ base @ a.T
    # an auxiliary drowned in infinite noise is, after normalisation,
    # an independent unit-variance variable
    for lab in off:
        i = _IDX[lab]
        joint[i, :] = 0.0
        joint[:, i] = 0.0
        joint[i, i] = 1.0
    if not np.all(np.isfinite(joint)):
        raise ParameterOverflowError("joint covariance has non-finite entries")
    joint = 0.5 * (joint + joint.T)
    # first three rows of A are the identity, keep the source block exact
    joint[:3, :3] = source
    return joint


def hybrid_joint_covariance(params: HybridParams, problem: GaussianProblem) -> LabeledCovariance:
    """Covariance of ``(S0, S1, S2, V0, V1, V2, Y)``."""
    source = build_source_covariance(problem).matrix
    return LabeledCovariance(JOINT_LABELS, _joint_matrix(params, source))


@dataclass(frozen=True)
class HybridEvaluation:
    d1: float
    d2: float
    power1: float
    power2: float
    margins: tuple[float, float, float, float]
    source_info: tuple[float, float, float, float]
    channel_info: tuple[float, float, float, float]
    satisfied: tuple[bool, bool, bool, bool]
    feasible: bool
    pseudo_inverse: bool = False

    @property
    def margin_min(self) -> float:
        return min(self.margins)

    def to_dict(self) -> dict:
        return {"d1": self.d1, "d2": self.d2, "power1": self.power1, "power2": self.power2,
                "margins": list(self.margins), "source_info": list(self.source_info),
                "channel_info": list(self.channel_info), "satisfied": list(self.satisfied),
                "feasible": self.feasible, "pseudo_inverse": self.pseudo_inverse}


def _idx(labels):
    return [_IDX[lab] for lab in labels]


def evaluate_hybrid(params: HybridParams, problem: GaussianProblem,
                    margin_tol: float = MARGIN_TOL) -> HybridEvaluation:
    """Distortions, powers and the four decodability margins (nats).

    A condition holds when ``channel - source > margin_tol``.  A condition
    whose source side is zero needs no digital rate at all and is counted as
    met even though ``0 < 0`` fails; this is what lets purely analog schemes
    (all auxiliaries uninformative) be evaluated as members.
    """
    cov = hybrid_joint_covariance(params, problem)
    m = cov.matrix
    est1 = mmse_reduce(cov, "S1", OBSERVED)
    est2 = mmse_reduce(cov, "S2", OBSERVED)

    power = []
    for k, g in ((1, params.g1), (2, params.g2)):
        g = np.asarray(g)
        if not np.any(g):
            power.append(0.0)
            continue
        block = cov.sub(("S0", f"S{k}", "V0", f"V{k}"))
        power.append(float(g @ block @ g))

    src, chn, margins, ok = [], [], [], []
    for layer, sources, given in CONDITIONS:
        lhs = gaussian_cmi(m, _idx(layer), _idx(sources), _idx(given))
        rhs = gaussian_cmi(m, _idx(layer), _idx(("Y",)), _idx(given))
        margin = rhs - lhs if math.isfinite(lhs) else -math.inf
        src.append(lhs)
        chn.append(rhs)
        margins.append(margin)
        ok.append(margin > margin_tol or lhs <= ZERO_RATE_TOL)
    fits = (power[0] <= problem.p1 * (1 + 1e-12) + 1e-12
            and power[1] <= problem.p2 * (1 + 1e-12) + 1e-12)
    return HybridEvaluation(
        d1=min(est1.error_variance, 1.0), d2=min(est2.error_variance, 1.0),
        power1=power[0], power2=power[1], margins=tuple(margins),
        source_info=tuple(src), channel_info=tuple(chn), satisfied=tuple(ok),
        feasible=all(ok) and fits,
        pseudo_inverse=est1.pseudo_inverse or est2.pseudo_inverse)


def determinant_margins(cov: LabeledCovariance, drop_common_source: bool = False) -> list[float]:
    """Margins written directly as determinant ratios.

    ``log|S_(V0V2Y)|/|S_(V0V2V1Y)| - log|S_(V0V2S0S1)|/|S_(V0V2V1S0S1)|``
    and companions, each halved.  With ``drop_common_source`` the source sets drop
    the explicit ``S0`` (``(V0,V2,S1)`` instead of ``(V0,V2,S0,S1)``); the two
    disagree whenever ``S0`` carries information not already in ``S_k``.
    Meaningful only when every block involved is non-singular.
    """
    out = []
    for layer, sources, given in CONDITIONS:
        if drop_common_source:
            sources = tuple(s for s in sources if s != "S0") or sources
        given, layer = list(given), list(layer)
        chan = log_det_ratio(cov, given + ["Y"], given + layer + ["Y"]).value
        srcv = log_det_ratio(cov, given + list(sources), given + layer + list(sources)).value
        out.append(chan - srcv)
    return out


def embed_uncoded(gains: UncodedGains, problem: GaussianProblem) -> HybridParams:
    """Hybrid parameters that reproduce the uncoded scheme exactly.

    All digital layers are switched off: ``V0`` through infinite noise, ``V1``
    and ``V2`` as pure unit noise nobody uses.  The encoder maps are rewritten
    from the ``(S0, U_k)`` basis into the ``(S0, S_k')`` basis.
    """
    a1 = 1.0 - problem.rho01 ** 2
    a2 = 1.0 - problem.rho02 ** 2
    if a1 <= 0.0 or a2 <= 0.0:
        raise DegenerateConditioningError("uncoded embedding needs |rho_0k| < 1")
    a1, a2 = math.sqrt(a1), math.sqrt(a2)
    g1 = (gains.g10 - gains.g11 * problem.rho01 / a1, gains.g11 / a1, 0.0, 0.0)
    g2 = (gains.g20 - gains.g22 * problem.rho02 / a2, gains.g22 / a2, 0.0, 0.0)
    return HybridParams((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), g1, g2, math.inf, 1.0, 1.0)


def private_only(params: HybridParams) -> HybridParams:
    """Drop every use of ``S0`` and ``V0``.

    For a problem without common part this is the natural parameter set;
    the result can be evaluated unchanged on any problem with the same
    ``rho12`` and powers and gives the same distortions and margins.
    """
    f1 = (0.0, params.f1[1], 0.0)
    f2 = (0.0, params.f2[1], 0.0)
    g1 = (0.0, params.g1[1], 0.0, params.g1[3])
    g2 = (0.0, params.g2[1], 0.0, params.g2[3])
    return HybridParams(f1, f2, g1, g2, math.inf, params.omega1, params.omega2)


# ---------------------------------------------------------------- optimiser

# vector layout: f1(3) f2(3) g1(4) g2(4) log(omega0..2)
_COMMON_COORDS = (0, 2, 3, 5, 6, 8, 10, 12, 14)


def _decode_vector(x: np.ndarray) -> HybridParams:
    v = x.copy()
    v[14:17] = np.exp(v[14:17])
    v[0:14][~np.isfinite(v[0:14])] = 0.0
    # switched-off auxiliaries take no weight
    if math.isinf(v[14]):
        v[[2, 5, 8, 12]] = 0.0
    if math.isinf(v[15]):
        v[9] = 0.0
    if math.isinf(v[16]):
        v[13] = 0.0
    return HybridParams.from_vector(v)


def _encode_params(params: HybridParams) -> np.ndarray:
    v = params.to_vector()
    with np.errstate(divide="ignore"):
        v[14:17] = np.log(np.maximum(v[14:17], 1e-300))
    return v


def project_power(params: HybridParams, problem: GaussianProblem) -> HybridParams:
    """Scale ``G_k`` down until ``E[X_k^2] <= P_k`` (the power is quadratic in ``G_k``)."""
    cov = hybrid_joint_covariance(params, problem)
    scales = []
    for k, g, p in ((1, params.g1, problem.p1), (2, params.g2, problem.p2)):
        g = np.asarray(g)
        q = float(g @ cov.sub(("S0", f"S{k}", "V0", f"V{k}")) @ g) if np.any(g) else 0.0
        scales.append(math.sqrt(p / q) if q > p else 1.0)
    if scales == [1.0, 1.0]:
        return params
    return params.scaled_gains(*scales)


_INFEASIBLE_OFFSET = 10.0


def _score(params: HybridParams, problem: GaussianProblem, objective: Objective) -> float:
    try:
        params = project_power(params, problem)
        ev = evaluate_hybrid(params, problem)
    except (ParameterOverflowError, ValueError, np.linalg.LinAlgError):
        return math.inf
    value = objective(ev.d1, ev.d2)
    if ev.feasible:
        return value
    shortfall = sum(min(MARGIN_TOL - mg, 1e6) for mg, ok in zip(ev.margins, ev.satisfied)
                    if not ok)
    return value + _INFEASIBLE_OFFSET + shortfall


@dataclass(frozen=True)
class _StartTask:
    x0: np.ndarray
    problem: GaussianProblem
    objective: Objective
    budget: int
    active: np.ndarray
    step: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def _run_start(task: _StartTask):
    res = pattern_search(lambda x: _score(_decode_vector(x), task.problem, task.objective),
                         task.x0, task.step, task.lower, task.upper,
                         max_evals=task.budget, min_step=1e-7, active=task.active)
    return res.x, res.value, res.evaluations


@dataclass(frozen=True)
class HybridOptimum:
    params: HybridParams
    evaluation: HybridEvaluation
    value: float
    found: bool
    evaluations: int
    starts: int
    diagnostics: dict = field(default_factory=dict)


def _start_points(problem: GaussianProblem, rng: np.random.Generator, n_random: int,
                  uncoded: HybridParams | None, use_common: bool) -> list[HybridParams]:
    sp1, sp2 = math.sqrt(problem.p1), math.sqrt(problem.p2)
    starts = []
    if uncoded is not None:
        starts.append(uncoded)
        # uncoded plus a light private quantisation layer on each side
        g1, g2 = list(uncoded.g1), list(uncoded.g2)
        g1[3], g2[3] = 0.1 * sp1, 0.1 * sp2
        starts.append(HybridParams((0, 1, 0), (0, 1, 0), tuple(g1), tuple(g2),
                                   math.inf, 0.5, 0.5))
        if use_common:
            g1, g2 = list(uncoded.g1), list(uncoded.g2)
            g1[2], g2[2] = 0.1 * sp1, 0.1 * sp2
            starts.append(HybridParams((0, 0, 0), (0, 0, 0), tuple(g1), tuple(g2),
                                       1.0, 1.0, 1.0))
    # analog-only starts (all layers off), random encoder maps
    for _ in range(2):
        g1 = tuple(rng.uniform(-1, 1, 2) * sp1) + (0.0, 0.0)
        g2 = tuple(rng.uniform(-1, 1, 2) * sp2) + (0.0, 0.0)
        starts.append(HybridParams((0, 0, 0), (0, 0, 0), g1, g2, math.inf, 1.0, 1.0))
    for _ in range(n_random):
        f = rng.uniform(-1, 1, 6)
        g = rng.uniform(-1, 1, 8)
        g[:4] *= sp1
        g[4:] *= sp2
        w = np.exp(rng.uniform(-1.5, 1.5, 3))
        starts.append(HybridParams(tuple(f[:3]), tuple(f[3:]), tuple(g[:4]), tuple(g[4:]),
                                   w[0] if use_common else math.inf, w[1], w[2]))
    if not use_common:
        starts = [private_only(s) for s in starts]
    return starts


def optimize_hybrid(problem: GaussianProblem, budget: int = 3000, seed: int = 0,
                    objective: Objective = Objective(), extra_starts=(),
                    use_common: bool | None = None, n_random: int = 4,
                    uncoded_resolution: int = 41, threads: int = 1,
                    uncoded: UncodedOptimum | None = None) -> HybridOptimum:
    """Multi-start pattern search over the 17 hybrid-coding parameters.

    The uncoded optimum (embedded as hybrid parameters) is always the first
    start, so the result is never worse than the best uncoded scheme.  When
    ``use_common`` is false (default: the problem has no common part) every
    coefficient touching ``S0`` or ``V0`` is pinned to zero.  Powers are
    enforced by rescaling ``G_k``; the reported point is re-evaluated
    without any projection.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if use_common is None:
        use_common = problem.has_common_part
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    uopt = uncoded
    try:
        if uopt is None:
            uopt = optimize_uncoded(problem, uncoded_resolution, objective)
        embedded = embed_uncoded(uopt.gains, problem)
    except DegenerateConditioningError:
        uopt, embedded = None, None
    generated = _start_points(problem, rng, n_random, embedded, use_common)
    extra = [p if use_common else private_only(p) for p in extra_starts]
    head = 1 if embedded is not None else 0
    starts = generated[:head] + extra + generated[head:]

    active = np.ones(17, bool)
    if not use_common:
        active[list(_COMMON_COORDS)] = False
    scale = max(math.sqrt(max(problem.p1, problem.p2)), 0.1)
    step = np.array([0.25] * 6 + [0.25 * scale] * 8 + [0.5] * 3)
    lower = np.array([-5.0] * 6 + [-4 * scale - 1] * 8 + [math.log(1e-8)] * 3)
    upper = -lower
    upper[14:] = math.log(1e8)

    per_start = max(1, budget // len(starts))
    tasks, remaining = [], budget
    for i, s in enumerate(starts):
        if remaining <= 0:
            break
        share = per_start if i < len(starts) - 1 else remaining
        share = min(share, remaining)
        tasks.append(_StartTask(_encode_params(s), problem, objective, share, active,
                                step, lower, upper))
        remaining -= share

    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_start, tasks))
    else:
        results = [_run_start(t) for t in tasks]

    best_i = min(range(len(results)), key=lambda i: (results[i][1], i))
    x, value, _ = results[best_i]
    params = project_power(_decode_vector(x), problem)
    ev = evaluate_hybrid(params, problem)
    diagnostics = {
        "start_values": [r[1] for r in results],
        "best_start": best_i,
        "uncoded_value": None if uopt is None else uopt.value,
    }
    return HybridOptimum(params, ev, objective(ev.d1, ev.d2), ev.feasible,
                         sum(r[2] for r in results), len(tasks), diagnostics)
