"""Uncoded (linear, symbol-by-symbol) transmission with MMSE decoding.

Encoder ``k`` sends ``X_k = g_k0 S0 + g_kk U_k`` where ``U_k`` is the
normalised innovation of ``S_k'`` beyond ``S0``; the receiver forms
``E[S_k' | Y]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConditioningError
from .gaussian import GaussianProblem, conditional_rho, sample_sources
from .search import Objective, pattern_search


@dataclass(frozen=True)
class UncodedGains:
    g10: float
    g11: float
    g20: float
    g22: float

    def power(self) -> tuple[float, float]:
        return self.g10 ** 2 + self.g11 ** 2, self.g20 ** 2 + self.g22 ** 2

    def within_power(self, problem: GaussianProblem, tol: float = 1e-12) -> bool:
        q1, q2 = self.power()
        return q1 <= problem.p1 + tol and q2 <= problem.p2 + tol

    def to_dict(self) -> dict:
        return {"g10": self.g10, "g11": self.g11, "g20": self.g20, "g22": self.g22}

    @classmethod
    def from_dict(cls, data: dict) -> UncodedGains:
        return cls(*(float(data[k]) for k in ("g10", "g11", "g20", "g22")))


def _innovation_scales(problem: GaussianProblem) -> tuple[float, float, float]:
    a1 = 1.0 - problem.rho01 ** 2
    a2 = 1.0 - problem.rho02 ** 2
    if a1 <= 0.0 or a2 <= 0.0:
        raise DegenerateConditioningError("uncoded closed forms need |rho_0k| < 1")
    return math.sqrt(a1), math.sqrt(a2), problem.rho12 - problem.rho01 * problem.rho02


def decoder_coefficients(gains: UncodedGains, problem: GaussianProblem) -> tuple[float, float]:
    """Scalars ``c_k`` with ``E[S_k' | Y] = c_k Y``."""
    a1, a2, c = _innovation_scales(problem)
    num1, num2, den = _closed_form_terms(
        gains.g10, gains.g11, gains.g20, gains.g22, problem.rho01, problem.rho02, a1, a2, c)
    return num1 / den, num2 / den


def _closed_form_terms(g10, g11, g20, g22, r01, r02, a1, a2, c):
    common = g10 + g20
    den = common ** 2 + g11 ** 2 + g22 ** 2 + 2.0 * g11 * g22 * c / (a1 * a2) + 1.0
    num1 = r01 * common + g11 * a1 + g22 * c / a2
    num2 = r02 * common + g22 * a2 + g11 * c / a1
    return num1, num2, den


def uncoded_distortions(gains: UncodedGains, problem: GaussianProblem) -> tuple[float, float]:
    """Mean squared errors of the two MMSE reconstructions."""
    a1, a2, c = _innovation_scales(problem)
    num1, num2, den = _closed_form_terms(
        gains.g10, gains.g11, gains.g20, gains.g22, problem.rho01, problem.rho02, a1, a2, c)
    return 1.0 - num1 ** 2 / den, 1.0 - num2 ** 2 / den


def _distortions_on_sphere(phi1, phi2, problem):
    """Vectorised distortions for gains on the power spheres."""
    a1, a2, c = _innovation_scales(problem)
    s1, s2 = math.sqrt(problem.p1), math.sqrt(problem.p2)
    g10, g11 = s1 * np.cos(phi1), s1 * np.sin(phi1)
    g20, g22 = s2 * np.cos(phi2), s2 * np.sin(phi2)
    num1, num2, den = _closed_form_terms(
        g10, g11, g20, g22, problem.rho01, problem.rho02, a1, a2, c)
    return 1.0 - num1 ** 2 / den, 1.0 - num2 ** 2 / den


def _gains_from_angles(phi1: float, phi2: float, problem: GaussianProblem) -> UncodedGains:
    s1, s2 = math.sqrt(problem.p1), math.sqrt(problem.p2)
    return UncodedGains(s1 * math.cos(phi1), s1 * math.sin(phi1),
                        s2 * math.cos(phi2), s2 * math.sin(phi2))


@dataclass(frozen=True)
class UncodedOptimum:
    gains: UncodedGains
    d1: float
    d2: float
    value: float


def optimize_uncoded(problem: GaussianProblem, resolution: int = 41,
                     objective: Objective = Objective(),
                     extra_starts: tuple[UncodedGains, ...] = ()) -> UncodedOptimum:
    """Best gains on the power spheres by grid search plus local refinement.

    Both power constraints are taken as active: the distortions only depend
    on the gains through the closed forms, and scaling all gains up never
    hurts.  ``extra_starts`` are evaluated as given (not projected to the
    spheres) and win if nothing on the grid beats them.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if problem.p1 == 0.0 and problem.p2 == 0.0:
        gains = UncodedGains(0.0, 0.0, 0.0, 0.0)
        d1, d2 = uncoded_distortions(gains, problem)
        return UncodedOptimum(gains, d1, d2, objective(d1, d2))

    angles = np.linspace(-math.pi, math.pi, resolution, endpoint=False)
    p1, p2 = np.meshgrid(angles, angles, indexing="ij")
    d1, d2 = _distortions_on_sphere(p1, p2, problem)
    if objective.kind == "max":
        scores = np.maximum(d1, d2)
    elif objective.kind == "weighted":
        scores = d1 + objective.weight * d2
    else:
        scores = np.maximum(d1 - objective.targets[0], d2 - objective.targets[1])

    def score(phi):
        a, b = _distortions_on_sphere(phi[0], phi[1], problem)
        return objective(float(a), float(b))

    step = 2.0 * math.pi / resolution
    order = np.argsort(scores, axis=None, kind="stable")[:4]
    candidates = []
    for flat in order:
        i, j = np.unravel_index(flat, scores.shape)
        res = pattern_search(score, [angles[i], angles[j]], step, max_evals=2000, min_step=1e-11)
        candidates.append((res.value, res.x[0], res.x[1]))
    if problem.rho01 == problem.rho02 and problem.p1 == problem.p2:
        # exchange symmetry: a symmetric optimum is preferred among ties
        sym = [score(np.array([a, a])) for a in angles]
        a0 = angles[int(np.argmin(sym))]
        res = pattern_search(lambda t: score(np.array([t[0], t[0]])), [a0], step,
                             max_evals=1000, min_step=1e-12)
        candidates.append((res.value - 1e-12, res.x[0], res.x[0]))
    value, phi1, phi2 = min(candidates, key=lambda t: t[0])
    gains = _gains_from_angles(phi1, phi2, problem)
    d1, d2 = uncoded_distortions(gains, problem)
    best = UncodedOptimum(gains, d1, d2, objective(d1, d2))
    for g in extra_starts:
        e1, e2 = uncoded_distortions(g, problem)
        if objective(e1, e2) < best.value:
            best = UncodedOptimum(g, e1, e2, objective(e1, e2))
    return best


def rebase_gains(gains: UncodedGains, source: GaussianProblem,
                 target: GaussianProblem) -> UncodedGains:
    """Carry the private part of each encoder over to another source model.

    Writing ``X_k = alpha_k S0 + gamma_k S_k'`` under ``source``, the result
    sends ``gamma_k S_k'`` under ``target``. When ``source`` has no common
    part this reproduces exactly the same distortions (they depend only on
    ``rho12`` and the powers) with no more power than before.
    """
    sa1, sa2, _ = _innovation_scales(source)
    ta1, ta2, _ = _innovation_scales(target)
    gam1 = gains.g11 / sa1
    gam2 = gains.g22 / sa2
    return UncodedGains(gam1 * target.rho01, gam1 * ta1, gam2 * target.rho02, gam2 * ta2)


@dataclass(frozen=True)
class UncodedSimulation:
    d1: float
    d2: float
    stderr1: float
    stderr2: float
    n: int


def simulate_uncoded(problem: GaussianProblem, gains: UncodedGains, n: int,
                     seed: int) -> UncodedSimulation:
    """Monte Carlo run of encoder, channel and the closed-form linear decoder."""
    if n < 1:
        raise ValueError("n must be at least 1")
    src_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    dec = conditional_rho(problem)
    s = sample_sources(problem, dec, n, src_seed)
    x1 = gains.g10 * s.s0 + gains.g11 * s.u1
    x2 = gains.g20 * s.s0 + gains.g22 * s.u2
    y = x1 + x2 + np.random.default_rng(noise_seed).standard_normal(n)
    c1, c2 = decoder_coefficients(gains, problem)
    e1 = (s.s1p - c1 * y) ** 2
    e2 = (s.s2p - c2 * y) ** 2
    root_n = math.sqrt(n)
    se1 = float(np.std(e1, ddof=1)) / root_n if n > 1 else math.inf
    se2 = float(np.std(e2, ddof=1)) / root_n if n > 1 else math.inf
    return UncodedSimulation(float(np.mean(e1)), float(np.mean(e2)), se1, se2, n)
