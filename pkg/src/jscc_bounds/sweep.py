"""Power sweeps of the symmetric distortion for all bound curves.

Each curve is one of ``{uncoded, hybrid, outer}`` for the source model
with its common part (``*_common``) or for the companion with
``rho01 = rho02 = 0`` (``*_no_common``).  Grid points are processed in
increasing power.  Every optimiser is seeded with the previous power's
optimum (still feasible at higher power), and every with-common search
with the no-common optimum.  This makes the inner curves monotone and
keeps the common-part comparison exact.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, ValidationError
from .gaussian import GaussianProblem
from .hybrid import HybridParams, evaluate_hybrid, optimize_hybrid, private_only
from .outer import OuterGrid, symmetric_outer_min_distortion
from .search import Objective
from .uncoded import UncodedOptimum, optimize_uncoded, rebase_gains, uncoded_distortions

CURVES = ("uncoded_common", "uncoded_no_common", "hybrid_common", "hybrid_no_common",
          "outer_common", "outer_no_common")
CSV_HEADER = ("curve", "param_db", "param_linear", "d1", "d2", "feasible", "margin_min",
              "seconds")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(p: float) -> float:
    return 10.0 * math.log10(p) if p > 0 else -math.inf


@dataclass(frozen=True)
class SweepSpec:
    """A symmetric-power sweep.

    ``grid`` holds powers in dB when ``scale == "db"`` and linear powers
    otherwise.  The no-common companion shares ``rho12``.
    """

    rho01: float = 0.8
    rho02: float = 0.8
    rho12: float = 0.3
    grid: tuple[float, ...] = tuple(float(x) for x in range(21))
    scale: str = "db"
    curves: tuple[str, ...] = CURVES
    seed: int = 0
    budget: int = 2000
    uncoded_resolution: int = 41
    outer_grid: OuterGrid = field(default_factory=OuterGrid)
    outer_tol: float = 1e-8

    def __post_init__(self):
        grid = tuple(float(g) for g in self.grid)
        curves = tuple(self.curves)
        if not grid:
            raise ValidationError("grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("grid must be strictly increasing")
        if not curves:
            raise ValidationError("curve set must not be empty")
        unknown = [c for c in curves if c not in CURVES]
        if unknown:
            raise ValidationError(f"unknown curves {unknown}")
        if self.scale not in ("db", "linear"):
            raise ValidationError("scale must be 'db' or 'linear'")
        if self.scale == "linear" and grid[0] < 0:
            raise ValidationError("linear powers must be non-negative")
        if self.budget < 0:
            raise ValidationError("budget must be non-negative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "curves", curves)
        if isinstance(self.outer_grid, dict):
            object.__setattr__(self, "outer_grid", OuterGrid(**self.outer_grid))
        # validates the correlations early
        self.problem(1.0, True)

    def problem(self, power: float, common: bool) -> GaussianProblem:
        if common:
            return GaussianProblem(self.rho01, self.rho02, self.rho12, power, power)
        return GaussianProblem(0.0, 0.0, self.rho12, power, power)

    def powers(self) -> list[tuple[float, float]]:
        """``(param_db, param_linear)`` per grid point."""
        if self.scale == "db":
            return [(g, db_to_linear(g)) for g in self.grid]
        return [(linear_to_db(g), g) for g in self.grid]

    def to_dict(self) -> dict:
        return {"rho01": self.rho01, "rho02": self.rho02, "rho12": self.rho12,
                "grid": list(self.grid), "scale": self.scale, "curves": list(self.curves),
                "seed": self.seed, "budget": self.budget,
                "uncoded_resolution": self.uncoded_resolution,
                "outer_grid": self.outer_grid.to_dict(), "outer_tol": self.outer_tol}

    @classmethod
    def from_dict(cls, data: dict) -> SweepSpec:
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValidationError(f"unknown sweep options {sorted(extra)}")
        kw = dict(data)
        if "outer_grid" in kw:
            og = kw["outer_grid"]
            if not isinstance(og, dict):
                raise ValidationError("outer_grid must be an object")
            kw["outer_grid"] = OuterGrid(**og)
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None


@dataclass(frozen=True)
class RegionSample:
    curve: str
    param_db: float
    param_linear: float
    d1: float
    d2: float
    feasible: bool
    margin_min: float
    seconds: float | None = None
    error: str | None = None
    params: dict | None = None

    def csv_row(self, timing: bool) -> list[str]:
        secs = "" if not timing or self.seconds is None else repr(self.seconds)
        return [self.curve, repr(self.param_db), repr(self.param_linear), repr(self.d1),
                repr(self.d2), "1" if self.feasible else "0", repr(self.margin_min), secs]


def run_sweep(spec: SweepSpec, threads: int = 1) -> list[RegionSample]:
    """Evaluate every requested curve at every grid point.

    Rows come back sorted by ``(curve, param_linear)``.  A module error at a
    point is recorded on that row (``feasible`` false, distortions ``nan``)
    and the sweep continues.
    """
    want = set(spec.curves)
    # a curve's result must not depend on which other curves were requested,
    # so every warm-start source of a requested curve is always computed
    need_hyb_nc = bool(want & {"hybrid_no_common", "hybrid_common"})
    need_unc_c = bool(want & {"uncoded_common", "hybrid_common"})
    need_unc_nc = need_unc_c or need_hyb_nc or "uncoded_no_common" in want
    objective = Objective()
    rows: list[RegionSample] = []
    prev: dict[str, object] = {}

    for k, (pdb, plin) in enumerate(spec.powers()):
        seed = int(np.random.SeedSequence([spec.seed, k]).generate_state(1)[0])
        nc = spec.problem(plin, False)
        wc = spec.problem(plin, True)
        unc_nc = unc_c = None

        if need_unc_nc:
            t0 = time.perf_counter()
            starts = (prev["uncoded_no_common"],) if "uncoded_no_common" in prev else ()
            unc_nc = _uncoded(nc, spec, objective, starts)
            if "uncoded_no_common" in want:
                rows.append(_uncoded_row("uncoded_no_common", pdb, plin, unc_nc,
                                         time.perf_counter() - t0))
        if need_unc_c:
            t0 = time.perf_counter()
            starts = []
            if isinstance(unc_nc, UncodedOptimum):
                try:
                    starts.append(rebase_gains(unc_nc.gains, nc, wc))
                except BoundsError:
                    pass
            if "uncoded_common" in prev:
                starts.append(prev["uncoded_common"])
            unc_c = _uncoded(wc, spec, objective, tuple(starts))
            if "uncoded_common" in want:
                rows.append(_uncoded_row("uncoded_common", pdb, plin, unc_c,
                                         time.perf_counter() - t0))
        if isinstance(unc_nc, UncodedOptimum):
            prev["uncoded_no_common"] = unc_nc.gains
        if isinstance(unc_c, UncodedOptimum):
            prev["uncoded_common"] = unc_c.gains

        hyb_nc = None
        if need_hyb_nc:
            t0 = time.perf_counter()
            starts = [prev["hybrid_no_common"]] if "hybrid_no_common" in prev else []
            hyb_nc = _hybrid(nc, spec, seed, starts, False, threads, unc_nc)
            if "hybrid_no_common" in want:
                rows.append(_hybrid_row("hybrid_no_common", pdb, plin, hyb_nc,
                                        time.perf_counter() - t0))
            if not isinstance(hyb_nc, str):
                prev["hybrid_no_common"] = hyb_nc.params
        if "hybrid_common" in want:
            t0 = time.perf_counter()
            starts = []
            if hyb_nc is not None and not isinstance(hyb_nc, str):
                starts.append(private_only(hyb_nc.params))
            if "hybrid_common" in prev:
                starts.append(prev["hybrid_common"])
            hyb_c = _hybrid(wc, spec, seed, starts, True, threads, unc_c)
            rows.append(_hybrid_row("hybrid_common", pdb, plin, hyb_c,
                                    time.perf_counter() - t0))
            if not isinstance(hyb_c, str):
                prev["hybrid_common"] = hyb_c.params

        for curve, prob in (("outer_no_common", nc), ("outer_common", wc)):
            if curve not in want:
                continue
            t0 = time.perf_counter()
            try:
                d = symmetric_outer_min_distortion(prob, spec.outer_grid, spec.outer_tol)
                rows.append(RegionSample(curve, pdb, plin, d, d, True, 0.0,
                                         time.perf_counter() - t0))
            except BoundsError as exc:
                rows.append(_error_row(curve, pdb, plin, exc, time.perf_counter() - t0))

    order = {c: i for i, c in enumerate(CURVES)}
    rows.sort(key=lambda r: (order[r.curve], r.param_linear))
    return rows


def _uncoded(problem, spec, objective, starts):
    try:
        return optimize_uncoded(problem, spec.uncoded_resolution, objective, tuple(starts))
    except BoundsError as exc:
        return f"{type(exc).__name__}: {exc}"


def _hybrid(problem, spec, seed, starts, use_common, threads, unc):
    if spec.budget < 1:
        return "budget is zero"
    try:
        uncoded = unc if isinstance(unc, UncodedOptimum) else None
        return optimize_hybrid(problem, spec.budget, seed, extra_starts=tuple(starts),
                               use_common=use_common, threads=threads,
                               uncoded_resolution=spec.uncoded_resolution, uncoded=uncoded)
    except BoundsError as exc:
        return f"{type(exc).__name__}: {exc}"


def _error_row(curve, pdb, plin, exc, secs):
    msg = exc if isinstance(exc, str) else f"{type(exc).__name__}: {exc}"
    return RegionSample(curve, pdb, plin, math.nan, math.nan, False, math.nan, secs, msg)


def _uncoded_row(curve, pdb, plin, opt, secs):
    if isinstance(opt, str):
        return _error_row(curve, pdb, plin, opt, secs)
    return RegionSample(curve, pdb, plin, opt.d1, opt.d2, True, 0.0, secs,
                        params=opt.gains.to_dict())


def _hybrid_row(curve, pdb, plin, opt, secs):
    if isinstance(opt, str):
        return _error_row(curve, pdb, plin, opt, secs)
    ev = opt.evaluation
    return RegionSample(curve, pdb, plin, ev.d1, ev.d2, ev.feasible, ev.margin_min, secs,
                        params=opt.params.to_dict())


def rows_to_csv(rows: list[RegionSample], timing: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow(r.csv_row(timing))
    return buf.getvalue()


def revalidate_hybrid_rows(rows: list[RegionSample], spec: SweepSpec, tol: float = 1e-9) -> bool:
    """Re-evaluate every emitted hybrid point from its stored parameters."""
    for r in rows:
        if not r.curve.startswith("hybrid") or r.params is None:
            continue
        prob = spec.problem(r.param_linear, r.curve == "hybrid_common")
        ev = evaluate_hybrid(HybridParams.from_dict(r.params), prob)
        if ev.feasible != r.feasible or abs(ev.d1 - r.d1) > tol or abs(ev.d2 - r.d2) > tol:
            return False
    return True


def uncoded_row_distortions(row: RegionSample, spec: SweepSpec) -> tuple[float, float]:
    from .uncoded import UncodedGains
    prob = spec.problem(row.param_linear, row.curve == "uncoded_common")
    return uncoded_distortions(UncodedGains.from_dict(row.params), prob)
