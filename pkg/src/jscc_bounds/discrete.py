"""Finite-alphabet inner-bound machinery.

Covers common-part extraction, search-based certification of the
hybrid-coding inner region for a discrete MAC, lossless admissibility,
the common-message MAC capacity region and the distributed source coding
inner region.  All searchers are constructive: a returned certificate is
a proof of achievability, while ``None`` only means the search gave up.

Strict inequalities ``lhs < rhs`` are enforced as ``rhs - lhs > slack``.
A condition whose left side is zero (``lhs <= ZERO_RATE_TOL``) asks for no
digital rate and is accepted as met; this admits purely uncoded schemes
whose auxiliaries carry nothing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError
from .pmf import JointPmf, batch_mi, entropy_of

SLACK = 1e-9
ZERO_RATE_TOL = 1e-12
LOSSLESS_TOL = 1e-12


# ------------------------------------------------------------------ common part

@dataclass(frozen=True)
class CommonPart:
    """Maps ``f1: S1 -> S0`` and ``f2: S2 -> S0`` agreeing on the support."""

    f1: tuple[int, ...]
    f2: tuple[int, ...]
    s0_alphabet: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.s0_alphabet)

    def to_dict(self) -> dict:
        return {"f1": list(self.f1), "f2": list(self.f2), "s0_alphabet": list(self.s0_alphabet)}


def _pair_table(pmf: JointPmf | np.ndarray) -> np.ndarray:
    table = pmf.table if isinstance(pmf, JointPmf) else np.asarray(pmf, dtype=float)
    if table.ndim != 2:
        raise ValidationError("expected a two-source pmf")
    return table


def extract_common_part(pmf: JointPmf | np.ndarray) -> CommonPart:
    """Maximal common function of the two coordinates.

    ``S0`` is the connected component of ``(s1, s2)`` in the bipartite graph
    joining ``s1`` and ``s2`` whenever ``p(s1, s2) > 0`` exactly.  Components
    are numbered in order of their smallest ``s1``; symbols with zero
    marginal mass are sent to component 0.
    """
    table = _pair_table(pmf)
    n1, n2 = table.shape
    rows, cols = np.nonzero(table > 0)
    graph = csr_matrix((np.ones(rows.size), (rows, n1 + cols)), shape=(n1 + n2, n1 + n2))
    _, labels = connected_components(graph, directed=False)
    on1 = table.sum(axis=1) > 0
    on2 = table.sum(axis=0) > 0
    order: dict[int, int] = {}
    for s in range(n1):
        if on1[s] and labels[s] not in order:
            order[labels[s]] = len(order)
    f1 = tuple(order[labels[s]] if on1[s] else 0 for s in range(n1))
    f2 = tuple(order[labels[n1 + s]] if on2[s] else 0 for s in range(n2))
    return CommonPart(f1, f2, tuple(str(k) for k in range(max(len(order), 1))))


def is_common_function(table: np.ndarray, g1: Sequence[int], g2: Sequence[int]) -> bool:
    """True when ``g1(S1) = g2(S2)`` with probability one."""
    rows, cols = np.nonzero(np.asarray(table) > 0)
    return all(g1[r] == g2[c] for r, c in zip(rows, cols))


# ------------------------------------------------------------------ channels

@dataclass(frozen=True)
class Channel:
    """Discrete MAC ``p(y | x1, x2)`` stored as a ``(|X1|, |X2|, |Y|)`` table."""

    table: np.ndarray
    x1_alphabet: tuple[str, ...] = ()
    x2_alphabet: tuple[str, ...] = ()
    y_alphabet: tuple[str, ...] = ()

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if table.ndim != 3:
            raise ValidationError("channel table must be indexed (x1, x2, y)")
        if np.any(table < 0) or not np.allclose(table.sum(axis=2), 1.0, atol=1e-12, rtol=0):
            raise ValidationError("each channel row must be a pmf over y")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        for name, n in (("x1_alphabet", table.shape[0]), ("x2_alphabet", table.shape[1]),
                        ("y_alphabet", table.shape[2])):
            alph = tuple(str(a) for a in getattr(self, name)) or tuple(str(i) for i in range(n))
            if len(alph) != n:
                raise ValidationError(f"{name} has the wrong length")
            object.__setattr__(self, name, alph)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.table.shape

    def to_dict(self) -> dict:
        return {"x1_alphabet": list(self.x1_alphabet), "x2_alphabet": list(self.x2_alphabet),
                "y_alphabet": list(self.y_alphabet), "table": self.table.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> Channel:
        try:
            return cls(np.array(data["table"], dtype=float), tuple(data.get("x1_alphabet", ())),
                       tuple(data.get("x2_alphabet", ())), tuple(data.get("y_alphabet", ())))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed channel: {exc}") from None


def noiseless_mac(n1: int = 2, n2: int = 2) -> Channel:
    """``Y = (X1, X2)``."""
    table = np.zeros((n1, n2, n1 * n2))
    for a in range(n1):
        for b in range(n2):
            table[a, b, a * n2 + b] = 1.0
    return Channel(table)


def useless_mac(n1: int = 2, n2: int = 2, ny: int = 2) -> Channel:
    """Output independent of the inputs."""
    return Channel(np.full((n1, n2, ny), 1.0 / ny))


def hamming(n: int, m: int | None = None) -> np.ndarray:
    m = n if m is None else m
    return (np.arange(n)[:, None] != np.arange(m)[None, :]).astype(float)


# ------------------------------------------------------------------ search config

@dataclass(frozen=True)
class SearchConfig:
    """Limits of the constructive searches.

    Cardinalities are tried in increasing order up to ``max_card``.  For
    each, ``deterministic_tables`` deterministic conditional tables come
    first, then ``grid_tables`` tables with rows on a simplex grid of
    resolution ``grid_resolution`` and ``dirichlet_tables`` random ones.
    Encoder pairs are enumerated when there are at most
    ``max_encoder_pairs`` of them and otherwise ``encoder_samples`` are drawn.
    """

    max_card: tuple[int, int, int] = (2, 2, 2)
    deterministic_tables: int = 32
    grid_tables: int = 16
    dirichlet_tables: int = 16
    grid_resolution: int = 5
    max_encoder_pairs: int = 4096
    encoder_samples: int = 256
    batch: int = 1024
    seed: int = 0
    slack: float = SLACK

    def __post_init__(self):
        if len(self.max_card) != 3 or min(self.max_card) < 1:
            raise ValueError("max_card needs three positive cardinalities")
        if self.grid_resolution < 1:
            raise ValueError("grid_resolution must be positive")
        object.__setattr__(self, "max_card", tuple(int(c) for c in self.max_card))

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, data: dict) -> SearchConfig:
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValidationError(f"unknown search options {sorted(extra)}")
        kw = dict(data)
        if "max_card" in kw:
            kw["max_card"] = tuple(kw["max_card"])
        return cls(**kw)


def _simplex_grid(k: int, g: int) -> np.ndarray:
    """All pmfs on ``k`` symbols with masses in multiples of ``1/g``."""
    if k == 1:
        return np.ones((1, 1))
    pts = [c for c in itertools.product(range(g + 1), repeat=k - 1) if sum(c) <= g]
    return np.array([[*c, g - sum(c)] for c in pts], dtype=float) / g


def _function_tables(n_in: int, n_out: int, limit: int) -> list[np.ndarray]:
    """Up to ``limit`` functions ``[n_in] -> [n_out]`` in lexicographic order."""
    out = []
    for f in itertools.product(range(n_out), repeat=n_in):
        out.append(np.array(f, dtype=np.intp))
        if len(out) >= limit:
            break
    return out


def _one_hot(f: np.ndarray, n_out: int) -> np.ndarray:
    return np.eye(n_out)[f]


def _conditional_candidates(n_rows: int, n_out: int, config: SearchConfig,
                            rng: np.random.Generator, kind: str) -> list[np.ndarray]:
    """Candidate conditional tables ``(n_rows, n_out)`` of one kind."""
    if n_out == 1:
        return [np.ones((n_rows, 1))]
    if kind == "deterministic":
        return [_one_hot(f, n_out) for f in
                _function_tables(n_rows, n_out, config.deterministic_tables)]
    if kind == "grid":
        grid = _simplex_grid(n_out, config.grid_resolution)
        return [grid[rng.integers(0, len(grid), n_rows)] for _ in range(config.grid_tables)]
    return [rng.dirichlet(np.ones(n_out), n_rows) for _ in range(config.dirichlet_tables)]


def _auxiliary_tables(n0: int, n1: int, n2: int, cards, config: SearchConfig,
                      rng: np.random.Generator):
    """Candidate ``(p(v0|s0), p(v1|s1,v0), p(v2|s2,v0))`` triples, in search order."""
    c0, c1, c2 = cards
    for kind in ("deterministic", "grid", "dirichlet"):
        t0 = _conditional_candidates(n0, c0, config, rng, kind)
        t1 = _conditional_candidates(n1 * c0, c1, config, rng, kind)
        t2 = _conditional_candidates(n2 * c0, c2, config, rng, kind)
        if kind == "deterministic":
            combos = itertools.product(t0, t1, t2)
            limit = config.deterministic_tables
        else:
            combos = zip(itertools.cycle(t0), itertools.cycle(t1), itertools.cycle(t2))
            limit = config.grid_tables if kind == "grid" else config.dirichlet_tables
        for count, (a, b, c) in enumerate(combos):
            if count >= limit:
                break
            yield kind, a, b.reshape(n1, c0, c1), c.reshape(n2, c0, c2)
        if c0 == c1 == c2 == 1:
            return


def _cardinalities(max_card):
    combos = itertools.product(*(range(1, m + 1) for m in max_card))
    return sorted(combos, key=lambda c: (sum(c), c))


# ------------------------------------------------------------------ certificates

@dataclass(frozen=True)
class InnerCertificate:
    """Explicit auxiliaries, maps and the achieved distortions and margins.

    Table layouts: ``pv0[s0, v0]``, ``pv1[s1, v0, v1]``, ``pv2[s2, v0, v2]``,
    ``x1[v0, v1, s1]``, ``x2[v0, v2, s2]``, ``s1hat[v0, v1, v2, y]`` and
    ``s2hat`` likewise (``y`` has size one for source coding problems).
    """

    cardinalities: tuple[int, int, int]
    pv0: np.ndarray
    pv1: np.ndarray
    pv2: np.ndarray
    x1: np.ndarray | None
    x2: np.ndarray | None
    s1hat: np.ndarray
    s2hat: np.ndarray
    d1: float
    d2: float
    margins: tuple[float, ...]
    source_info: tuple[float, ...]
    rate_side: tuple[float, ...]
    search_limits: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def enc(a):
            return None if a is None else np.asarray(a).tolist()
        return {"cardinalities": list(self.cardinalities), "pv0": enc(self.pv0),
                "pv1": enc(self.pv1), "pv2": enc(self.pv2), "x1": enc(self.x1),
                "x2": enc(self.x2), "s1hat": enc(self.s1hat), "s2hat": enc(self.s2hat),
                "d1": self.d1, "d2": self.d2, "margins": list(self.margins),
                "source_info": list(self.source_info), "rate_side": list(self.rate_side),
                "search_limits": self.search_limits}


def _base_joint(src: np.ndarray, f1: Sequence[int], pv0, pv1, pv2) -> np.ndarray:
    """``p(s1, s2, v0, v1, v2)``."""
    pv0_s1 = pv0[np.asarray(f1)]  # (s1, v0)
    return np.einsum("ij,ik,ikl,jkm->ijklm", src, pv0_s1, pv1, pv2)


def _encoder_space(c0, ck, nk, nx):
    return nx ** (c0 * ck * nk)


def _encoder_batches(c0, c1, c2, n1, n2, nx1, nx2, config: SearchConfig,
                     rng: np.random.Generator):
    """Batches of encoder index tables ``x1[b, v0, v1, s1]`` and ``x2[b, v0, v2, s2]``."""
    size1 = c0 * c1 * n1
    size2 = c0 * c2 * n2
    total = _encoder_space(c0, c1, n1, nx1) * _encoder_space(c0, c2, n2, nx2)
    shape1, shape2 = (c0, c1, n1), (c0, c2, n2)
    if total <= config.max_encoder_pairs:
        funcs1 = np.array(list(itertools.product(range(nx1), repeat=size1)), dtype=np.intp)
        funcs2 = np.array(list(itertools.product(range(nx2), repeat=size2)), dtype=np.intp)
        i1, i2 = np.meshgrid(np.arange(len(funcs1)), np.arange(len(funcs2)), indexing="ij")
        i1, i2 = i1.ravel(), i2.ravel()
        for start in range(0, total, config.batch):
            sl = slice(start, start + config.batch)
            yield (funcs1[i1[sl]].reshape(-1, *shape1), funcs2[i2[sl]].reshape(-1, *shape2))
    else:
        n = config.encoder_samples
        a = rng.integers(0, nx1, (n, size1))
        b = rng.integers(0, nx2, (n, size2))
        for start in range(0, n, config.batch):
            sl = slice(start, start + config.batch)
            yield a[sl].reshape(-1, *shape1), b[sl].reshape(-1, *shape2)


def _bayes_decoders(joint: np.ndarray, dist1: np.ndarray, dist2: np.ndarray):
    """Optimal reconstructions and their distortions for a batch of joints.

    ``joint`` axes are ``(b, s1, s2, v0, v1, v2, y)``.
    """
    cost1 = np.einsum("bijklmn,ir->bklmnr", joint, dist1)
    cost2 = np.einsum("bijklmn,jr->bklmnr", joint, dist2)
    hat1 = np.argmin(cost1, axis=-1)
    hat2 = np.argmin(cost2, axis=-1)
    d1 = np.take_along_axis(cost1, hat1[..., None], -1).sum(axis=(1, 2, 3, 4, 5))
    d2 = np.take_along_axis(cost2, hat2[..., None], -1).sum(axis=(1, 2, 3, 4, 5))
    return hat1, hat2, d1, d2


# axes in the batched joint: 0 batch, 1 s1, 2 s2, 3 v0, 4 v1, 5 v2, 6 y
_S1, _S2, _V0, _V1, _V2, _Y = 1, 2, 3, 4, 5, 6
_CHANNEL_TERMS = (
    ((_V1,), (_S1,), (_V0, _V2)),
    ((_V2,), (_S2,), (_V0, _V1)),
    ((_V1, _V2), (_S1, _S2), (_V0,)),
    ((_V0, _V1, _V2), (_S1, _S2), ()),
)
_DSC_TERMS = (
    ((_V1,), (_S1,), (_V0, _V2)),
    ((_V2,), (_S2,), (_V0, _V1)),
    ((_V0, _V1, _V2), (_S1, _S2), ()),
)


def _accept(lhs: np.ndarray, rhs: np.ndarray, slack: float) -> np.ndarray:
    return (rhs - lhs > slack) | (lhs <= ZERO_RATE_TOL)


def _check_inputs(source: JointPmf, dist1, dist2):
    table = _pair_table(source)
    dist1 = np.asarray(dist1, dtype=float)
    dist2 = np.asarray(dist2, dtype=float)
    if dist1.ndim != 2 or dist1.shape[0] != table.shape[0]:
        raise ValidationError("dist1 must be indexed (s1, s1hat)")
    if dist2.ndim != 2 or dist2.shape[0] != table.shape[1]:
        raise ValidationError("dist2 must be indexed (s2, s2hat)")
    return table, dist1, dist2


def certify_inner_point(source: JointPmf, channel: Channel, d1: float, d2: float,
                        dist1, dist2, config: SearchConfig = SearchConfig()
                        ) -> InnerCertificate | None:
    """Search for a hybrid-coding certificate achieving ``(d1, d2)``.

    Reconstructions are chosen Bayes-optimally for each candidate, which
    covers every deterministic reconstruction map at once.
    """
    table, dist1, dist2 = _check_inputs(source, dist1, dist2)
    cp = extract_common_part(table)
    n1, n2 = table.shape
    nx1, nx2, ny = channel.shape
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    W = channel.table
    for cards in _cardinalities(config.max_card):
        c0, c1, c2 = cards
        for _, pv0, pv1, pv2 in _auxiliary_tables(cp.size, n1, n2, cards, config, rng):
            base = _base_joint(table, cp.f1, pv0, pv1, pv2)
            src_info = None
            for x1, x2 in _encoder_batches(c0, c1, c2, n1, n2, nx1, nx2, config, rng):
                # x1[b, v0, v1, s1] -> (b, s1, 1, v0, v1, 1); x2 -> (b, 1, s2, v0, 1, v2)
                i1 = np.transpose(x1, (0, 3, 1, 2))[:, :, None, :, :, None]
                i2 = np.transpose(x2, (0, 3, 1, 2))[:, None, :, :, None, :]
                joint = base[None, ..., None] * W[i1, i2]
                hat1, hat2, dd1, dd2 = _bayes_decoders(joint, dist1, dist2)
                ok = (dd1 <= d1 + 1e-12) & (dd2 <= d2 + 1e-12)
                if not ok.any():
                    continue
                if src_info is None:
                    src_info = [float(batch_mi(base[None, ..., None], a, s, c)[0])
                                for a, s, c in _CHANNEL_TERMS]
                rhs = [batch_mi(joint, a, (_Y,), c) for a, _, c in _CHANNEL_TERMS]
                for lhs, r in zip(src_info, rhs):
                    ok &= _accept(np.full_like(r, lhs), r, config.slack)
                if ok.any():
                    b = int(np.flatnonzero(ok)[0])
                    rates = tuple(float(r[b]) for r in rhs)
                    return InnerCertificate(
                        cards, pv0, pv1, pv2, x1[b].copy(), x2[b].copy(), hat1[b], hat2[b],
                        float(dd1[b]), float(dd2[b]),
                        tuple(r - s for r, s in zip(rates, src_info)),
                        tuple(src_info), rates, config.to_dict())
    return None


def dsc_inner_check(source: JointPmf, r1: float, r2: float, d1: float, d2: float,
                    dist1, dist2, config: SearchConfig = SearchConfig()
                    ) -> InnerCertificate | None:
    """Certificate for the distributed source coding inner region at rates ``(r1, r2)`` nats."""
    table, dist1, dist2 = _check_inputs(source, dist1, dist2)
    cp = extract_common_part(table)
    n1, n2 = table.shape
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    rates = (r1, r2, r1 + r2)
    for cards in _cardinalities(config.max_card):
        for _, pv0, pv1, pv2 in _auxiliary_tables(cp.size, n1, n2, cards, config, rng):
            joint = _base_joint(table, cp.f1, pv0, pv1, pv2)[None, ..., None]
            hat1, hat2, dd1, dd2 = _bayes_decoders(joint, dist1, dist2)
            if dd1[0] > d1 + 1e-12 or dd2[0] > d2 + 1e-12:
                continue
            src = [float(batch_mi(joint, a, s, c)[0]) for a, s, c in _DSC_TERMS]
            if all(_accept(np.array(s), np.array(r), config.slack) for s, r in zip(src, rates)):
                return InnerCertificate(
                    cards, pv0, pv1, pv2, None, None, hat1[0], hat2[0], float(dd1[0]),
                    float(dd2[0]), tuple(r - s for r, s in zip(rates, src)), tuple(src),
                    rates, config.to_dict())
    return None


# ------------------------------------------------------------------ independent re-check

@dataclass(frozen=True)
class CertificateCheck:
    d1: float
    d2: float
    source_info: tuple[float, ...]
    rate_side: tuple[float, ...]
    margins: tuple[float, ...]
    valid: bool


def _entropy_dict(joint: dict, keep: Sequence[int]) -> float:
    marg: dict = {}
    for key, p in joint.items():
        sub = tuple(key[i] for i in keep)
        marg[sub] = marg.get(sub, 0.0) + p
    return -sum(p * math.log(p) for p in marg.values() if p > 0)


def _cmi_dict(joint: dict, a, b, c) -> float:
    a, b, c = list(a), list(b), list(c)
    return (_entropy_dict(joint, a + c) + _entropy_dict(joint, b + c)
            - _entropy_dict(joint, a + b + c) - _entropy_dict(joint, c))


def validate_certificate(cert: InnerCertificate, source: JointPmf, dist1, dist2,
                         target: tuple[float, float], channel: Channel | None = None,
                         rates: tuple[float, float] | None = None,
                         tol: float = 1e-9) -> CertificateCheck:
    """Rebuild the joint distribution symbol by symbol and recheck everything.

    Uses plain loops and dictionaries, sharing no code with the searchers.
    Exactly one of ``channel`` (MAC problem) or ``rates`` (source coding
    problem) must be given.
    """
    if (channel is None) == (rates is None):
        raise ValueError("give either a channel or a rate pair")
    table = _pair_table(source)
    n1, n2 = table.shape
    # common part recomputed by flood fill
    comp1 = [-1] * n1
    comp2 = [-1] * n2
    label = 0
    for start in range(n1):
        if comp1[start] >= 0 or not any(table[start, j] > 0 for j in range(n2)):
            continue
        stack = [("a", start)]
        comp1[start] = label
        while stack:
            side, i = stack.pop()
            if side == "a":
                for j in range(n2):
                    if table[i, j] > 0 and comp2[j] < 0:
                        comp2[j] = label
                        stack.append(("b", j))
            else:
                for k in range(n1):
                    if table[k, i] > 0 and comp1[k] < 0:
                        comp1[k] = label
                        stack.append(("a", k))
        label += 1
    comp1 = [max(c, 0) for c in comp1]

    c0, c1, c2 = cert.cardinalities
    ny = 1 if channel is None else channel.shape[2]
    joint: dict = {}
    for s1 in range(n1):
        for s2 in range(n2):
            ps = float(table[s1, s2])
            if ps == 0:
                continue
            for v0 in range(c0):
                p0 = ps * float(cert.pv0[comp1[s1]][v0])
                if p0 == 0:
                    continue
                for v1 in range(c1):
                    p1 = p0 * float(cert.pv1[s1][v0][v1])
                    if p1 == 0:
                        continue
                    for v2 in range(c2):
                        p2 = p1 * float(cert.pv2[s2][v0][v2])
                        if p2 == 0:
                            continue
                        for y in range(ny):
                            if channel is None:
                                py = 1.0
                            else:
                                a = int(cert.x1[v0][v1][s1])
                                b = int(cert.x2[v0][v2][s2])
                                py = float(channel.table[a][b][y])
                            if p2 * py > 0:
                                key = (s1, s2, v0, v1, v2, y)
                                joint[key] = joint.get(key, 0.0) + p2 * py
    dist1 = np.asarray(dist1)
    dist2 = np.asarray(dist2)
    e1 = sum(p * dist1[k[0]][int(cert.s1hat[k[2]][k[3]][k[4]][k[5]])] for k, p in joint.items())
    e2 = sum(p * dist2[k[1]][int(cert.s2hat[k[2]][k[3]][k[4]][k[5]])] for k, p in joint.items())

    S1, S2, V0, V1, V2, Y = range(6)
    if channel is not None:
        terms = [([V1], [S1], [V0, V2]), ([V2], [S2], [V0, V1]),
                 ([V1, V2], [S1, S2], [V0]), ([V0, V1, V2], [S1, S2], [])]
        src = [_cmi_dict(joint, a, s, c) for a, s, c in terms]
        rhs = [_cmi_dict(joint, a, [Y], c) for a, _, c in terms]
    else:
        terms = [([V1], [S1], [V0, V2]), ([V2], [S2], [V0, V1]), ([V0, V1, V2], [S1, S2], [])]
        src = [_cmi_dict(joint, a, s, c) for a, s, c in terms]
        rhs = [rates[0], rates[1], rates[0] + rates[1]]
    margins = tuple(r - s for r, s in zip(rhs, src))
    ok = all((m > SLACK or s <= ZERO_RATE_TOL) for m, s in zip(margins, src))
    ok &= e1 <= target[0] + 1e-12 and e2 <= target[1] + 1e-12
    ok &= abs(e1 - cert.d1) <= tol and abs(e2 - cert.d2) <= tol
    ok &= all(abs(a - b) <= tol for a, b in zip(margins, cert.margins))
    return CertificateCheck(e1, e2, tuple(src), tuple(rhs), margins, bool(ok))


def no_common_region_margins(cert: InnerCertificate, source: JointPmf,
                             channel: Channel) -> tuple[float, float, float] | None:
    """Margins of the region without a common part, or ``None`` if ``V0`` depends on the sources.

    That region asks ``V0`` to be independent of ``(S1, S2)`` and keeps only
    the three conditions given ``V0``.
    """
    table = _pair_table(source)
    cp = extract_common_part(table)
    base = _base_joint(table, cp.f1, cert.pv0, cert.pv1, cert.pv2)
    i1 = np.transpose(cert.x1, (2, 0, 1))[:, None, :, :, None]
    i2 = np.transpose(cert.x2, (2, 0, 1))[None, :, :, None, :]
    joint = (base[..., None] * channel.table[i1, i2])[None]
    pv0 = joint.sum(axis=(1, 2, 4, 5, 6))[0]
    p_src = joint.sum(axis=(3, 4, 5, 6))[0]
    p_all = joint.sum(axis=(4, 5, 6))[0]
    if not np.allclose(p_all, p_src[..., None] * pv0[None, None, :], atol=1e-12):
        return None
    out = []
    for a, s, c in _CHANNEL_TERMS[:3]:
        lhs = float(batch_mi(joint, a, s, c)[0])
        rhs = float(batch_mi(joint, a, (_Y,), c)[0])
        out.append(rhs - lhs)
    return tuple(out)


# ------------------------------------------------------------------ lossless transmission

@dataclass(frozen=True)
class LosslessWitness:
    pw: np.ndarray
    px1: np.ndarray  # [w, s1, x1]
    px2: np.ndarray  # [w, s2, x2]
    margins: tuple[float, float, float, float]

    def to_dict(self) -> dict:
        return {"pw": self.pw.tolist(), "px1": self.px1.tolist(), "px2": self.px2.tolist(),
                "margins": list(self.margins)}


def _input_candidates(n_rows: int, n_out: int, config: SearchConfig, rng):
    out = []
    for kind in ("deterministic", "grid", "dirichlet"):
        out.extend(_conditional_candidates(n_rows, n_out, config, rng, kind))
    return out


def lossless_margins(source: np.ndarray, channel: Channel, pw, px1, px2) -> np.ndarray:
    """Slack of the four lossless conditions (batched over the leading axis of ``px1``/``px2``).

    Joint axes: ``(b, w, s1, s2, x1, x2, y)``.
    """
    table = _pair_table(source)
    cp = extract_common_part(table)
    px1 = np.asarray(px1)
    px2 = np.asarray(px2)
    pw = np.asarray(pw)
    joint = np.einsum("bw,jk,bwjx,bwkz,xzy->bwjkxzy", pw, table, px1, px2, channel.table)
    # the common part is a function of s1, so conditioning on (S0) uses a relabelled axis
    n0 = cp.size
    s0_of = np.eye(n0)[list(cp.f1)]  # (s1, s0)
    with_s0 = np.einsum("bwjkxzy,jo->bwojkxzy", joint, s0_of)
    W, S0, S1, S2, X1, X2, Y = 1, 2, 3, 4, 5, 6, 7
    h12 = entropy_of(table, (0, 1))
    h1 = entropy_of(table, (0,))
    h2 = entropy_of(table, (1,))
    h0 = entropy_of(np.einsum("jk,jo->o", table, s0_of), (0,))
    m = [
        batch_mi(with_s0, (X1,), (Y,), (X2, S2, W)) - (h12 - h2),
        batch_mi(with_s0, (X2,), (Y,), (X1, S1, W)) - (h12 - h1),
        batch_mi(with_s0, (X1, X2), (Y,), (S0, W)) - (h12 - h0),
        batch_mi(with_s0, (X1, X2), (Y,), ()) - h12,
    ]
    return np.stack(m, axis=1)


def check_lossless_admissible(source: JointPmf, channel: Channel, max_w: int = 2,
                              config: SearchConfig = SearchConfig()) -> LosslessWitness | None:
    """Search ``p(w) p(x1|s1,w) p(x2|s2,w)`` meeting the four lossless conditions."""
    table = _pair_table(source)
    n1, n2 = table.shape
    nx1, nx2, _ = channel.shape
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    for nw in range(1, max_w + 1):
        pws = _input_candidates(1, nw, config, rng)
        c1 = _input_candidates(nw * n1, nx1, config, rng)
        c2 = _input_candidates(nw * n2, nx2, config, rng)
        combos = list(itertools.product(range(len(pws)), range(len(c1)), range(len(c2))))
        if len(combos) > config.max_encoder_pairs:
            pick = rng.choice(len(combos), config.max_encoder_pairs, replace=False)
            combos = [combos[i] for i in sorted(pick)]
        for start in range(0, len(combos), config.batch):
            chunk = combos[start:start + config.batch]
            pw = np.stack([pws[a][0] for a, _, _ in chunk])
            px1 = np.stack([c1[b].reshape(nw, n1, nx1) for _, b, _ in chunk])
            px2 = np.stack([c2[c].reshape(nw, n2, nx2) for _, _, c in chunk])
            m = lossless_margins(table, channel, pw, px1, px2)
            ok = np.all(m >= -LOSSLESS_TOL, axis=1)
            if ok.any():
                b = int(np.flatnonzero(ok)[0])
                return LosslessWitness(pw[b], px1[b], px2[b], tuple(float(v) for v in m[b]))
    return None


# ------------------------------------------------------------------ common-message MAC

@dataclass(frozen=True)
class CapacityRegion:
    """Union of polytopes ``{R1 <= a, R2 <= b, R1+R2 <= c, R0+R1+R2 <= d}`` (nats)."""

    bounds: np.ndarray  # (k, 4) rows (a, b, c, d)

    def contains(self, rates: Sequence[float], slack: float = 0.0) -> bool:
        r0, r1, r2 = (float(r) for r in rates)
        if min(r0, r1, r2) < -slack:
            return False
        b = self.bounds
        ok = ((r1 <= b[:, 0] + slack) & (r2 <= b[:, 1] + slack)
              & (r1 + r2 <= b[:, 2] + slack) & (r0 + r1 + r2 <= b[:, 3] + slack))
        return bool(ok.any())

    def corner_points(self) -> np.ndarray:
        """Dominant vertices of every polytope, as rows ``(R0, R1, R2)``."""
        pts = []
        for a, b, c, d in self.bounds:
            pts.append((d, 0.0, 0.0))
            for first, second in ((a, b), (b, a)):
                x = max(min(first, c, d), 0.0)
                y = max(min(second, c - x, d - x), 0.0)
                pts.append((max(d - x - y, 0.0), x, y) if first == a else
                           (max(d - x - y, 0.0), y, x))
        return np.unique(np.array(pts), axis=0)

    def to_dict(self) -> dict:
        return {"bounds": self.bounds.tolist(), "corner_points": self.corner_points().tolist()}


def capacity_region_common_message(channel: Channel, grid_resolution: int = 4,
                                   max_w: int = 2, max_points: int = 20000,
                                   seed: int = 0) -> CapacityRegion:
    """Grid inner approximation of the MAC capacity region with a common message."""
    nx1, nx2, _ = channel.shape
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    rows = []
    for nw in range(1, max_w + 1):
        gw = _simplex_grid(nw, grid_resolution)
        g1 = _simplex_grid(nx1, grid_resolution)
        g2 = _simplex_grid(nx2, grid_resolution)
        counts = (len(gw),) + (len(g1),) * nw + (len(g2),) * nw
        total = int(np.prod(counts))
        if total <= max_points:
            idx = np.array(list(np.ndindex(*counts)))
        else:
            idx = np.stack([rng.integers(0, n, max_points) for n in counts], axis=1)
        for start in range(0, len(idx), 4096):
            chunk = idx[start:start + 4096]
            pw = gw[chunk[:, 0]]
            p1 = g1[chunk[:, 1:1 + nw]]
            p2 = g2[chunk[:, 1 + nw:]]
            joint = np.einsum("bw,bwx,bwz,xzy->bwxzy", pw, p1, p2, channel.table)
            W, X1, X2, Y = 1, 2, 3, 4
            rows.append(np.stack([
                batch_mi(joint, (X1,), (Y,), (X2, W)),
                batch_mi(joint, (X2,), (Y,), (X1, W)),
                batch_mi(joint, (X1, X2), (Y,), (W,)),
                batch_mi(joint, (X1, X2), (Y,), ()),
            ], axis=1))
    bounds = np.clip(np.concatenate(rows), 0.0, None)
    return CapacityRegion(bounds)


def max_sum_information(channel: Channel, grid_resolution: int = 10) -> float:
    """Grid maximum of ``I(X1 X2; Y)`` over independent inputs."""
    g1 = _simplex_grid(channel.shape[0], grid_resolution)
    g2 = _simplex_grid(channel.shape[1], grid_resolution)
    best = 0.0
    for p1 in g1:
        joint = np.einsum("x,bz,xzy->bxzy", p1, g2, channel.table)
        best = max(best, float(batch_mi(joint, (1, 2), (3,), ()).max()))
    return best

