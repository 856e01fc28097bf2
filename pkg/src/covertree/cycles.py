"""Schrodinger operators on N-cycles and their periodic cover on the integers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import cycle_graph
from .green import ZetaTable, boundary_zeta, green_diag_all

EDGE_WINDOW = 1e-4


@dataclass(frozen=True)
class PeriodicZOperator:
    """``(H u)(j) = u(j-1) + u(j+1) + W_{j mod m} u(j)`` on the integers."""

    W: tuple[float, ...]

    def __init__(self, W: Sequence[float]):
        w = tuple(float(x) for x in W)
        if not w:
            raise ValueError("period must be >= 1")
        object.__setattr__(self, "W", w)

    @property
    def m(self) -> int:
        return len(self.W)

    def discriminant(self, lam) -> np.ndarray:
        """Trace of the one-period transfer matrix ``prod_j [[lam - W_j, -1], [1, 0]]``."""
        lam = np.asarray(lam, dtype=float)
        a, b = np.ones_like(lam), np.zeros_like(lam)  # first column of the running product
        c, d = np.zeros_like(lam), np.ones_like(lam)  # second column
        for wj in self.W:
            t = lam - wj
            a, b = t * a - b, a
            c, d = t * c - d, c
        return a + d

    def enclosure(self, pad: float = 1.0) -> tuple[float, float]:
        return min(self.W) - 2 - pad, max(self.W) + 2 + pad


def monodromy_bands(op: PeriodicZOperator, grid_step: float = 1e-3, refine_iters: int = 60) -> list[tuple[float, float]]:
    """Bands ``{lam : |discriminant| <= 2}`` found on a grid and refined by bisection."""
    lo, hi = op.enclosure()
    n = int(math.ceil((hi - lo) / grid_step)) + 1
    grid = lo + grid_step * np.arange(n)
    inside = np.abs(op.discriminant(grid)) <= 2

    def is_in(x):
        return abs(float(op.discriminant(x))) <= 2

    def refine(a, b):  # a inside, b outside
        for _ in range(refine_iters):
            mid = 0.5 * (a + b)
            if is_in(mid):
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)

    bands = []
    i = 0
    while i < n:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and inside[j + 1]:
            j += 1
        left = refine(grid[i], grid[i - 1]) if i > 0 else grid[i]
        right = refine(grid[j], grid[j + 1]) if j < n - 1 else grid[j]
        bands.append((float(left), float(right)))
        i = j + 1
    return bands


def band_distance(bands: Sequence[tuple[float, float]], lam: float) -> float:
    d = math.inf
    for lo, hi in bands:
        if lo <= lam <= hi:
            return 0.0
        d = min(d, abs(lam - lo), abs(lam - hi))
    return d


def in_band_interior(bands, lam: float, window: float = EDGE_WINDOW) -> bool:
    return any(lo + window < lam < hi - window for lo, hi in bands)


def _tiled(W: Sequence[float], N: int) -> np.ndarray:
    w = np.asarray(W, dtype=float)
    return np.resize(w, N)


def cycle_zeta(W: Sequence[float], lam: float) -> ZetaTable:
    """Boundary Green data of the periodic integer operator with one period ``W``.

    Solved on the shortest cycle (at least three vertices) that carries a whole number of periods.
    """
    m = len(W)
    mm = m * math.ceil(3 / m)
    return boundary_zeta(cycle_graph(mm, _tiled(W, mm)), lam)


def bulk_constant(W: Sequence[float], lam: float, zt: ZetaTable | None = None) -> float:
    """``16 max |G(j, j +- r)|^2`` over one period and both directions, for ``lam`` inside a band.

    Uses ``|G(j, j+r)|^2 = |G(j,j)|^2 |Im zeta_j(j+1)| / |Im zeta_{j+r}(j+r+1)|``.
    """
    if zt is None:
        zt = cycle_zeta(W, lam)
    if zt.classification != "bulk":
        raise ValueError(f"energy {lam} is not interior to a band ({zt.classification})")
    g = zt.graph
    M = g.n
    G2 = np.abs(green_diag_all(zt)) ** 2
    best = 0.0
    for step in (1, -1):
        im = np.array([abs(zt.forward_at(j, (j + step) % M).imag) for j in range(M)])
        for j in range(M):
            best = max(best, G2[j] * im[j] / im.min())
    return 16.0 * best


def cross_validate_cycle_zeta(N: int, W: Sequence[float], lam: float) -> dict:
    """Compare cover-Green data on ``C_N`` with the scalar continued-fraction relation."""
    w = _tiled(W, N)
    zt = boundary_zeta(cycle_graph(N, w), lam)
    if zt.classification != "bulk":
        return {"classification": zt.classification, "residual": math.nan, "herglotz": False, "flagged": True}
    res = 0.0
    for step in (1, -1):
        for j in range(N):
            prev, nxt = (j - step) % N, (j + step) % N
            lhs = 1 / zt.forward_at(prev, j)
            rhs = lam - w[j] - zt.forward_at(j, nxt)
            res = max(res, abs(lhs - rhs))
    return {
        "classification": "bulk",
        "residual": float(res),
        "herglotz": bool(np.all(zt.forward.imag < 0)),
        "flagged": False,
        "zeta": zt,
    }


@dataclass
class CycleCheck:
    lam: float
    kind: str  # gap | bulk | edge
    value: float  # N * ||psi||_inf^2
    bound: float | None
    support: int
    rotated: bool = False

    @property
    def passed(self) -> bool:
        return self.bound is None or self.value <= self.bound * (1 + 1e-9)


@dataclass
class CycleReport:
    N: int
    W: list[float]
    m: int | None
    bands: list[tuple[float, float]]
    checks: list[CycleCheck] = field(default_factory=list)
    support_floor: int = 0
    constants: dict[float, float] = field(default_factory=dict)
    re_green: dict[float, float] = field(default_factory=dict)  # max |Re G(j,j)| per bulk energy, informational
    errors: list[str] = field(default_factory=list)

    @property
    def failures(self) -> list[CycleCheck]:
        return [c for c in self.checks if not c.passed or c.support < self.support_floor]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json_obj(self) -> dict:
        return {
            "N": self.N,
            "period": self.m,
            "W": self.W,
            "bands": [{"lo": lo, "hi": hi} for lo, hi in self.bands],
            "passed": self.passed,
            "support_floor": self.support_floor,
            "errors": self.errors,
            "max_abs_re_green": max(self.re_green.values(), default=None),
            "checks": [
                {"lambda": c.lam, "kind": c.kind, "N_sup2": c.value, "bound": c.bound,
                 "support": c.support, "rotated": c.rotated, "passed": c.passed}
                for c in self.checks
            ],
        }


def verify_cycle_bounds(N: int, W: Sequence[float], m: int | None = None, *, rotations: int = 20,
                         seed: int = 0, edge_window: float = EDGE_WINDOW) -> CycleReport:
    """Sup-norm bounds for every eigenvector of the Schrodinger operator on ``C_N``.

    ``W`` is either a full length-``N`` potential or one period of length ``m``. When the period
    does not divide ``N`` the potential on ``C_N`` is not ``m``-periodic: the bulk constant is then
    unavailable (recorded in ``errors``) and only the period-free checks run.
    """
    W = [float(x) for x in W]
    if m is None and len(W) != N:
        m = len(W)
    period = W[:m] if m is not None else W
    w = _tiled(period, N)
    g = cycle_graph(N, w)
    vals, vecs = np.linalg.eigh(g.hamiltonian())
    periodic = m is None or N % m == 0
    bands = monodromy_bands(PeriodicZOperator(period)) if periodic else []
    rep = CycleReport(N, w.tolist(), m, bands, support_floor=math.ceil(N / 2) if periodic else 0)
    if not periodic:
        # the seam in the potential binds states whose tails drop below any float support cut
        rep.errors.append(f"period {m} does not divide N={N}: bulk and support checks not run")
    rng = np.random.default_rng(seed)

    groups: list[list[int]] = []
    for j in range(N):
        if groups and vals[j] - vals[groups[-1][-1]] < 1e-8:
            groups[-1].append(j)
        else:
            groups.append([j])

    for idx in groups:
        lam = float(np.mean(vals[idx]))
        near_edge = any(min(abs(lam - lo), abs(lam - hi)) <= edge_window for lo, hi in bands)
        if not periodic:
            kind, bound = "unclassified", None
        elif near_edge:
            kind, bound = "edge", None
        elif band_distance(bands, lam) > 0:
            kind, bound = "gap", 16.0 / band_distance(bands, lam) ** 2
        else:
            kind = "bulk"
            if lam not in rep.constants:
                zt = cycle_zeta(period, lam)
                rep.constants[lam] = bulk_constant(period, lam, zt)
                rep.re_green[lam] = float(np.max(np.abs(green_diag_all(zt).real)))
            bound = rep.constants[lam]
        V = vecs[:, idx]
        cols = [(V[:, k], False) for k in range(len(idx))]
        if len(idx) > 1:
            for _ in range(rotations):
                Q, _r = np.linalg.qr(rng.standard_normal((len(idx), len(idx))))
                cols += [(c, True) for c in (V @ Q).T]
        for psi, rot in cols:
            sup2 = float(np.max(np.abs(psi)) ** 2)
            supp = int(np.count_nonzero(np.abs(psi) > 1e-7 * math.sqrt(sup2)))
            rep.checks.append(CycleCheck(lam, kind, N * sup2, bound, supp, rot))
    return rep
