"""Green functions of the universal covering tree of a finite potential graph.

The cover has one cone type per directed edge of ``G``, so the half-line Green
functions ``zeta`` form a finite table solved from a closed fixed-point system.
Internally everything works on the *forward* array ``F[e] = zeta_{o(e)}(t(e))``
(the Green function at ``t(e)`` of the cone hanging off ``o(e) -> t(e)``), which
satisfies ``F[e] = -1 / (W(t(e)) - gamma + sum_{e' succ e} F[e'])``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .graph import PotentialGraph

log = logging.getLogger(__name__)

EPS_BAND = 1e-4
EPS_GAP = 1e-6
POLE_SCORE = 0.1
DEFAULT_TOL = 1e-12


class ZetaConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (last residual {residual:.3e})")
        self.residual = residual


class HerglotzError(RuntimeError):
    """An iterate left the lower half plane; the damping is too weak."""


class GreenPoleError(ZeroDivisionError):
    pass


class BandDetectionError(RuntimeError):
    pass


def default_ladder(eta_max: float = 0.1, eta_min: float = 1e-9) -> np.ndarray:
    """``eta_max * 2**-k`` down to ``eta_min`` (inclusive)."""
    k = int(math.floor(math.log2(eta_max / eta_min)))
    etas = eta_max * 2.0 ** -np.arange(k + 1)
    if etas[-1] > eta_min * (1 + 1e-12):
        etas = np.append(etas, eta_min)
    return etas


@dataclass(frozen=True)
class SpectralParam:
    lam: float
    eta: float = 0.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")

    @property
    def gamma(self) -> complex:
        return complex(self.lam, self.eta)


def _as_param(gamma) -> SpectralParam:
    if isinstance(gamma, SpectralParam):
        return gamma
    z = complex(gamma)
    return SpectralParam(z.real, z.imag)


@dataclass
class ZetaTable:
    """Cover Green data ``zeta`` at one spectral parameter.

    ``values[b]`` for the directed edge ``b = (v, w)`` is ``zeta_w(v)``;
    :attr:`forward` is the same data indexed so that ``forward[(x0, x1)] = zeta_{x0}(x1)``.
    """

    graph: PotentialGraph
    param: SpectralParam
    values: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    classification: str | None = None
    method: str = "fixed-point"
    diagnostics: dict = field(default_factory=dict)

    @property
    def gamma(self) -> complex:
        return self.param.gamma

    @property
    def lam(self) -> float:
        return self.param.lam

    @property
    def forward(self) -> np.ndarray:
        return self.values[self.graph.reverse]

    def zeta(self, v: int, w: int) -> complex:
        """``zeta_w(v)``: Green function at ``v`` of the subtree with ``w``'s branch removed."""
        return complex(self.values[self.graph.dart(v, w)])

    def forward_at(self, x0: int, x1: int) -> complex:
        return complex(self.values[self.graph.dart(x1, x0)])

    @property
    def is_bulk(self) -> bool:
        return self.classification == "bulk"

    def pullback(self, lift) -> "ZetaTable":
        """The same data on an N-lift (``lift`` is a :class:`LiftMap` over this graph)."""
        if lift.base is not self.graph:
            raise ValueError("lift is not over this graph")
        vals = self.values[lift.dart_projection()]
        return ZetaTable(lift.lift, self.param, vals, self.iterations, self.residual,
                         self.classification, self.method + "+pullback", dict(self.diagnostics))


def _forward_residual(F: np.ndarray, c: np.ndarray, B: sparse.csr_matrix) -> float:
    return float(np.max(np.abs(F * (c + B @ F) + 1.0))) if F.size else 0.0


def zeta_residual(zt: ZetaTable) -> float:
    """``max_b |zeta_w(v) (W(v) - gamma + sum_{u != w} zeta_v(u)) + 1|``."""
    g = zt.graph
    c = g.w[g.terminus] - zt.gamma
    return _forward_residual(zt.forward, c, g.nb_matrix)


def _damped(F, c, B, alpha, tol, max_iter, herglotz, handoff=1e-4):
    res = _forward_residual(F, c, B)
    it = 0
    while res > tol and it < max_iter:
        with np.errstate(divide="ignore", invalid="ignore"):
            upd = -1.0 / (c + B @ F)
        F = (1 - alpha) * F + alpha * upd
        it += 1
        if not np.all(np.isfinite(F)):
            raise ZetaConvergenceError("iteration produced non-finite values", res)
        if herglotz and np.any(F.imag >= 0):
            raise HerglotzError("Herglotz sign lost")
        res = _forward_residual(F, c, B)
        if res < handoff:
            break
    return F, it, res


def _newton(F, c, B, tol, max_iter=40):
    """Newton on ``F*(c + B F) + 1 = 0``. Returns (F, iterations, residual, converged)."""
    k = F.size
    dense = k <= 400
    Bd = B.toarray() if dense else None
    res = _forward_residual(F, c, B)
    it = 0
    while it < max_iter:
        if res <= tol:
            return F, it, res, True
        BF = B @ F
        R = F * (c + BF) + 1.0
        if dense:
            J = F[:, None] * Bd
            J[np.diag_indices(k)] += c + BF
            try:
                step = np.linalg.solve(J, R)
            except np.linalg.LinAlgError:
                return F, it, res, False
        else:
            J = sparse.diags(F) @ B + sparse.diags(c + BF)
            step = spsolve(J.tocsc(), R)
        if not np.all(np.isfinite(step)):
            return F, it, res, False
        F = F - step
        new = _forward_residual(F, c, B)
        it += 1
        if new > 10 * res and it > 3:
            return F, it, new, False
        res = new
    return F, it, res, res <= tol


def _solve_forward(g, gamma, F0, tol, alpha, max_iter, warm=False):
    c = g.w[g.terminus] - gamma
    B = g.nb_matrix
    herglotz = gamma.imag > 0
    if warm:
        # a warm start from the previous rung is usually inside Newton's basin
        Fn, itn, resn, ok = _newton(F0.astype(complex), c, B, tol, max_iter=12)
        if ok and np.all(Fn.imag < 0):
            return Fn, itn, resn
    F, it, res = _damped(F0.astype(complex), c, B, alpha, tol, max_iter, herglotz)
    if res > tol:
        Fn, itn, resn, ok = _newton(F, c, B, tol)
        if ok and (not herglotz or np.all(Fn.imag < 0)):
            return Fn, it + itn, resn
        # Newton wandered off; grind with the damped map instead
        F, it2, res = _damped(F, c, B, alpha, tol, max_iter, herglotz, handoff=0.0)
        it += it2
    if res > tol:
        raise ZetaConvergenceError("zeta fixed point did not converge", res)
    return F, it, res


def solve_zeta(
    g: PotentialGraph,
    gamma,
    init: ZetaTable | None = None,
    *,
    tol: float = DEFAULT_TOL,
    alpha: float = 0.5,
    max_iter: int | None = None,
) -> ZetaTable:
    """Solve the cone system at ``gamma = lam + i eta`` with ``eta > 0``.

    Damped iteration ``F <- (1-alpha) F + alpha * update`` from ``F = -i`` (or ``init``),
    finished by Newton once the iterate is close.
    """
    p = _as_param(gamma)
    if p.eta <= 0:
        raise ValueError("solve_zeta needs eta > 0; use boundary_zeta for the real axis")
    if max_iter is None:
        max_iter = 2000 + 50 * g.n_darts
    if init is not None:
        F0 = init.forward.astype(complex)
        if np.any(F0.imag >= 0):
            raise ValueError("init must have Im < 0 entries")
    else:
        F0 = np.full(g.n_darts, -1j)
    F, it, res = _solve_forward(g, p.gamma, F0, tol, alpha, max_iter)
    if np.any(F.imag >= 0):
        raise HerglotzError("Herglotz sign lost")
    return _table(g, p, F, it, res, method="fixed-point")


def _table(g, p, F, it, res, method, classification=None, diagnostics=None) -> ZetaTable:
    vals = np.empty_like(F)
    vals[g.reverse] = F
    return ZetaTable(g, p, vals, it, res, classification, method, diagnostics or {})


@dataclass
class _Ladder:
    F: np.ndarray
    F_prev: np.ndarray | None
    pole_scores: list
    iterations: int
    residual: float
    eta_min: float


def _run_ladder(g, lam, schedule, F0, tol, alpha):
    etas = np.asarray(schedule, dtype=float)
    if np.any(np.diff(etas) >= 0) or etas[-1] <= 0:
        raise ValueError("schedule must be strictly decreasing and positive")
    F = np.full(g.n_darts, -1j) if F0 is None else F0
    scores, total, res, F_prev = [], 0, 0.0, None
    max_iter = 2000 + 50 * g.n_darts
    for k, eta in enumerate(etas):
        F_prev = F
        F, it, res = _solve_forward(g, complex(lam, eta), F, tol, alpha, max_iter, warm=k > 0)
        if np.any(F.imag >= 0):
            raise HerglotzError("Herglotz sign lost")
        total += it
        scores.append(float(np.max(np.abs(F)) * eta))
    return _Ladder(F, F_prev, scores, total, res, float(etas[-1]))


def boundary_zeta(
    g: PotentialGraph,
    lam: float,
    schedule: Sequence[float] | None = None,
    *,
    init: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    alpha: float = 0.5,
    eps_band: float = EPS_BAND,
    eps_gap: float = EPS_GAP,
) -> ZetaTable:
    """Boundary value ``zeta^{lam + i0}`` with a bulk / gap / pole / undetermined label.

    Each rung of the decreasing ``eta`` schedule is warm-started from the previous one;
    the limit is then polished by Newton on the real axis. Where the real-axis system is
    degenerate (Newton fails or jumps away from the ladder) the smallest rung is kept.
    ``init`` is an optional forward array used to start the first rung.
    """
    lam = float(lam)
    sched = default_ladder() if schedule is None else np.asarray(schedule, dtype=float)
    diag: dict = {"eta_min": float(sched[-1])}
    p0 = SpectralParam(lam, 0.0)
    try:
        lad = _run_ladder(g, lam, sched, init, tol, alpha)
    except (ZetaConvergenceError, HerglotzError) as exc:
        diag["error"] = str(exc)
        nan = np.full(g.n_darts, np.nan + 0j)
        return _table(g, p0, nan, 0, math.inf, "ladder", "undetermined", diag)
    diag["pole_scores"] = lad.pole_scores[-3:]
    diag["ladder_forward"] = lad.F
    if len(lad.pole_scores) >= 2 and min(lad.pole_scores[-2:]) > POLE_SCORE:
        return _table(g, SpectralParam(lam, lad.eta_min), lad.F, lad.iterations, lad.residual,
                      "ladder", "pole", diag)

    c = g.w[g.terminus] - lam
    F0, it0, res0, ok = _newton(lad.F.copy(), c + 0j, g.nb_matrix, tol)
    scale = max(1.0, float(np.max(np.abs(lad.F))))
    jump = float(np.max(np.abs(F0 - lad.F))) if ok else math.inf
    diag["real_axis_jump"] = jump
    if ok and jump <= 1e-4 * scale and np.all(F0.imag <= 1e-12 * scale):
        F, method, res = F0, "ladder+newton", res0
        F = np.where(np.abs(F.imag) < 1e-15 * scale, F.real + 0j, F)
    else:
        F, method, res = lad.F, "ladder", lad.residual
    im = np.abs(F.imag)
    if np.min(im) > eps_band:
        cls = "bulk"
    elif np.max(im) < eps_gap:
        cls = "gap"
    else:
        cls = "undetermined"
    return _table(g, p0, F, lad.iterations + it0, res, method, cls, diag)


def continue_bulk(prev: ZetaTable, lam: float, *, max_jump: float = 0.25, tol: float = DEFAULT_TOL,
                  schedule=None) -> ZetaTable:
    """Boundary value at ``lam`` by real-axis Newton started from a nearby bulk solution.

    Accepted only when the result stays in the lower half plane with every ``|Im|`` above the
    band threshold and close to the start; anything else falls back to :func:`boundary_zeta`.
    """
    g = prev.graph
    if prev.classification == "bulk" and np.all(np.isfinite(prev.values)):
        start = prev.forward
        c = g.w[g.terminus] - float(lam) + 0j
        F, it, res, ok = _newton(start.copy(), c, g.nb_matrix, tol, max_iter=20)
        scale = max(1.0, float(np.max(np.abs(start))))
        if ok and np.all(F.imag < -EPS_BAND) and np.max(np.abs(F - start)) <= max_jump * scale:
            return _table(g, SpectralParam(float(lam), 0.0), F, it, res, "continuation", "bulk",
                          {"from_lambda": prev.lam})
    return boundary_zeta(g, lam, schedule)


def classify_energy(g: PotentialGraph, lam: float, schedule=None, init=None) -> str:
    return boundary_zeta(g, lam, schedule, init=init).classification


# -- band structure -------------------------------------------------------


@dataclass
class BandStructure:
    bands: list[tuple[float, float]]
    exceptional_F: list[float]
    endpoints_Fprime: list[float]
    grid_lo: float
    grid_hi: float
    grid_step: float
    eta_min: float
    labels: list[str] = field(default_factory=list, repr=False)
    grid: np.ndarray | None = field(default=None, repr=False)

    def in_bulk(self, lam: float) -> bool:
        return any(lo < lam < hi for lo, hi in self.bands)

    def distance_to_spectrum(self, lam: float) -> float:
        """Distance from ``lam`` to the closed bands together with the pole set."""
        d = math.inf
        for lo, hi in self.bands:
            if lo <= lam <= hi:
                return 0.0
            d = min(d, abs(lam - lo), abs(lam - hi))
        for f in self.exceptional_F:
            d = min(d, abs(lam - f))
        return d

    def to_json_obj(self) -> dict:
        return {
            "bands": [{"lo": lo, "hi": hi} for lo, hi in self.bands],
            "exceptional": list(self.exceptional_F),
            "endpoints": list(self.endpoints_Fprime),
            "grid": {"lo": self.grid_lo, "hi": self.grid_hi, "step": self.grid_step, "eta_min": self.eta_min},
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BandStructure":
        gm = obj.get("grid", {})
        return cls(
            bands=[(b["lo"], b["hi"]) for b in obj["bands"]],
            exceptional_F=list(obj.get("exceptional", [])),
            endpoints_Fprime=list(obj.get("endpoints", [])),
            grid_lo=gm.get("lo", math.nan),
            grid_hi=gm.get("hi", math.nan),
            grid_step=gm.get("step", math.nan),
            eta_min=gm.get("eta_min", math.nan),
        )


def spectrum_enclosure(g: PotentialGraph, pad: float = 1.0) -> tuple[float, float]:
    return float(g.w.min() - g.max_degree - pad), float(g.w.max() + g.max_degree + pad)


def _scan_labels(g, grid, schedule):
    """Labels and real-axis forward arrays along a grid."""
    labels, values = [], []
    for lam in grid:
        zt = boundary_zeta(g, lam, schedule)
        labels.append(zt.classification)
        values.append(zt.forward)
    return labels, values


def _scan_chunk(args):
    g, grid, schedule = args
    return _scan_labels(g, grid, schedule)


def _is_bulk(g, lam, schedule) -> bool:
    return boundary_zeta(g, lam, schedule).classification == "bulk"


def _refine_edge(g, inside, outside, schedule, iters=20) -> float:
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        if _is_bulk(g, mid, schedule):
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def _locate_pole(g, a, b, e, fa, schedule, iters=60):
    """Bisect for the upward jump of the decreasing real function ``F_e`` on ``(a, b)``."""
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        zt = boundary_zeta(g, mid, schedule)
        if zt.classification != "gap":
            return mid
        fm = zt.forward[e].real
        if fm < fa:
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def band_scan(
    g: PotentialGraph,
    lambda_grid: Sequence[float] | None = None,
    schedule: Sequence[float] | None = None,
    *,
    grid_step: float = 0.005,
    refine_iters: int = 20,
    workers: int = 1,
    require_band: bool | None = None,
) -> BandStructure:
    """Scan a real-energy grid and assemble the band structure of the cover operator."""
    if lambda_grid is None:
        lo, hi = spectrum_enclosure(g)
        n = int(math.ceil((hi - lo) / grid_step)) + 1
        grid = lo + grid_step * np.arange(n)
    else:
        grid = np.asarray(lambda_grid, dtype=float)
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("lambda_grid must be increasing with at least two points")
        grid_step = float(np.max(np.diff(grid)))
    sched = default_ladder() if schedule is None else np.asarray(schedule, dtype=float)

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = np.array_split(grid, workers)
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_scan_chunk, [(g, ch, sched) for ch in chunks]))
        labels = [lab for part in parts for lab in part[0]]
        values = [val for part in parts for val in part[1]]
    else:
        labels, values = _scan_labels(g, grid, sched)

    bands: list[tuple[float, float]] = []
    i = 0
    while i < len(grid):
        if labels[i] != "bulk":
            i += 1
            continue
        j = i
        while j + 1 < len(grid) and labels[j + 1] == "bulk":
            j += 1
        left = grid[i] if i == 0 else _refine_edge(g, grid[i], grid[i - 1], sched, refine_iters)
        right = grid[j] if j == len(grid) - 1 else _refine_edge(g, grid[j], grid[j + 1], sched, refine_iters)
        bands.append((float(left), float(right)))
        i = j + 1

    poles = [float(lam) for lam, lab in zip(grid, labels) if lab == "pole"]
    # in a gap every real F_e decreases in lam; an upward jump brackets a pole
    for k in range(len(grid) - 1):
        if labels[k] != "gap" or labels[k + 1] != "gap":
            continue
        up = np.nonzero(values[k + 1].real > values[k].real + 1e-12)[0]
        if up.size == 0:
            continue
        e = int(up[np.argmax(values[k + 1].real[up] - values[k].real[up])])
        lam_p = _locate_pole(g, float(grid[k]), float(grid[k + 1]), e, float(values[k].real[e]), sched)
        zt = boundary_zeta(g, lam_p, sched)
        if zt.classification == "pole" or np.max(np.abs(zt.forward)) > 1e6:
            poles.append(lam_p)
        else:
            log.debug("jump near %.6f not confirmed as a pole", lam_p)
    poles = _dedupe(sorted(poles), grid_step)

    endpoints = sorted({x for b in bands for x in b})
    if require_band is None:
        require_band = g.satisfies_c1
    if require_band and not bands:
        raise BandDetectionError("band detection failed")
    return BandStructure(bands, poles, endpoints, float(grid[0]), float(grid[-1]), grid_step,
                         float(sched[-1]), labels, grid)


def _dedupe(xs: list[float], h: float) -> list[float]:
    out: list[float] = []
    for x in xs:
        if out and abs(x - out[-1]) < h:
            continue
        out.append(x)
    return out


# -- Green functions --------------------------------------------------------


def green_diag(zt: ZetaTable, v: int) -> complex:
    """``G(v, v) = 1 / (W(v) + sum_{u ~ v} zeta_v(u) - gamma)``."""
    g = zt.graph
    F = zt.forward
    den = g.w[v] + F[g.out_darts[v]].sum() - zt.gamma
    if abs(den) < 1e-13:
        raise GreenPoleError("diagonal Green pole")
    return complex(1.0 / den)


def green_diag_all(zt: ZetaTable) -> np.ndarray:
    g = zt.graph
    F = zt.forward
    s = np.zeros(g.n, dtype=complex)
    np.add.at(s, g.origin, F)
    den = g.w + s - zt.gamma
    if np.any(np.abs(den) < 1e-13):
        raise GreenPoleError("diagonal Green pole")
    return 1.0 / den


def green_path(zt: ZetaTable, gdiag: complex, nb_path: Sequence[int]) -> complex:
    """``G(v0, vk) = G(v0, v0) zeta_{v0}(v1) ... zeta_{v_{k-1}}(vk)`` along a non-backtracking path."""
    path = list(nb_path)
    g = zt.graph
    val = complex(gdiag)
    F = zt.forward
    for i in range(len(path) - 1):
        if i >= 1 and path[i + 1] == path[i - 1]:
            raise ValueError(f"path backtracks at position {i}")
        val *= F[g.dart(path[i], path[i + 1])]
    return val


def _sphere_weights(zt: ZetaTable, x: int, n_max: int) -> np.ndarray:
    """``S_n = sum_{y : d(x~, y) = n} |G(x~, y)|^2`` on the cover, ``n = 0..n_max``."""
    g = zt.graph
    F = zt.forward
    absF2 = np.abs(F) ** 2
    BT = g.nb_matrix.T.tocsr()
    G0 = green_diag(zt, x)
    out = np.empty(n_max + 1)
    out[0] = abs(G0) ** 2
    a = np.zeros(g.n_darts)
    a[g.out_darts[x]] = abs(G0) ** 2 * absF2[g.out_darts[x]]
    for n in range(1, n_max + 1):
        out[n] = a.sum()
        a = (BT @ a) * absF2
    return out


@dataclass
class CTReport:
    lam: float
    delta: float
    D: int
    rows: list[dict]
    passed: bool

    def to_json_obj(self) -> dict:
        return {"lambda": self.lam, "delta": self.delta, "D": self.D, "passed": self.passed, "rows": self.rows}


def combes_thomas_check(
    g: PotentialGraph,
    lam: float,
    delta: float,
    n_max: int = 10,
    *,
    zt: ZetaTable | None = None,
    schedule=None,
) -> CTReport:
    """Check ``S_n <= 4 delta^-2 (1 + delta/2D)^(-2n)`` for every root and ``n <= n_max``."""
    if zt is None:
        zt = boundary_zeta(g, lam, schedule)
    if zt.classification != "gap":
        raise ValueError(f"energy {lam} is classified {zt.classification!r}, not gap")
    D = g.max_degree
    S = np.array([_sphere_weights(zt, x, n_max) for x in range(g.n)])
    rows = []
    ok = True
    for n in range(n_max + 1):
        rhs = 4.0 / delta**2 * (1.0 + delta / (2 * D)) ** (-2 * n)
        lhs = float(S[:, n].max())
        rows.append({"n": n, "S_n": lhs, "rhs": rhs, "margin": rhs - lhs})
        ok &= lhs <= rhs
    return CTReport(float(lam), float(delta), D, rows, bool(ok))


# -- oracle ---------------------------------------------------------------


def cover_ball(g: PotentialGraph, root: int, R: int) -> tuple[np.ndarray, list[tuple[int, int]], list[int]]:
    """Depth-``R`` ball of the universal cover rooted at a lift of ``root``.

    Returns (potential per tree vertex, tree edges, projection to ``G``); tree vertex 0 is the root.
    """
    proj = [root]
    parent_dart = [-1]
    edges: list[tuple[int, int]] = []
    frontier = [0]
    for _ in range(R):
        nxt = []
        for node in frontier:
            v = proj[node]
            pd = parent_dart[node]
            darts = g.out_darts[v] if pd < 0 else g.successors[pd]
            for e in darts:
                child = len(proj)
                proj.append(int(g.terminus[e]))
                parent_dart.append(int(e))
                edges.append((node, child))
                nxt.append(child)
        frontier = nxt
    return g.w[proj], edges, proj


def truncated_tree_green(g: PotentialGraph, root: int, R: int, gamma: complex) -> complex:
    """Root diagonal of ``(H_T - gamma)^-1`` on the depth-``R`` cover ball (Dirichlet cut)."""
    w, edges, _ = cover_ball(g, root, R)
    n = len(w)
    e = np.array(edges, dtype=int).reshape(-1, 2)
    H = sparse.csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
    H = H + sparse.diags(w) - gamma * sparse.identity(n)
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0
    return complex(spsolve(H.tocsc(), rhs)[0])
