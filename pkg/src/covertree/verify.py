"""Eigenpairs of finite potential graphs checked against cover-Green delocalization bounds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graph import PotentialGraph, RadiiProfile, radii
from .green import (
    BandStructure,
    ZetaTable,
    boundary_zeta,
    continue_bulk,
    green_diag,
    green_diag_all,
    green_path,
)
from .metrics import Z_s_lambda, z_lambda

SIZE_CAP = 4000
EIG_TOL = 1e-9
SUPPORT_TOL = 1e-7
CHECK_TOL = 1e-9


class SizeCapError(ValueError):
    pass


@dataclass
class EigenPair:
    lam: float
    psi: np.ndarray
    cluster: int = 0


def full_spectrum(g: PotentialGraph, cap: int = SIZE_CAP, cluster_tol: float = 1e-8) -> list[EigenPair]:
    """All eigenpairs of ``A + diag(W)`` in ascending order, with near-degenerate clusters tagged."""
    if g.n > cap:
        raise SizeCapError(f"|V|={g.n} exceeds the dense cap {cap}; iterative eigensolvers are out of scope")
    vals, vecs = np.linalg.eigh(g.hamiltonian())
    pairs: list[EigenPair] = []
    cid = 0
    for j, lam in enumerate(vals):
        if j and lam - vals[j - 1] > cluster_tol * max(1.0, abs(lam)):
            cid += 1
        pairs.append(EigenPair(float(lam), vecs[:, j].copy(), cid))
    return pairs


def clusters(pairs: Sequence[EigenPair]) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for i, p in enumerate(pairs):
        out.setdefault(p.cluster, []).append(i)
    return out


def support_size(psi: np.ndarray, tol: float = SUPPORT_TOL) -> int:
    m = np.max(np.abs(psi))
    return int(np.count_nonzero(np.abs(psi) > tol * m)) if m > 0 else 0


def completeness_residual(pairs: Sequence[EigenPair]) -> float:
    V = np.column_stack([p.psi for p in pairs])
    return float(np.max(np.abs((np.abs(V) ** 2).sum(axis=1) - 1.0)))


def lorentzian_margin(pairs: Sequence[EigenPair], eta: float) -> float:
    """Min over ``(j, x)`` of ``eta Im g^{lam_j + i eta}(x, x) - |psi_j(x)|^2`` (never negative)."""
    lam = np.array([p.lam for p in pairs])
    V2 = np.abs(np.column_stack([p.psi for p in pairs])) ** 2
    L = eta**2 / ((lam[:, None] - lam[None, :]) ** 2 + eta**2)  # L[k, j]
    lhs = V2 @ L  # (x, j)
    return float(np.min(lhs - V2))


# -- checks ------------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    bound: float
    kind: str = "<="  # value <= bound, or ">=" for lower bounds
    skipped: str | None = None

    @property
    def margin(self) -> float:
        if self.skipped:
            return math.nan
        return self.bound - self.value if self.kind == "<=" else self.value - self.bound

    @property
    def passed(self) -> bool:
        if self.skipped:
            return True
        return self.margin >= -CHECK_TOL * max(1.0, abs(self.bound))

    def to_json_obj(self) -> dict:
        d = {"name": self.name, "value": self.value, "bound": self.bound, "kind": self.kind}
        if self.skipped:
            d["skipped"] = self.skipped
        else:
            d["margin"] = self.margin
            d["passed"] = self.passed
        return d


@dataclass
class EnergyData:
    """Everything about an energy that does not depend on the eigenvector."""

    classification: str
    delta: float | None = None
    z: float | None = None
    Z_s: dict = field(default_factory=dict)
    zeta: ZetaTable | None = None


@dataclass
class PairReport:
    index: int
    lam: float
    cluster: int
    classification: str
    delta: float | None
    sup_norm: float
    p_norms: dict[float, float]
    support: int
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check | None:
        return next((c for c in self.checks if c.name == name), None)

    def to_json_obj(self) -> dict:
        return {
            "index": self.index,
            "lambda": self.lam,
            "cluster": self.cluster,
            "class": self.classification,
            "delta": self.delta,
            "sup": self.sup_norm,
            "p_norms": {repr(p): v for p, v in self.p_norms.items()},
            "support": self.support,
            "checks": [c.to_json_obj() for c in self.checks],
        }


@dataclass
class EigenReport:
    n: int
    D: int
    ell_G: int
    pairs: list[PairReport]
    rotation_trials: int = 0
    rotation_failures: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def failures(self) -> list[dict]:
        out = [
            {"index": p.index, "lambda": p.lam, "check": c.name, "value": c.value, "bound": c.bound}
            for p in self.pairs
            for c in p.checks
            if not c.passed
        ]
        return out + list(self.rotation_failures)

    @property
    def passed(self) -> bool:
        return not self.failures

    def by_class(self, cls: str) -> list[PairReport]:
        return [p for p in self.pairs if p.classification == cls]

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "D": self.D,
            "ell_G": self.ell_G,
            "passed": self.passed,
            "rotation_trials": self.rotation_trials,
            "failures": self.failures,
            "notes": self.notes,
            "pairs": [p.to_json_obj() for p in self.pairs],
        }

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "class", "sup", "bound", "margin", "support", "support_bound"])
        for p in self.pairs:
            sup = p.check("sup_bulk") or p.check("sup_gap")
            sb = p.check("support")
            w.writerow([
                f"{p.lam:.12g}", p.classification, f"{p.sup_norm:.12g}",
                "" if sup is None or sup.skipped else f"{sup.bound:.12g}",
                "" if sup is None or sup.skipped else f"{sup.margin:.12g}",
                p.support,
                "" if sb is None or sb.skipped else f"{sb.bound:.12g}",
            ])
        return buf.getvalue()


def _biregular_degrees(g: PotentialGraph) -> tuple[int, int] | None:
    """``(d1, d2)`` with ``d1 >= d2`` when ``g`` is bipartite with constant degree on each side."""
    color = -np.ones(g.n, dtype=int)
    color[0] = 0
    stack = [0]
    while stack:
        v = stack.pop()
        for u in g.neighbors[v]:
            if color[u] < 0:
                color[u] = 1 - color[v]
                stack.append(u)
            elif color[u] == color[v]:
                return None
    degs = [set(g.degree[color == c].tolist()) for c in (0, 1)]
    if any(len(d) != 1 for d in degs):
        return None
    d1, d2 = sorted((degs[0].pop(), degs[1].pop()), reverse=True)
    return d1, d2


class Verifier:
    """Per-graph context: band data, radii and cached energy classifications."""

    def __init__(
        self,
        g: PotentialGraph,
        bands: BandStructure,
        radii_profile: RadiiProfile | None = None,
        p_list: Iterable[float] = (5, 6, 8),
        *,
        zeta_graph: PotentialGraph | None = None,
        window: float | None = None,
        support_tol: float = SUPPORT_TOL,
    ):
        self.g = g
        self.bands = bands
        self.rad = radii_profile if radii_profile is not None else radii(g)
        self.p_list = sorted(float(p) for p in p_list)
        self.zg = zeta_graph if zeta_graph is not None else g
        self.window = window if window is not None else max(10 * bands.grid_step, 1e-6)
        self.support_tol = support_tol
        self.D = g.max_degree
        self.biregular = _biregular_degrees(g) if np.ptp(g.w) == 0 else None
        self._last_bulk: ZetaTable | None = None

    def exceptional_adjacent(self, lam: float) -> bool:
        marks = list(self.bands.exceptional_F) + list(self.bands.endpoints_Fprime)
        return any(abs(lam - f) <= self.window for f in marks)

    def energy(self, lam: float) -> EnergyData:
        if self.exceptional_adjacent(lam):
            return EnergyData("exceptional-adjacent")
        prev = self._last_bulk
        if prev is not None and self.bands.in_bulk(lam) and self._same_band(prev.lam, lam):
            zt = continue_bulk(prev, lam)
        else:
            zt = boundary_zeta(self.zg, lam)
        if zt.classification == "bulk" and self.bands.in_bulk(lam):
            self._last_bulk = zt
            s_needed = {2.0} | {p / 4 for p in self.p_list if p > 4}
            return EnergyData("bulk", None, z_lambda(zt), {s: Z_s_lambda(zt, s) for s in s_needed}, zt)
        if zt.classification == "gap" and not self.bands.in_bulk(lam):
            return EnergyData("gap", self.bands.distance_to_spectrum(lam), zeta=zt)
        return EnergyData("unclassified", zeta=zt)

    def _same_band(self, a: float, b: float) -> bool:
        return any(lo < a < hi and lo < b < hi for lo, hi in self.bands.bands)

    def checks(self, psi: np.ndarray, en: EnergyData) -> list[Check]:
        g, D, rad = self.g, self.D, self.rad
        ell = rad.ell_G
        sup = float(np.max(np.abs(psi)))
        supp = support_size(psi, self.support_tol)
        eps = float(np.sum(np.abs(psi[np.abs(psi) > self.support_tol * sup]) ** 2))
        out: list[Check] = []
        if en.classification not in ("bulk", "gap"):
            return out
        if g.min_degree < 2:
            return [Check("hypotheses", 0, 0, skipped="minimum degree below 2")]
        if g.is_cycle:
            return [Check("hypotheses", 0, 0, skipped="cycle graph; see the cycle bound checks")]
        pn = {p: float(np.sum(np.abs(psi) ** p) ** (1 / p)) for p in self.p_list}

        if en.classification == "bulk":
            z = en.z
            if ell < 1:
                return [Check("sup_bulk", sup, math.inf, skipped="ell_G = 0")]
            bound = 8 * D * z**-4 / math.sqrt(ell)
            out.append(Check("sup_bulk", sup, bound))
            loc = rad.ell_local
            ok_x = loc >= 1
            ratio = np.abs(psi[ok_x]) * np.sqrt(loc[ok_x])
            out.append(Check("pointwise_bulk", float(ratio.max()) if ratio.size else 0.0, 8 * D * z**-4))
            for p in self.p_list:
                out.append(Check(f"p{p:g}_interp", pn[p], bound ** ((p - 2) / p)))
            out.append(Check("nonloc_bulk", supp, ell * z**8 * eps / (64 * D**2), ">="))
            if g.min_degree >= 3:
                for p in self.p_list:
                    if p <= 4:
                        continue
                    Zs = en.Z_s[p / 4]
                    out.append(Check(f"p{p:g}_bulk", pn[p], 8 * D * z**-5 / ((1 - Zs ** (2 / p)) * math.sqrt(ell))))
                M = en.Z_s[2.0] ** -0.25
                out.append(Check("support", supp, M**ell / (4 * D), ">="))
                if self.biregular is not None:
                    d1, d2 = self.biregular
                    out.append(Check("support_biregular", supp, ((d1 - 1) * (d2 - 1)) ** (ell / 4) / (4 * d1), ">="))
            else:
                out.append(Check("support", supp, 0, ">=", skipped="minimum degree below 3"))
        else:
            delta = en.delta
            decay = (1 + delta / (2 * D)) ** (-ell)
            bound = 8 * D / delta * decay
            out.append(Check("sup_gap", sup, bound))
            for p in self.p_list:
                out.append(Check(f"p{p:g}_gap", pn[p], bound ** ((p - 2) / p)))
            out.append(Check("nonloc_gap", supp, delta**2 / (64 * D**2) * (1 + delta / (2 * D)) ** (2 * ell) * eps, ">="))
        return out


def classify_and_report(
    g: PotentialGraph,
    pairs: Sequence[EigenPair],
    bands: BandStructure,
    radii_profile: RadiiProfile | None = None,
    p_list: Iterable[float] = (5, 6, 8),
    *,
    zeta_graph: PotentialGraph | None = None,
    rotations: int = 20,
    seed: int = 0,
    window: float | None = None,
) -> EigenReport:
    """Classify every eigenpair and evaluate the delocalization bounds that apply to it.

    ``zeta_graph`` may be a base graph that ``g`` covers; its Green data is then used for the
    energy-only quantities, which are the same on every lift.
    """
    ver = Verifier(g, bands, radii_profile, p_list, zeta_graph=zeta_graph, window=window)
    rng = np.random.default_rng(seed)
    reports: list[PairReport] = []
    rot_trials = 0
    rot_fail: list[dict] = []
    for cid, idx in sorted(clusters(pairs).items()):
        lam = float(np.mean([pairs[i].lam for i in idx]))
        en = ver.energy(lam)
        for i in idx:
            psi = pairs[i].psi
            pn = {p: float(np.sum(np.abs(psi) ** p) ** (1 / p)) for p in ver.p_list}
            reports.append(PairReport(i, pairs[i].lam, cid, en.classification, en.delta,
                                      float(np.max(np.abs(psi))), pn, support_size(psi, ver.support_tol),
                                      ver.checks(psi, en)))
        if len(idx) > 1 and en.classification in ("bulk", "gap") and rotations > 0:
            V = np.column_stack([pairs[i].psi for i in idx])
            for _ in range(rotations):
                Q, _r = np.linalg.qr(rng.standard_normal((len(idx), len(idx))))
                for col in (V @ Q).T:
                    rot_trials += 1
                    for c in ver.checks(col, en):
                        if not c.passed:
                            rot_fail.append({"cluster": cid, "lambda": lam, "check": c.name,
                                             "value": c.value, "bound": c.bound, "rotated": True})
    reports.sort(key=lambda r: r.index)
    return EigenReport(g.n, g.max_degree, ver.rad.ell_G, reports, rot_trials, rot_fail)


# -- non-backtracking lift and representation formulas ---------------------


def nb_lift(pair: EigenPair, zt: ZetaTable) -> tuple[np.ndarray, np.ndarray]:
    """``f(x0,x1) = psi(x1) - zeta_{x0}(x1) psi(x0)`` and the same with the conjugate ``zeta``."""
    if zt.classification not in ("bulk", None):
        raise ValueError(f"nb_lift needs bulk Green data, got {zt.classification!r}")
    g = zt.graph
    F = zt.forward
    psi = np.asarray(pair.psi)
    f = psi[g.terminus] - F * psi[g.origin]
    gg = psi[g.terminus] - np.conj(F) * psi[g.origin]
    return f, gg


def nb_eigen_residual(f: np.ndarray, zt: ZetaTable) -> float:
    """Max over edges of ``|(B f)(b) - f(b) / zeta(b)|``."""
    return float(np.max(np.abs(zt.graph.nb_matrix @ f - f / zt.forward)))


def nb_norm_bound(zt: ZetaTable) -> float:
    return math.sqrt(zt.graph.max_degree) * (1 + 1 / z_lambda(zt))


def _nb_paths(g: PotentialGraph, start: Sequence[int], length: int):
    """Non-backtracking vertex sequences extending ``start`` by ``length`` further steps."""
    paths = [list(start)]
    for _ in range(length):
        nxt = []
        for p in paths:
            prev = p[-2] if len(p) >= 2 else -1
            for u in g.neighbors[p[-1]]:
                if u != prev:
                    nxt.append(p + [u])
        paths = nxt
    return paths


def outgoing_rep(zt: ZetaTable, psi: np.ndarray, x0: int, x1: int, r: int, k: int) -> complex:
    """Right side of the two-sided Green representation of ``psi(x0)``."""
    g = zt.graph
    G00 = green_diag(zt, x0)
    total = 0j
    for p in _nb_paths(g, [x0, x1], r):  # p = (x0, ..., x_{r+1})
        total += green_path(zt, G00, p) * psi[p[r]] - green_path(zt, G00, p[:-1]) * psi[p[r + 1]]
    for u in g.neighbors[x0]:
        if u == x1:
            continue
        for p in _nb_paths(g, [x0, u], k - 1):  # p = (x0, x_{-1}, ..., x_{-k})
            total += green_path(zt, G00, p) * psi[p[-2]] - green_path(zt, G00, p[:-1]) * psi[p[-1]]
    return total


def bulk_rep(zt: ZetaTable, psi: np.ndarray, x0: int, x1: int, r: int) -> float:
    """Right side of the one-sided imaginary-part representation of ``psi(x0)``."""
    g = zt.graph
    F = zt.forward
    total = 0.0
    for p in _nb_paths(g, [x0, x1], r):
        prods = np.cumprod([F[g.dart(p[i], p[i + 1])] for i in range(r + 1)])
        total += prods[r - 1].imag * psi[p[r + 1]] - prods[r].imag * psi[p[r]]
    return total / abs(F[g.dart(x0, x1)].imag)


@dataclass
class RepresentationResult:
    outgoing: float
    bulk: float | None
    tested_vertices: int


def representation_check(pair: EigenPair, zt: ZetaTable, r: int, k: int,
                         radii_profile: RadiiProfile | None = None, max_vertices: int | None = None) -> RepresentationResult:
    """Max deviation ``|rhs - psi(x0)|`` over admissible ``x0`` and every ``x1 ~ x0``."""
    if r < 1 or k < 1:
        raise ValueError("r and k must be >= 1")
    g = zt.graph
    rad = radii_profile if radii_profile is not None else radii(g)
    xs = np.nonzero(rad.ell_local >= max(r, k))[0]
    if xs.size == 0:
        raise ValueError(f"no vertex has local radius >= {max(r, k)}")
    if max_vertices is not None:
        xs = xs[:max_vertices]
    psi = np.asarray(pair.psi)
    dev_out, dev_bulk = 0.0, 0.0
    bulk = zt.classification == "bulk"
    for x0 in xs:
        for x1 in g.neighbors[x0]:
            dev_out = max(dev_out, abs(outgoing_rep(zt, psi, x0, x1, r, k) - psi[x0]))
            if bulk:
                dev_bulk = max(dev_bulk, abs(bulk_rep(zt, psi, x0, x1, r) - psi[x0]))
    return RepresentationResult(dev_out, dev_bulk if bulk else None, int(xs.size))


# -- kernel mass ----------------------------------------------------------------


@dataclass
class KernelMass:
    n: int
    mass: float
    bound: float
    tree_like: bool

    @property
    def passed(self) -> bool:
        ok = self.mass <= self.bound * (1 + 1e-12)
        if self.tree_like:
            ok &= abs(self.mass - 1.0 / self.n) <= 1e-8
        return ok


def kernel_mass(zt: ZetaTable, b1, n: int, *, ell_G: int | None = None) -> KernelMass:
    """``sum_{b'} |M_n(b1, b')|^2`` for the averaged, normalized ``(zeta B)^r`` kernel.

    ``tree_like`` records that no dart is reached by two distinct walks of length ``<= n``,
    in which case the mass is exactly ``1/n``.
    """
    g = zt.graph
    if ell_G is None:
        ell_G = radii(g).ell_G
    if n < 1 or n > ell_G:
        raise ValueError(f"n={n} must lie in 1..ell_G={ell_G}")
    b = g.dart(*b1) if isinstance(b1, tuple) else int(b1)
    F = zt.forward
    im = np.abs(F.imag)
    if np.min(im) <= 0:
        raise ValueError("kernel mass needs bulk Green data")
    BT = g.nb_matrix.T.tocsr()
    a = np.zeros(g.n_darts, dtype=complex)
    a[b] = 1.0
    cnt = np.zeros(g.n_darts)
    cnt[b] = 1.0
    K = np.zeros(g.n_darts, dtype=complex)
    hits = np.zeros(g.n_darts)
    for _ in range(n):
        a = BT @ (a * F)
        cnt = BT @ cnt
        K += a
        hits += cnt
    mass = float(np.sum(np.abs(K) ** 2 * im) / (im[b] * n**2))
    return KernelMass(n, mass, 32 * z_lambda(zt) ** -4 / n, bool(np.all(hits <= 1)))


def zetainv_residual(zt: ZetaTable) -> float:
    """Max over edges ``(v, w)`` of ``|1/zeta_w(v) - zeta_v(w) + 1/G(v, v)|``."""
    g = zt.graph
    F = zt.forward
    G = green_diag_all(zt)
    # zeta_w(v) = F[(w, v)], zeta_v(w) = F[(v, w)] for dart (v, w)
    return float(np.max(np.abs(1 / F[g.reverse] - F + 1 / G[g.origin])))
