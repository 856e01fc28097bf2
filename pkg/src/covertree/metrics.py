"""Delocalization parameters computed from bulk boundary Green data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graph import PotentialGraph, radii
from .green import EPS_BAND, ZetaTable

DEFAULT_S = (1.25, 1.5, 2.0, 3.0)
STRICT_TOL = 1e-10


class NotBulkError(ValueError):
    pass


def _bulk_forward(zt: ZetaTable, what: str = "z_lambda") -> np.ndarray:
    F = zt.forward
    if zt.classification not in (None, "bulk") or not np.all(np.isfinite(F)):
        raise NotBulkError(f"{what} undefined outside bulk")
    if zt.classification is None and np.min(np.abs(F.imag)) <= EPS_BAND:
        raise NotBulkError(f"{what} undefined outside bulk")
    return F


def z_lambda(zt: ZetaTable) -> float:
    """Smallest ``|Im zeta|`` over all directed edges."""
    return float(np.min(np.abs(_bulk_forward(zt).imag)))


def _one_step_terms(zt: ZetaTable, s: float) -> np.ndarray:
    """Per directed edge ``(x0, x1)``: sum over forward ``x2`` of the normalized s-moment."""
    F = _bulk_forward(zt, "Z_s")
    im = np.abs(F.imag)
    B = zt.graph.nb_matrix
    return np.abs(F) ** (2 * s) * (B @ im**s) / im**s


def Z_s_lambda(zt: ZetaTable, s: float) -> float:
    if s <= 1:
        raise ValueError("s must be > 1; s = 1 is covered by conservation_check")
    return float(np.max(_one_step_terms(zt, s)))


def script_Z(zt: ZetaTable) -> float:
    """Largest single one-step term ``|zeta(x0,x1)|^2 |Im zeta(x1,x2)| / |Im zeta(x0,x1)|``."""
    F = _bulk_forward(zt, "script_Z")
    g = zt.graph
    im = np.abs(F.imag)
    B = g.nb_matrix.tocoo()
    vals = np.abs(F[B.row]) ** 2 * im[B.col] / im[B.row]
    return float(vals.max()) if vals.size else 0.0


def M_lambda(zt: ZetaTable) -> float:
    return Z_s_lambda(zt, 2.0) ** -0.25


def conservation_residuals(zt: ZetaTable) -> np.ndarray:
    """Per-edge ``|sum_{x2} |Im zeta(x1,x2)| - |Im zeta(x0,x1)| / |zeta(x0,x1)|^2|``."""
    F = _bulk_forward(zt, "conservation")
    im = np.abs(F.imag)
    return np.abs(zt.graph.nb_matrix @ im - im / np.abs(F) ** 2)


def conservation_check(zt: ZetaTable) -> float | None:
    """Max current-conservation residual, or ``None`` when not applicable (gap energies)."""
    if zt.classification == "gap":
        return None
    return float(conservation_residuals(zt).max())


def strictness(value: float, bound: float = 1.0, tol: float = STRICT_TOL) -> str:
    if value <= bound - 10 * tol:
        return "strict"
    if value <= bound + 10 * tol:
        return "marginal"
    return "violated"


@dataclass
class DelocalizationParams:
    lam: float
    z_lambda: float
    Z_s: dict[float, float]
    script_Z: float
    M_lambda: float
    conservation_residual: float
    flags: dict[str, str] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "lambda": self.lam,
            "z": self.z_lambda,
            "Z_s": {repr(float(s)): v for s, v in sorted(self.Z_s.items())},
            "script_Z": self.script_Z,
            "M": self.M_lambda,
            "conservation_residual": self.conservation_residual,
            "flags": self.flags,
        }


def delocalization_params(zt: ZetaTable, s_list: Iterable[float] = DEFAULT_S) -> DelocalizationParams:
    s_vals = sorted({float(s) for s in s_list} | {2.0})
    Zs = {s: Z_s_lambda(zt, s) for s in s_vals}
    sZ = script_Z(zt)
    flags = {}
    if zt.graph.min_degree >= 3:
        flags["script_Z<1"] = strictness(sZ)
        for s, v in Zs.items():
            flags[f"Z_{s:g}<1"] = strictness(v)
            flags[f"Z_{s:g}<=script_Z^(s-1)"] = strictness(v, sZ ** (s - 1))
    return DelocalizationParams(
        lam=zt.lam,
        z_lambda=z_lambda(zt),
        Z_s=Zs,
        script_Z=sZ,
        M_lambda=Zs[2.0] ** -0.25,
        conservation_residual=conservation_check(zt),
        flags=flags,
    )


# -- cycles -----------------------------------------------------------------


@dataclass
class CycleProduct:
    value: float
    bound: float | None
    asserted: bool
    holds: bool
    reason: str = ""


def _cycle_darts(g: PotentialGraph, cycle: Sequence[int]) -> list[int]:
    cyc = list(cycle)
    if len(cyc) > 1 and cyc[0] == cyc[-1]:
        cyc = cyc[:-1]
    if len(cyc) < 3 or len(set(cyc)) != len(cyc):
        raise ValueError("cycle must list at least three distinct vertices")
    return [g.dart(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))]


def cycle_product(zt: ZetaTable, cycle: Sequence[int], tol: float = 1e-8) -> CycleProduct:
    """``|zeta_{u0}(u1) zeta_{u1}(u2) ... zeta_{um}(u0)|`` around a simple cycle of ``G``.

    The ``1 - z^2/4`` contraction is asserted for bulk energies and cycles missing a vertex;
    otherwise only the weak bound 1 is checked.
    """
    g = zt.graph
    darts = _cycle_darts(g, cycle)
    value = float(np.prod(np.abs(zt.forward[darts])))
    covers = len(set(g.origin[darts].tolist())) == g.n
    if zt.classification == "bulk" and not covers:
        bound = 1.0 - z_lambda(zt) ** 2 / 4
        return CycleProduct(value, bound, True, value <= bound + tol)
    reason = "cycle covers every vertex" if covers else "energy not in the bulk"
    return CycleProduct(value, 1.0, False, value <= 1.0 + tol, reason)


def simple_cycles(g: PotentialGraph, max_len: int) -> list[list[int]]:
    """Simple cycles up to ``max_len`` vertices, one per vertex set and orientation class."""
    out: list[list[int]] = []
    seen: set[frozenset] = set()

    def extend(path: list[int], onpath: set[int]):
        v = path[-1]
        for u in g.neighbors[v]:
            if u == path[0] and len(path) >= 3:
                key = frozenset(zip(path, path[1:] + path[:1]))
                key = frozenset(frozenset(e) for e in key)
                if key not in seen:
                    seen.add(key)
                    out.append(list(path))
            elif u > path[0] and u not in onpath and len(path) < max_len:
                onpath.add(u)
                path.append(u)
                extend(path, onpath)
                path.pop()
                onpath.discard(u)

    for s in range(g.n):
        extend([s], {s})
    return out


# -- path sums -----------------------------------------------------------------


@dataclass
class PathDecayProfile:
    s: float
    r: np.ndarray
    forward_sums: np.ndarray  # (n_darts, r_max+1)
    reversed_sums: np.ndarray
    max_single: np.ndarray
    bound_forward: np.ndarray
    bound_reversed: np.ndarray
    bound_single: np.ndarray
    passed: bool

    def worst_margins(self) -> dict[str, float]:
        return {
            "forward": float(np.min(self.bound_forward - self.forward_sums.max(axis=0))),
            "reversed": float(np.min(self.bound_reversed - self.reversed_sums.max(axis=0))),
            "single": float(np.min(self.bound_single - self.max_single.max(axis=0))),
        }


def path_sums(zt: ZetaTable, weights: np.ndarray, r_max: int, final: np.ndarray | None = None) -> np.ndarray:
    """``S[b1, r] = sum over non-backtracking (b1, ..., b_{r+1}) of prod_{i<=r} weights[b_i] * final[b_{r+1}]``."""
    g = zt.graph
    k = g.n_darts
    B = g.nb_matrix
    fin = np.ones(k) if final is None else final
    out = np.empty((k, r_max + 1))
    # row b1 of U holds the sum of path weights ending at each dart
    U = np.eye(k)
    for r in range(r_max + 1):
        out[:, r] = U @ fin
        if r < r_max:
            U = np.asarray((B.T @ (U * weights).T).T)
    return out


def _max_paths(zt: ZetaTable, weights: np.ndarray, r_max: int) -> np.ndarray:
    g = zt.graph
    k = g.n_darts
    Bc = g.nb_matrix.tocoo()
    out = np.empty((k, r_max + 1))
    U = np.eye(k)
    for r in range(r_max + 1):
        out[:, r] = U.max(axis=1)
        if r < r_max:
            cand = U[:, Bc.row] * weights[Bc.row]
            nxt = np.zeros_like(U)
            for j in range(k):
                sel = Bc.col == j
                if sel.any():
                    nxt[:, j] = cand[:, sel].max(axis=1)
            U = nxt
    return out


def path_decay_profile(zt: ZetaTable, s: float, r_max: int, *, ell_G: int | None = None,
                       tol: float = 1e-9) -> PathDecayProfile:
    """Path-sum decay of products of ``zeta`` along non-backtracking paths from every edge."""
    if s < 1:
        raise ValueError("s must be >= 1")
    if ell_G is None:
        ell_G = radii(zt.graph).ell_G
    if r_max > ell_G:
        raise ValueError(f"r_max={r_max} exceeds ell_G={ell_G}")
    F = _bulk_forward(zt, "path_decay_profile")
    g = zt.graph
    absF = np.abs(F)
    fwd = path_sums(zt, absF ** (2 * s), r_max)
    rev = path_sums(zt, absF[g.reverse] ** (2 * s), r_max)
    single = _max_paths(zt, absF**2, r_max)
    z = z_lambda(zt)
    Zs = Z_s_lambda(zt, s) if s > 1 else 1.0
    rr = np.arange(r_max + 1)
    bf = z ** (-2 * s) * Zs**rr
    br = z ** (-6 * s) * Zs**rr
    bs = z**-2.0 * (Zs ** (1.0 / s)) ** rr
    ok = bool(np.all(fwd <= bf * (1 + tol)) and np.all(rev <= br * (1 + tol)) and np.all(single <= bs * (1 + tol)))
    return PathDecayProfile(s, rr, fwd, rev, single, bf, br, bs, ok)


def recurpath_residual(zt: ZetaTable, r_max: int) -> float:
    """Max over edges and ``r`` of ``|sum |prod zeta|^2 |Im zeta(b_{r+1})| - |Im zeta(b1)||``."""
    F = _bulk_forward(zt, "recurpath")
    im = np.abs(F.imag)
    S = path_sums(zt, np.abs(F) ** 2, r_max, final=im)
    return float(np.max(np.abs(S - im[:, None])))
