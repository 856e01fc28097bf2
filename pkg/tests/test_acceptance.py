"""Acceptance criteria 1-10, one summary line each (printed in the terminal summary)."""

import math
import time
from dataclasses import dataclass

import numpy as np
import pytest

from covertree.cycles import (
    EDGE_WINDOW,
    PeriodicZOperator,
    band_distance,
    bulk_constant,
    monodromy_bands,
    verify_cycle_bounds,
)
from covertree.graph import (
    LiftMap,
    PotentialGraph,
    complete_graph,
    cycle_graph,
    localized_example,
    n_lift,
    petersen_graph,
    radii,
    tutte_coxeter_graph,
    wheel_graph,
)
from covertree.green import BandStructure, band_scan, boundary_zeta, combes_thomas_check
from covertree.metrics import Z_s_lambda, conservation_check, cycle_product, simple_cycles, z_lambda
from covertree.verify import (
    EigenReport,
    classify_and_report,
    full_spectrum,
    kernel_mass,
    nb_eigen_residual,
    nb_lift,
    representation_check,
    support_size,
    zetainv_residual,
)

GRID = 0.005
P_LIST = (5, 6, 8)


def record(log, k, ok, detail):
    log.append(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")


def bulk_energies(bands: BandStructure, k: int, pad: float = 0.05) -> list[float]:
    """``k`` energies spread over the band interiors, away from edges and poles."""
    pts = []
    for lo, hi in bands.bands:
        if hi - lo > 2 * pad:
            pts += list(np.linspace(lo + pad, hi - pad, 25))
    pts = [x for x in pts if all(abs(x - f) > pad for f in bands.exceptional_F)]
    idx = np.linspace(0, len(pts) - 1, k).round().astype(int)
    return [float(pts[i]) for i in idx]


def gap_energies(bands: BandStructure, k: int = 3) -> list[float]:
    """Internal gap midpoints first, then points outside the outermost bands."""
    out = []
    for (_, hi), (lo, _) in zip(bands.bands, bands.bands[1:]):
        mid = 0.5 * (hi + lo)
        if lo - hi > 0.02 and bands.distance_to_spectrum(mid) > 0.005:
            out.append(mid)
    lo_all = min(b[0] for b in bands.bands)
    hi_all = max(b[1] for b in bands.bands)
    for x in (hi_all + 0.3, lo_all - 0.3, hi_all + 1.0, lo_all - 1.0):
        if bands.distance_to_spectrum(x) > 0.005:
            out.append(x)
    return out[:k]


# -- shared ensemble --------------------------------------------------------------


@dataclass
class Member:
    name: str
    base: PotentialGraph
    lift: LiftMap
    bands: BandStructure
    report: EigenReport
    pairs: list
    ell_local: np.ndarray
    energies: list
    lift_zetas: list


def connected_lift(base, N, seed):
    for k in range(100):
        L = n_lift(base, N, seed=1000 * seed + k)
        if L.lift.connected:
            return L
    raise RuntimeError("no connected lift found")


@pytest.fixture(scope="module")
def ensemble():
    t0 = time.perf_counter()
    bases = {"K4": lambda w: complete_graph(4, w), "wheel": lambda w: wheel_graph(4, w)}
    members = []
    for b, (name, make) in enumerate(bases.items()):
        n = make(np.zeros(5 if name == "wheel" else 4)).n
        pots = [make(np.random.default_rng(100 * b + j).uniform(-1, 1, n)) for j in range(4)]
        scans = [band_scan(g, grid_step=GRID) for g in pots]
        for i in range(20):
            N = 3 + (47 * i) // 19
            j = i % 4
            L = connected_lift(pots[j], N, seed=i)
            rad = radii(L.lift)
            pairs = full_spectrum(L.lift)
            rep = classify_and_report(L.lift, pairs, scans[j], rad, P_LIST, zeta_graph=pots[j], rotations=20, seed=i)
            members.append(Member(f"{name}[W{j}] N={N}", pots[j], L, scans[j], rep, pairs, rad.ell_local,
                                  bulk_energies(scans[j], 5), []))
    elapsed = time.perf_counter() - t0
    for m in members:
        # solved on the lift itself, not pulled back from the base
        m.lift_zetas = [boundary_zeta(m.lift.lift, lam) for lam in m.energies]
    return members, elapsed


@pytest.fixture(scope="module")
def regular_instances():
    k4 = complete_graph(4)
    k4_bands = band_scan(k4, grid_step=GRID)
    out = []
    for N in (10, 25, 50):
        L = connected_lift(k4, N, seed=N)
        g = L.lift
        out.append(("K4 N=%d" % N, g, classify_and_report(g, full_spectrum(g), k4_bands, radii(g), P_LIST,
                                                          zeta_graph=k4)))
    for name, g in (("Petersen", petersen_graph()), ("Tutte-Coxeter", tutte_coxeter_graph())):
        bs = band_scan(g, grid_step=GRID)
        out.append((name, g, classify_and_report(g, full_spectrum(g), bs, radii(g), P_LIST)))
    return out


@pytest.fixture(scope="module")
def large_ell_instances():
    rng = np.random.default_rng(2024)
    tc = tutte_coxeter_graph()
    graphs = [("TC W=0", tc)]
    graphs += [(f"TC W~U[-1,1] #{k}", tutte_coxeter_graph(rng.uniform(-1, 1, 30))) for k in range(2)]
    tcw = tutte_coxeter_graph(rng.uniform(-1, 1, 30))
    graphs.append(("TC 2-lift", connected_lift(tcw, 2, seed=5).lift))
    return [(name, g, radii(g)) for name, g in graphs]


# -- 1 -------------------------------------------------------------------------------


def test_criterion_1_regular_tree_oracle(acceptance_log):
    t0 = time.perf_counter()
    err_zeta = err_z = err_Z = 0.0
    for q in (2, 3):
        g = complete_graph(q + 2)
        a = 2 * math.sqrt(q)
        for lam in np.linspace(-a + 0.1, a - 0.1, 100):
            zt = boundary_zeta(g, lam)
            assert zt.classification == "bulk"
            exact = (lam - 1j * math.sqrt(4 * q - lam**2)) / (2 * q)
            err_zeta = max(err_zeta, float(np.max(np.abs(zt.forward - exact))))
            err_z = max(err_z, abs(z_lambda(zt) - math.sqrt(4 * q - lam**2) / (2 * q)))
            for s in (1.25, 1.5, 2.0, 3.0):
                err_Z = max(err_Z, abs(Z_s_lambda(zt, s) - q ** (1 - s)))
    dt = time.perf_counter() - t0
    ok = err_zeta <= 1e-10 and err_z <= 1e-9 and err_Z <= 1e-9 and dt < 10
    record(acceptance_log, 1, ok, f"max|zeta err|={err_zeta:.1e}, max|z err|={err_z:.1e}, "
           f"max|Z_s err|={err_Z:.1e}, {dt:.1f}s")
    assert ok


# -- 2 -------------------------------------------------------------------------------


def test_criterion_2_current_conservation(ensemble, acceptance_log):
    members, _ = ensemble
    worst, count, not_bulk = 0.0, 0, 0
    for m in members:
        for zt in m.lift_zetas:
            if zt.classification != "bulk":
                not_bulk += 1
                continue
            worst = max(worst, conservation_check(zt))
            count += 1
    ok = worst <= 1e-6 and count == 5 * len(members)
    record(acceptance_log, 2, ok, f"{len(members)} lifts x 5 bulk energies ({count} solves on the lifts), "
           f"max residual {worst:.1e}, {not_bulk} energies not bulk")
    assert ok


# -- 3 -------------------------------------------------------------------------------


def test_criterion_3_bulk_sup_norm(ensemble, acceptance_log):
    members, elapsed = ensemble
    checked = skipped = viol = 0
    worst = -math.inf
    for m in members:
        for p in m.report.by_class("bulk"):
            c = p.check("sup_bulk")
            if c is None:
                continue
            if c.skipped:
                skipped += 1
                continue
            checked += 1
            worst = max(worst, c.value / c.bound)
            viol += not c.passed
        viol += sum(1 for f in m.report.rotation_failures if f["check"] == "sup_bulk")
    nmax = max(m.lift.lift.n for m in members)
    ok = viol == 0 and checked > 0 and elapsed < 300 and nmax <= 1000
    record(acceptance_log, 3, ok, f"{checked} bulk pairs checked ({skipped} skipped, ell_G=0), {viol} violations, "
           f"max sup/bound {worst:.3f}, |V|<={nmax}, {elapsed:.0f}s")
    assert ok


# -- 4 -------------------------------------------------------------------------------


def test_criterion_4_gap_sup_norm(ensemble, regular_instances, acceptance_log):
    members, _ = ensemble
    reports = [m.report for m in members] + [r for _, _, r in regular_instances]
    checked = viol = perron = 0
    for rep, g in zip(reports, [m.lift.lift for m in members] + [g for _, g, _ in regular_instances]):
        for p in rep.by_class("gap"):
            c = p.check("sup_gap")
            if c is None or c.skipped:
                continue
            checked += 1
            viol += not c.passed
            perron += abs(p.lam - g.max_degree) < 1e-9 and np.ptp(g.w) == 0
        viol += sum(1 for f in rep.rotation_failures if f["check"] == "sup_gap")
    ok = viol == 0 and perron >= 3
    record(acceptance_log, 4, ok, f"{checked} gap pairs checked ({perron} Perron pairs of regular graphs), "
           f"{viol} violations")
    assert ok


# -- 5 -------------------------------------------------------------------------------


def test_criterion_5_p_norms_and_support(ensemble, regular_instances, acceptance_log):
    members, _ = ensemble
    names = {f"p{p}_bulk" for p in P_LIST} | {"support", "support_biregular"}
    checked = viol = instances = 0
    reports = [(m.lift.lift, m.report) for m in members] + [(g, r) for _, g, r in regular_instances]
    for g, rep in reports:
        if g.min_degree < 3 or rep.ell_G < 1:
            continue
        instances += 1
        for p in rep.by_class("bulk"):
            for c in p.checks:
                if c.name in names and not c.skipped:
                    checked += 1
                    viol += not c.passed
        viol += sum(1 for f in rep.rotation_failures if f["check"] in names)
    ok = viol == 0 and checked > 0
    record(acceptance_log, 5, ok, f"{instances} instances with ell_G>=1, {checked} p-norm/support checks "
           f"(p=5,6,8), {viol} violations")
    assert ok


# -- 6 -------------------------------------------------------------------------------


def test_criterion_6_kernel_mass(large_ell_instances, acceptance_log):
    checked = tree = viol = 0
    worst_tree = 0.0
    for name, g, rad in large_ell_instances:
        assert rad.ell_G >= 3, name
        energies = [lam for lam in np.linspace(-2.0, 2.0, 9) if boundary_zeta(g, lam).classification == "bulk"][:3]
        assert len(energies) == 3, name
        for lam in energies:
            zt = boundary_zeta(g, lam)
            for b in range(g.n_darts):
                for n in range(1, rad.ell_G + 1):
                    km = kernel_mass(zt, b, n, ell_G=rad.ell_G)
                    checked += 1
                    viol += not km.passed
                    if km.tree_like:
                        tree += 1
                        worst_tree = max(worst_tree, abs(km.mass - 1 / n))
    ok = viol == 0 and checked > 0
    record(acceptance_log, 6, ok, f"{len(large_ell_instances)} instances with ell_G>=3, {checked} (edge, n) cases, "
           f"{tree} tree-like with max|mass-1/n|={worst_tree:.1e}, {viol} violations")
    assert ok


# -- 7 -------------------------------------------------------------------------------


def test_criterion_7_combes_thomas(ensemble, large_ell_instances, acceptance_log):
    members, _ = ensemble
    checked = viol = instances = 0
    cases = [(m.lift.lift, m.base, m.bands, m.lift) for m in members]
    for _, g, _ in large_ell_instances[:2]:
        cases.append((g, g, band_scan(g, grid_step=GRID), None))
    cache = {}
    for g, base, bands, lift in cases:
        energies = gap_energies(bands, 3)
        assert len(energies) == 3
        instances += 1
        for lam in energies:
            key = (id(base), lam)
            if key not in cache:
                cache[key] = boundary_zeta(base, lam)
            zt = cache[key]
            assert zt.classification == "gap", (lam, zt.classification)
            if lift is not None:
                zt = zt.pullback(lift)
            rep = combes_thomas_check(g, lam, bands.distance_to_spectrum(lam), 10, zt=zt)
            checked += len(rep.rows)
            viol += sum(r["margin"] < 0 for r in rep.rows)
    ok = viol == 0
    record(acceptance_log, 7, ok, f"{instances} instances x 3 gap energies, {checked} (energy, n) rows "
           f"with n<=10, {viol} violations")
    assert ok


# -- 8 -------------------------------------------------------------------------------


def test_criterion_8_cycles(acceptance_log):
    potentials = {"W=0": [0.0], "(3,-3)": [3.0, -3.0], "(1,0,-1)": [1.0, 0.0, -1.0]}
    gap_checked = bulk_checked = viol = edge = 0
    band_err = 0.0
    not_applicable = []
    for label, W in potentials.items():
        m = len(W)
        # band structure: cover scan on the shortest cycle carrying whole periods vs the discriminant
        mm = m * math.ceil(3 / m)
        cover = band_scan(cycle_graph(mm, np.resize(W, mm)), grid_step=GRID, require_band=False)
        mono = monodromy_bands(PeriodicZOperator(W))
        assert len(cover.bands) == len(mono)
        band_err = max(band_err, max(max(abs(a - c), abs(b - d)) for (a, b), (c, d) in zip(cover.bands, mono)))
        Ns = [64, 256, 1024]
        if m == 3:
            Ns += [63, 255, 1023]
        for N in Ns:
            if N % m:
                not_applicable.append((label, N, as_if_violations(W, N)))
                continue
            rep = verify_cycle_bounds(N, W)
            for c in rep.checks:
                gap_checked += c.kind == "gap"
                bulk_checked += c.kind == "bulk"
                edge += c.kind == "edge"
            viol += len([c for c in rep.checks if not c.passed])
    ok = viol == 0 and band_err <= GRID and bulk_checked > 0
    na = "; ".join(f"{lab} N={N}: period does not divide N, as-if check {v} violations" for lab, N, v in not_applicable)
    record(acceptance_log, 8, ok, f"{bulk_checked} interior-band and {gap_checked} gap eigenvectors "
           f"(incl. rotations), {edge} within {EDGE_WINDOW:g} of an edge skipped, {viol} violations, "
           f"band error {band_err:.1e} <= {GRID}; not applicable: {na}")
    assert ok


def as_if_violations(W, N):
    """Count bound violations when the non-periodic tiled potential is treated as periodic."""
    bands = monodromy_bands(PeriodicZOperator(W))
    vals, vecs = np.linalg.eigh(cycle_graph(N, np.resize(W, N)).hamiltonian())
    bad = 0
    for lam, psi in zip(vals, vecs.T):
        if any(min(abs(lam - lo), abs(lam - hi)) <= EDGE_WINDOW for lo, hi in bands):
            continue
        d = band_distance(bands, lam)
        bound = 16 / d**2 if d > 0 else bulk_constant(W, lam)
        bad += N * np.max(np.abs(psi)) ** 2 > bound
    return int(bad)


# -- 9 -------------------------------------------------------------------------------


def test_criterion_9_localization(acceptance_log):
    details, ok = [], True
    for m in (2, 5, 10):
        g = localized_example(m)
        vals, vecs = np.linalg.eigh(g.hamiltonian())
        sel = np.abs(vals + 1) < 1e-9
        present = bool(sel.any())
        # vectors of the -1 eigenspace vanishing on the path vertices (index >= 6)
        V = vecs[:, sel]
        _, s, vt = np.linalg.svd(V[6:, :])
        null = vt[np.sum(s > 1e-10):]
        found = False
        for c in null:
            psi = V @ c
            psi /= np.linalg.norm(psi)
            if abs(np.max(np.abs(psi)) - 0.5) <= 1e-8 and support_size(psi) == 4:
                found = True
        bands = band_scan(g, grid_step=0.02 if m > 2 else GRID)
        flagged = any(abs(f + 1) <= bands.grid_step for f in bands.exceptional_F)
        ok &= present and found and flagged
        details.append(f"m={m}: eigenvalue -1 {'present' if present else 'missing'}, "
                       f"sup 0.5/support 4 vector {'found' if found else 'missing'}, "
                       f"{'flagged' if flagged else 'not flagged'}")
    record(acceptance_log, 9, ok, "; ".join(details))
    assert ok


# -- 10 -------------------------------------------------------------------------------


def test_criterion_10_identities(ensemble, large_ell_instances, acceptance_log):
    members, _ = ensemble
    zinv = rep_dev = nb_res = 0.0
    cyc_viol = cyc_count = rep_count = nb_count = 0
    for m in members:
        for zt in m.lift_zetas:
            zinv = max(zinv, zetainv_residual(zt))
        L = m.lift
        r_top = int(min(3, m.ell_local.max()))
        bulk = m.report.by_class("bulk")
        chosen = bulk[:: max(1, len(bulk) // 3)][:3] + m.report.by_class("gap")[:1]
        for pr in chosen:
            zt = boundary_zeta(m.base, pr.lam).pullback(L)
            if pr.classification == "bulk":
                f, _ = nb_lift(m.pairs[pr.index], zt)
                nb_res = max(nb_res, nb_eigen_residual(f, zt))
                nb_count += 1
            for r in range(1, r_top + 1):
                for k in range(1, r_top + 1):
                    res = representation_check(m.pairs[pr.index], zt, r, k, max_vertices=8,
                                               radii_profile=radii(L.lift))
                    rep_dev = max(rep_dev, res.outgoing, res.bulk or 0.0)
                    rep_count += 1
        for pr in bulk[::10]:
            zt = boundary_zeta(m.base, pr.lam).pullback(L)
            f, _ = nb_lift(m.pairs[pr.index], zt)
            nb_res = max(nb_res, nb_eigen_residual(f, zt))
            nb_count += 1
    # cycle products on every short cycle of the bases and of the small lifts
    seen = set()
    for m in members:
        graphs = [] if id(m.base) in seen else [m.base]
        seen.add(id(m.base))
        if m.lift.lift.n <= 40:
            graphs.append(m.lift.lift)
        for g in graphs:
            cycles = simple_cycles(g, 6)
            for lam in m.energies[::2]:
                zt = boundary_zeta(m.base, lam)
                if g is not m.base:
                    zt = zt.pullback(m.lift)
                for c in cycles:
                    cp = cycle_product(zt, c, tol=1e-8)
                    if cp.asserted:
                        cyc_count += 1
                        cyc_viol += not cp.holds
    # the large-girth instances exercise r, k up to 3 on every vertex
    for name, g, rad in large_ell_instances[:2]:
        pairs = full_spectrum(g)
        for pair in pairs[5::10]:
            zt = boundary_zeta(g, pair.lam)
            if zt.classification not in ("bulk", "gap"):
                continue
            zinv = max(zinv, zetainv_residual(zt))
            res = representation_check(pair, zt, 3, 3, rad, max_vertices=6)
            rep_dev = max(rep_dev, res.outgoing, res.bulk or 0.0)
            rep_count += 1
    ok = zinv <= 1e-8 and rep_dev <= 1e-6 and nb_res <= 1e-6 and cyc_viol == 0 and cyc_count > 0
    record(acceptance_log, 10, ok, f"zetainv max {zinv:.1e}; representation max deviation {rep_dev:.1e} over "
           f"{rep_count} (pair, r, k) cases; nb_lift residual max {nb_res:.1e} over {nb_count} pairs; "
           f"{cyc_count} cycle products, {cyc_viol} above 1-z^2/4+1e-8")
    assert ok
