"""Randomized property suites behind ``agf verify``.

Each suite draws its inputs from a seeded generator and returns a
:class:`SuiteResult` carrying the worst residual seen and the tolerance it
is judged against.
"""

import time
import functools
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from agf.bipartite import split_hv_diag, verify_bipartite
from agf.glr import GlrConfig, condition_bound, glr_solve
from agf.graphbio import (
    analyze,
    apply_chebyshev,
    apply_exact,
    eigendecompose,
    lowpass_filter,
    spectral_fold_check,
    synthesize,
)
from agf.pixelgraph import FeatureMap, WeightedGraph, build_8connected_graph, gershgorin_bound, laplacian


@dataclass(frozen=True)
class SuiteResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name:<22} max_residual={self.residual:.3e}  tol={self.tolerance:.1e}{extra}"


def random_bipartite_graph(rng, max_nodes=64, min_nodes=4, density=0.3):
    """Random bipartite graph without isolated nodes, weights uniform in (0, 1].

    Returns ``(graph, coloring)``.
    """
    M = int(rng.integers(min_nodes, max_nodes + 1))
    coloring = np.zeros(M, dtype=np.int8)
    coloring[rng.permutation(M)[: int(rng.integers(1, M))]] = 1
    A, B = np.flatnonzero(coloring == 0), np.flatnonzero(coloring == 1)
    mask = rng.random((A.size, B.size)) < density
    mask[np.arange(A.size), rng.integers(0, B.size, A.size)] = True
    mask[rng.integers(0, A.size, B.size), np.arange(B.size)] = True
    ia, ib = np.nonzero(mask)
    i, j = A[ia], B[ib]
    rows, cols = np.minimum(i, j), np.maximum(i, j)
    order = np.lexsort((cols, rows))
    weights = 1.0 - rng.random(order.size)
    return WeightedGraph(M, rows[order], cols[order], weights), coloring


def random_graph(rng, max_nodes=100, p=0.2, min_nodes=2):
    """Random weighted graph (any topology), weights uniform in (0, 1]."""
    M = int(rng.integers(min_nodes, max_nodes + 1))
    iu, ju = np.triu_indices(M, 1)
    keep = rng.random(iu.size) < p
    keep[0] = True
    return WeightedGraph(M, iu[keep], ju[keep], 1.0 - rng.random(int(keep.sum())))


def random_patch_subgraphs(rng, m, eps=0.2):
    """HV and diagonal subgraphs of an 8-connected patch with random features."""
    fm = FeatureMap(rng.random((m * m, 3)))
    pair = split_hv_diag(build_8connected_graph(fm, m, eps), m)
    return [(pair.hv, pair.coloring_hv), (pair.diag, pair.coloring_diag)]


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        return replace(res, seconds=time.perf_counter() - t0)

    return wrapper


@_timed
def filterbank_identities(fb, tol=1e-9):
    res = fb.check(n_samples=257)
    worst = max(res.values())
    return SuiteResult("filterbank", worst, tol, worst <= tol,
                       " ".join(f"{k}={v:.1e}" for k, v in res.items()))


@_timed
def perfect_reconstruction(fb, rng, trials=100, max_nodes=64, tol=1e-8):
    worst = 0.0
    for _ in range(trials):
        g, col = random_bipartite_graph(rng, max_nodes)
        x = rng.normal(size=g.M)
        xr = synthesize(fb, g, col, analyze(fb, g, col, x))
        worst = max(worst, float(np.linalg.norm(xr - x) / np.linalg.norm(x)))
    return SuiteResult("perfect_reconstruction", worst, tol, worst <= tol, f"trials={trials}")


@_timed
def lowpass_identity(fb, rng, trials=100, sides=(4, 8, 12), tol=1e-8):
    worst = 0.0
    for t in range(trials):
        m = sides[t % len(sides)]
        g, col = random_patch_subgraphs(rng, m)[t // len(sides) % 2]
        x = rng.uniform(0, 255, g.M)
        out = lowpass_filter(fb, g, col, x, 1.0)
        worst = max(worst, float(np.linalg.norm(out - x) / np.linalg.norm(x)))
    return SuiteResult("lowpass_identity", worst, tol, worst <= tol, f"trials={trials}")


@_timed
def spectral_folding(rng, trials=100, max_nodes=64, tol=1e-8, control_min=1e-2):
    worst = 0.0
    for _ in range(trials):
        g, col = random_bipartite_graph(rng, max_nodes)
        worst = max(worst, spectral_fold_check(g, col).worst)
    tri = WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    control = spectral_fold_check(tri, np.array([0, 1, 0])).max_residual
    ok = worst <= tol and control > control_min
    return SuiteResult("spectral_folding", worst, tol, ok, f"triangle_control={control:.3f}")


@_timed
def psd_and_gershgorin(rng, trials=1000, mu=10.0, tol=1e-10):
    """PSD of both Laplacian kinds and Gershgorin bounds on random patch graphs.

    The residual is the worst violation among: negative eigenvalue depth,
    ``lam_max(L) - gershgorin_bound``, ``lam_max(L) - 16``,
    ``lam_max(L_norm) - 2`` and ``kappa(I + mu L) - (1 + mu * bound)``.
    """
    worst = {"psd": 0.0, "gct": 0.0, "deg8": 0.0, "norm2": 0.0, "kappa": 0.0}
    for _ in range(trials):
        m = int(rng.integers(2, 11))
        eps = float(rng.uniform(0.05, 1.0))
        fm = FeatureMap(rng.normal(size=(m * m, int(rng.integers(1, 4)))))
        g = build_8connected_graph(fm, m, eps)
        L = laplacian(g, "combinatorial")
        lam = scipy.linalg.eigvalsh(L.dense())
        ln = scipy.linalg.eigvalsh(laplacian(g, "normalized").dense())
        bound = gershgorin_bound(L)
        kappa = (1 + mu * lam[-1]) / (1 + mu * max(lam[0], 0.0))
        worst["psd"] = max(worst["psd"], -min(lam[0], ln[0]))
        worst["gct"] = max(worst["gct"], lam[-1] - bound)
        worst["deg8"] = max(worst["deg8"], lam[-1] - 16.0)
        worst["norm2"] = max(worst["norm2"], ln[-1] - 2.0)
        worst["kappa"] = max(worst["kappa"], kappa - condition_bound(L, mu))
    residual = max(worst.values())
    return SuiteResult("psd_gershgorin", max(residual, 0.0), tol, residual <= tol,
                       " ".join(f"{k}={v:.1e}" for k, v in worst.items()))


@_timed
def chebyshev_convergence(fb, rng, trials=4, m=24, orders=(8, 16, 32, 64), check_order=30, tol=1e-3):
    """Chebyshev error for ``h0`` against exact application on patch subgraphs.

    Fails if the error at ``check_order`` exceeds ``tol`` or if the error
    increases along ``orders``.
    """
    worst, monotone = 0.0, True
    for t in range(trials):
        g, _ = random_patch_subgraphs(rng, m)[t % 2]
        L = laplacian(g, "normalized")
        x = rng.normal(size=L.M)
        ref = apply_exact(fb.h0, eigendecompose(L), x)
        rel = lambda K: float(np.linalg.norm(apply_chebyshev(fb.h0, L, x, K, (0.0, 2.0)) - ref) / np.linalg.norm(ref))
        errs = [rel(K) for K in orders]
        monotone &= all(b <= a for a, b in zip(errs, errs[1:]))
        worst = max(worst, rel(check_order))
    return SuiteResult("chebyshev", worst, tol, worst <= tol and monotone, f"non_increasing={monotone}")


@_timed
def cg_vs_direct(rng, trials=1000, max_nodes=100, tol=1e-6):
    worst = 0.0
    for _ in range(trials):
        L = laplacian(random_graph(rng, max_nodes), "combinatorial")
        mu = float(10 ** rng.uniform(-2, 2))
        y = rng.normal(size=L.M)
        want = scipy.linalg.solve(np.eye(L.M) + mu * L.dense(), y, assume_a="pos")
        got = glr_solve(L, y, GlrConfig(mu=mu))
        worst = max(worst, float(np.linalg.norm(got - want) / np.linalg.norm(want)))
    fixture = glr_solve(laplacian(WeightedGraph.from_edges(2, [(0, 1, 1.0)])), np.array([1.0, 0.0]),
                        GlrConfig(mu=1.0, tol=1e-14))
    fix_err = float(np.max(np.abs(fixture - [2 / 3, 1 / 3])))
    return SuiteResult("cg_vs_direct", worst, tol, worst <= tol and fix_err <= 1e-12, f"fixture_err={fix_err:.1e}")


@_timed
def bipartition(sides=range(2, 33)):
    bad = 0
    for m in sides:
        fm = FeatureMap(np.zeros((m * m, 1)))
        g = build_8connected_graph(fm, m, 0.2)
        pair = split_hv_diag(g, m)
        hv = set(zip(pair.hv.rows.tolist(), pair.hv.cols.tolist()))
        dg = set(zip(pair.diag.rows.tolist(), pair.diag.cols.tolist()))
        ok = (
            len(hv) == 2 * m * (m - 1)
            and len(dg) == 2 * (m - 1) ** 2
            and not hv & dg
            and hv | dg == set(zip(g.rows.tolist(), g.cols.tolist()))
            and verify_bipartite(pair.hv, pair.coloring_hv)
            and verify_bipartite(pair.diag, pair.coloring_diag)
        )
        bad += not ok
    return SuiteResult("bipartition", float(bad), 0.0, bad == 0, f"sides={len(list(sides))}")


def run_all(fb, seed=0, scale=1.0):
    """Run every suite; ``scale`` multiplies the default trial counts."""
    n = lambda k: max(1, int(round(k * scale)))
    rng = lambda k: np.random.default_rng([seed, k])
    return [
        filterbank_identities(fb),
        perfect_reconstruction(fb, rng(1), trials=n(100)),
        lowpass_identity(fb, rng(2), trials=n(100)),
        spectral_folding(rng(3), trials=n(100)),
        psd_and_gershgorin(rng(4), trials=n(1000)),
        chebyshev_convergence(fb, rng(5), trials=n(4)),
        cg_vs_direct(rng(6), trials=n(1000)),
        bipartition(),
    ]
