"""Graph Laplacian regularized (GLR) denoising baseline.

Minimizes ``||y - x||^2 + mu x^T L x``, i.e. solves ``(I + mu L) x = y``
with unpreconditioned conjugate gradient (Jacobi optional).
"""

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from agf import io
from agf.errors import ConfigError, ConvergenceError, InputError
from agf.pixelgraph import (
    build_8connected_graph,
    compute_features,
    gershgorin_bound,
    laplacian,
    partition_into_patches,
    reassemble_patches,
)
from agf.pipeline import AgfConfig

DEFAULT_MU = 10.0


@dataclass(frozen=True)
class GlrConfig:
    """``max_iter=None`` means ``10 * M`` for the system at hand."""

    mu: float = DEFAULT_MU
    tol: float = 1e-8
    max_iter: int = None
    jacobi: bool = False

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigError(f"mu must be > 0, got {self.mu}")
        if not self.tol > 0:
            raise ConfigError(f"CG tolerance must be > 0, got {self.tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class CgResult:
    x: np.ndarray
    iterations: int
    residual: float


def conjugate_gradient(A, b, tol, max_iter, precond=None):
    """Solve SPD ``A x = b`` from ``x = 0`` until ``||r|| <= tol ||b||``."""
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return CgResult(x, 0, 0.0)
    r = b.copy()
    z = precond * r if precond is not None else r
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        Ap = A @ p
        step = rz / (p @ Ap)
        x += step * p
        r -= step * Ap
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            return CgResult(x, k, rel)
        z = precond * r if precond is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not reach tol {tol:g} in {max_iter} iterations (residual {rel:.3g})", rel, max_iter)


def glr_solve(L, y, cfg=None, return_info=False):
    """Solve ``(I + mu L) x = y`` by conjugate gradient.

    Returns ``x``, or a :class:`CgResult` when ``return_info`` is set.
    """
    cfg = cfg if cfg is not None else GlrConfig()
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (L.M,):
        raise InputError(f"signal has shape {y.shape}, Laplacian has {L.M} nodes")
    A = sp.identity(L.M, format="csr") + cfg.mu * L.matrix
    precond = 1.0 / A.diagonal() if cfg.jacobi else None
    max_iter = cfg.max_iter if cfg.max_iter is not None else 10 * L.M
    res = conjugate_gradient(A, y, cfg.tol, max_iter, precond)
    return res if return_info else res.x


def condition_bound(L, mu):
    """``1 + mu * gershgorin_bound(L)`` bounds the condition number of ``I + mu L``."""
    if mu < 0:
        raise ConfigError(f"mu must be >= 0, got {mu}")
    return 1.0 + mu * gershgorin_bound(L)


def glr_denoise(img, cfg=None, agf_cfg=None):
    """Patch-wise GLR denoising on combinatorial Laplacians of 8-connected graphs.

    Graph construction (patch size, features, bandwidth) follows ``agf_cfg``.
    """
    cfg = cfg if cfg is not None else GlrConfig()
    agf_cfg = agf_cfg if agf_cfg is not None else AgfConfig()
    img = np.asarray(img, dtype=np.float64)
    out = []
    for patch in partition_into_patches(img, agf_cfg.m):
        path = None
        if agf_cfg.provider == "external":
            path = os.path.join(agf_cfg.feature_dir, io.agff_name(agf_cfg.stem, patch.index))
        fm = compute_features(patch, agf_cfg.provider, path)
        L = laplacian(build_8connected_graph(fm, patch.m, agf_cfg.eps), "combinatorial")
        out.append(patch.with_values(glr_solve(L, patch.values.reshape(-1), cfg).reshape(patch.m, patch.m)))
    return reassemble_patches(out, img.shape)
