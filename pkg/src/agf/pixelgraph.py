"""Patches, per-pixel features, and 8-connected patch graphs.

Nodes are indexed row-major over the ``m x m`` lattice: node ``r * m + c``
is pixel ``(r, c)`` of the patch. Feature files rely on this ordering.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from agf import io
from agf.errors import ConfigError, InputError, NumericError

#: Lower clamp for edge weights; keeps every degree strictly positive.
W_MIN = 1e-8

#: Lattice offsets ``(drow, dcol)`` generating each undirected edge once.
HV_OFFSETS = ((0, 1), (1, 0))
DIAG_OFFSETS = ((1, 1), (1, -1))

PROVIDERS = ("intensity", "intensity+coords", "external")


@dataclass(frozen=True)
class Patch:
    """An ``m x m`` block of pixels and its position in the padded image."""

    values: np.ndarray
    origin: tuple = (0, 0)
    index: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError(f"patch must be square, got shape {v.shape}")
        if v.shape[0] < 2:
            raise ConfigError("patch side m must be >= 2")
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def M(self):
        return self.values.size

    def with_values(self, values):
        return Patch(np.asarray(values, dtype=np.float64).reshape(self.m, self.m), self.origin, self.index)


@dataclass(frozen=True)
class FeatureMap:
    """Per-node feature vectors, shape ``(M, N)``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] < 1:
            raise InputError(f"feature map must be M x N with N >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("feature map contains non-finite values")
        object.__setattr__(self, "vectors", v)

    @property
    def M(self):
        return self.vectors.shape[0]

    @property
    def N(self):
        return self.vectors.shape[1]


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph stored as an edge list with ``i < j``.

    ``m`` is the lattice side for patch graphs, or ``None`` for graphs that
    are not laid out on a lattice (used in tests).
    """

    M: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    m: int = None
    _adj: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=np.int64)
        c = np.asarray(self.cols, dtype=np.int64)
        w = np.asarray(self.weights, dtype=np.float64)
        if not (r.shape == c.shape == w.shape) or r.ndim != 1:
            raise InputError("edge arrays must be 1-D and of equal length")
        if r.size and (np.any(r >= c) or r.min() < 0 or c.max() >= self.M):
            raise InputError("edges must satisfy 0 <= i < j < M")
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "cols", c)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_edges(cls, M, edges, m=None):
        """Build from ``(i, j, w)`` triples; pairs are reordered so ``i < j``."""
        if not edges:
            return cls(M, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0), m)
        arr = np.array(edges, dtype=np.float64)
        i = arr[:, 0].astype(np.int64)
        j = arr[:, 1].astype(np.int64)
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        return cls(M, lo, hi, arr[:, 2], m)

    @property
    def n_edges(self):
        return self.rows.size

    @property
    def edges(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.weights.tolist()))

    def adjacency(self):
        """Symmetric sparse adjacency matrix ``W`` (CSR), cached."""
        if not self._adj:
            W = sp.coo_matrix(
                (np.concatenate([self.weights, self.weights]),
                 (np.concatenate([self.rows, self.cols]), np.concatenate([self.cols, self.rows]))),
                shape=(self.M, self.M),
            ).tocsr()
            self._adj.append(W)
        return self._adj[0]

    def degrees(self):
        d = np.zeros(self.M)
        np.add.at(d, self.rows, self.weights)
        np.add.at(d, self.cols, self.weights)
        return d

    def subgraph(self, mask):
        """Graph on the same nodes keeping only edges where ``mask`` is true."""
        mask = np.asarray(mask, dtype=bool)
        return WeightedGraph(self.M, self.rows[mask], self.cols[mask], self.weights[mask], self.m)


@dataclass(frozen=True)
class Laplacian:
    kind: str
    matrix: sp.csr_matrix
    degree: np.ndarray

    @property
    def M(self):
        return self.matrix.shape[0]

    def dense(self):
        return self.matrix.toarray()


def _padded_size(n, m):
    return m * math.ceil(n / m)


def partition_into_patches(img, m):
    """Split ``img`` into non-overlapping ``m x m`` patches.

    The image is reflect-padded on the bottom and right up to the next
    multiple of ``m``. Patches are returned in row-major grid order; use
    :func:`reassemble_patches` with the original shape to undo the split.

    Parameters
    ----------
    img : array_like, shape (H, W)
    m : int
        Patch side length, at least 2.

    Returns
    -------
    list of Patch
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise InputError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InputError("image contains non-finite values")
    if m < 2:
        raise ConfigError(f"patch side m must be >= 2, got {m}")
    H, W = img.shape
    if m > 4 * max(H, W):
        raise ConfigError(f"patch side {m} exceeds 4x the largest image dimension ({max(H, W)})")
    Hp, Wp = _padded_size(H, m), _padded_size(W, m)
    mode = "reflect" if min(H, W) > 1 else "symmetric"
    padded = np.pad(img, ((0, Hp - H), (0, Wp - W)), mode=mode)
    patches = []
    for r in range(0, Hp, m):
        for c in range(0, Wp, m):
            patches.append(Patch(padded[r:r + m, c:c + m].copy(), (r, c), len(patches)))
    return patches


def reassemble_patches(patches, shape):
    """Place patches at their origins and crop to ``shape = (H, W)``."""
    H, W = shape
    if not patches:
        raise InputError("no patches to reassemble")
    m = patches[0].m
    out = np.empty((_padded_size(H, m), _padded_size(W, m)))
    for p in patches:
        r, c = p.origin
        out[r:r + m, c:c + m] = p.values
    return out[:H, :W].copy()


def compute_features(patch, provider="intensity+coords", path=None):
    """Per-pixel feature vectors for one patch.

    ``intensity`` gives ``N = 1`` (pixel value / 255, clipped to [0, 1]).
    ``intensity+coords`` appends ``row / m`` and ``col / m`` for ``N = 3``.
    ``external`` loads an AGFF file from ``path`` whose row count must be
    ``m * m``.
    """
    m = patch.m
    if provider == "external":
        if path is None:
            raise InputError("external feature provider needs a feature file path")
        return FeatureMap(io.read_agff(path, expected_m=m * m))
    if provider not in PROVIDERS:
        raise ConfigError(f"unknown feature provider {provider!r}; choose from {PROVIDERS}")
    intensity = np.clip(patch.values.reshape(-1) / 255.0, 0.0, 1.0)
    if provider == "intensity":
        return FeatureMap(intensity[:, None])
    rr, cc = np.divmod(np.arange(m * m), m)
    return FeatureMap(np.column_stack([intensity, rr / m, cc / m]))


def edge_weight(f_i, f_j, eps):
    """Gaussian kernel of the squared feature distance, floored at ``W_MIN``."""
    if not eps > 0:
        raise ConfigError(f"kernel bandwidth eps must be > 0, got {eps}")
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != f_j.shape:
        raise InputError(f"feature vectors differ in shape: {f_i.shape} vs {f_j.shape}")
    diff = f_i - f_j
    return max(math.exp(-float(diff @ diff) / (2.0 * eps * eps)), W_MIN)


def _edge_weights(vectors, i, j, eps):
    diff = vectors[i] - vectors[j]
    dist = np.einsum("ij,ij->i", diff, diff)
    return np.maximum(np.exp(-dist / (2.0 * eps * eps)), W_MIN)


def lattice_edges(m, offsets=HV_OFFSETS + DIAG_OFFSETS):
    """Node pairs ``(i, j)``, ``i < j``, of the ``m x m`` lattice for the given offsets."""
    rr, cc = np.divmod(np.arange(m * m), m)
    rows, cols = [], []
    for dr, dc in offsets:
        r2, c2 = rr + dr, cc + dc
        ok = (r2 >= 0) & (r2 < m) & (c2 >= 0) & (c2 < m)
        a = (rr * m + cc)[ok]
        b = (r2 * m + c2)[ok]
        rows.append(np.minimum(a, b))
        cols.append(np.maximum(a, b))
    return np.concatenate(rows), np.concatenate(cols)


def build_8connected_graph(fm, m, eps):
    """8-connected lattice graph weighted by feature similarity.

    Has ``4m^2 - 6m + 2`` edges: horizontal and vertical first, then the two
    diagonal directions.
    """
    if not eps > 0:
        raise ConfigError(f"kernel bandwidth eps must be > 0, got {eps}")
    if fm.M != m * m:
        raise InputError(f"feature map has {fm.M} rows, lattice needs {m * m}")
    i, j = lattice_edges(m)
    return WeightedGraph(m * m, i, j, _edge_weights(fm.vectors, i, j, eps), m)


def laplacian(g, kind="combinatorial"):
    """Combinatorial ``D - W`` or symmetric-normalized ``I - D^-1/2 W D^-1/2``."""
    W = g.adjacency()
    d = np.asarray(W.sum(axis=1)).ravel()
    if kind == "combinatorial":
        L = sp.diags(d) - W
    elif kind == "normalized":
        if np.any(d <= 0):
            bad = int(np.flatnonzero(d <= 0)[0])
            raise NumericError(f"node {bad} has zero degree; normalized Laplacian undefined")
        s = 1.0 / np.sqrt(d)
        W_n = W.tocoo()
        # s_i * s_j is commutative, so the result is bitwise symmetric
        W_n = sp.coo_matrix((W_n.data * (s[W_n.row] * s[W_n.col]), (W_n.row, W_n.col)), shape=W.shape)
        L = sp.identity(g.M, format="csr") - W_n.tocsr()
    else:
        raise ConfigError(f"unknown Laplacian kind {kind!r}")
    return Laplacian(kind, sp.csr_matrix(L), d)


def gershgorin_bound(L):
    """Gershgorin upper bound on the largest eigenvalue of ``L``.

    For the combinatorial Laplacian this is ``2 * max degree``. For the
    normalized Laplacian the discs of the similar matrix ``I - D^-1 W`` all
    lie in [0, 2], so the bound is the smaller of 2 and the row-wise bound.
    """
    A = L.matrix
    diag = A.diagonal()
    off = abs(A - sp.diags(diag)).sum(axis=1)
    bound = float(np.max(diag + np.asarray(off).ravel())) if A.shape[0] else 0.0
    if L.kind == "normalized":
        bound = min(bound, 2.0)
    return bound
