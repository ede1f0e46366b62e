"""Exact bipartite split of 8-connected lattice graphs.

Horizontal/vertical edges are bipartite under the checkerboard parity
``(row + col) mod 2``; diagonal edges always change column parity, so
``col mod 2`` two-colors them.
"""

from dataclasses import dataclass

import numpy as np

from agf.errors import ConfigError, InputError, MalformedGraphError


@dataclass(frozen=True)
class BipartitePair:
    hv: object
    diag: object
    coloring_hv: np.ndarray
    coloring_diag: np.ndarray


def checkerboard_coloring(m, which):
    """Partite label (0 or 1) per node of the ``m x m`` lattice, row-major."""
    if m < 2:
        raise ConfigError(f"lattice side must be >= 2, got {m}")
    rr, cc = np.divmod(np.arange(m * m), m)
    if which == "hv":
        return ((rr + cc) % 2).astype(np.int8)
    if which == "diag":
        return (cc % 2).astype(np.int8)
    raise ConfigError(f"unknown coloring {which!r}; expected 'hv' or 'diag'")


def verify_bipartite(g, coloring):
    """True iff every edge of ``g`` joins nodes with different labels."""
    coloring = np.asarray(coloring)
    if coloring.shape != (g.M,):
        raise InputError(f"coloring has {coloring.size} labels for {g.M} nodes")
    return bool(np.all(coloring[g.rows] != coloring[g.cols]))


def split_hv_diag(g, m):
    """Partition the edges of an 8-connected lattice graph by direction.

    Weights are carried over unchanged. Raises ``MalformedGraphError`` if
    any edge is not a lattice-neighbor pair.
    """
    if g.M != m * m:
        raise MalformedGraphError(f"graph has {g.M} nodes, lattice side {m} needs {m * m}")
    ri, ci = np.divmod(g.rows, m)
    rj, cj = np.divmod(g.cols, m)
    dr, dc = np.abs(rj - ri), np.abs(cj - ci)
    hv = (dr + dc) == 1
    diag = (dr == 1) & (dc == 1)
    if not np.all(hv | diag):
        k = int(np.flatnonzero(~(hv | diag))[0])
        raise MalformedGraphError(
            f"edge ({g.rows[k]}, {g.cols[k]}) is not an 8-neighbor lattice edge for m={m}"
        )
    pair = BipartitePair(
        hv=g.subgraph(hv),
        diag=g.subgraph(diag),
        coloring_hv=checkerboard_coloring(m, "hv"),
        coloring_diag=checkerboard_coloring(m, "diag"),
    )
    if not (verify_bipartite(pair.hv, pair.coloring_hv) and verify_bipartite(pair.diag, pair.coloring_diag)):
        raise MalformedGraphError("lattice split produced a non-bipartite subgraph")
    return pair
