"""Analytical graph-filter denoising on 8-connected pixel graphs.

The package builds feature-weighted patch graphs, splits them into two
bipartite subgraphs, and filters each with a biorthogonal two-channel graph
wavelet used as a fixed low-pass filter. A graph-Laplacian-regularized (GLR)
conjugate-gradient denoiser is included as a baseline.
"""

from agf.errors import (
    AgfError,
    ConfigError,
    ConvergenceError,
    DesignError,
    InputError,
    IntervalError,
    MalformedGraphError,
    NumericError,
    PreconditionError,
)
from agf.pixelgraph import (
    FeatureMap,
    Laplacian,
    Patch,
    WeightedGraph,
    build_8connected_graph,
    compute_features,
    edge_weight,
    gershgorin_bound,
    laplacian,
    partition_into_patches,
    reassemble_patches,
)
from agf.bipartite import BipartitePair, checkerboard_coloring, split_hv_diag, verify_bipartite
from agf.graphbio import (
    FilterBank,
    PolynomialKernel,
    SpectralDecomposition,
    analyze,
    apply_chebyshev,
    apply_exact,
    design_filterbank,
    eigendecompose,
    lowpass_filter,
    spectral_fold_check,
    synthesize,
)
from agf.pipeline import AgfConfig, NoiseSpec, add_awgn, agf_block, denoise, mse, prefilter, psnr, relu
from agf.glr import GlrConfig, condition_bound, glr_denoise, glr_solve

__version__ = "0.1.0"
