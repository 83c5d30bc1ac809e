import numpy as np
import scipy.sparse as sp

from msignn import build_graph, normalize_adjacency
from msignn.numerics import as_csr


def random_undirected_graph(rng, n, density=0.3, feat_dim=3, num_classes=2):
    """Random symmetric 0/1 graph with features and int labels."""
    a = (rng.random((n, n)) < density).astype(float)
    a = np.maximum(a, a.T)
    np.fill_diagonal(a, 0.0)
    features = rng.standard_normal((feat_dim, n))
    labels = rng.integers(0, num_classes, n)
    return build_graph(sp.csr_array(a), features, labels, directed=False)


def random_normalized_csr(rng, n, density=0.3):
    """Symmetric-normalized random adjacency (spectral norm <= 1)."""
    a = (rng.random((n, n)) < density).astype(float)
    a = np.maximum(a, a.T)
    np.fill_diagonal(a, 0.0)
    return normalize_adjacency(as_csr(sp.csr_array(a)), directed=False, self_loops=True)


def power_iteration_norm(dense, iters=200):
    """Spectral norm via power iteration on A^T A."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dense.shape[1])
    v /= np.linalg.norm(v)
    ata = dense.T @ dense
    for _ in range(iters):
        w = ata @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
    return float(np.sqrt(v @ ata @ v))
