"""Synthetic benchmark generators and file-based graph loaders.

Two generator families:

* chains — directed paths whose class is encoded only in the starting
  node's features, so classifying the far end requires passing information
  the full length of the chain.
* color counting — undirected chains where a fraction of nodes carry a
  one-hot color; every node is labeled with the chain's (strict) majority
  color, which requires aggregating colors from the whole chain.

Both are pure functions of (spec, seed). Datasets persist as an edge list
(``src<TAB>dst``), a features CSV (row per node, transposed to
column-per-node on load), a labels CSV (``node_id,label``), and a JSON
sidecar with the split masks and a spec echo.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataFormatError, GenerationError
from .graph import Graph, build_graph

EDGE_FILE = "edges.tsv"
FEATURE_FILE = "features.csv"
LABEL_FILE = "labels.csv"
SIDECAR_FILE = "masks.json"


@dataclass(frozen=True)
class Dataset:
    """A node-task dataset: graph plus disjoint train/val/test node masks."""

    graph: Graph
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    spec_echo: dict


@dataclass(frozen=True)
class GraphDataset:
    """A graph-task dataset: individual graphs, one label each, split by graph."""

    graphs: list[Graph]
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray


@dataclass(frozen=True)
class ChainsSpec:
    num_classes: int = 2
    chains_per_class: int = 20
    length: int = 10
    seed: int = 0

    def __post_init__(self):
        if min(self.num_classes, self.chains_per_class, self.length) < 1:
            raise ValueError("chain spec counts must all be >= 1")


@dataclass(frozen=True)
class ColorCountingSpec:
    num_colors: int = 3
    num_chains: int = 30
    length: int = 30
    colored_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.num_colors < 2:
            raise ValueError("need at least two colors")
        if self.num_chains < 1 or self.length < 1:
            raise ValueError("chain counts must be >= 1")
        if not 0.0 < self.colored_fraction <= 1.0:
            raise ValueError("colored_fraction must lie in (0, 1]")


def _split_masks(n: int, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random 5% / 10% / 85% node split."""
    order = rng.permutation(n)
    n_train = int(round(0.05 * n))
    n_val = int(round(0.10 * n))
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    train[order[:n_train]] = True
    val[order[n_train:n_train + n_val]] = True
    test[order[n_train + n_val:]] = True
    return train, val, test


def _chain_edges(num_chains: int, length: int) -> tuple[np.ndarray, np.ndarray]:
    starts = np.arange(num_chains) * length
    src = np.concatenate([s + np.arange(length - 1) for s in starts]) \
        if length > 1 else np.empty(0, dtype=np.int64)
    return src.astype(np.int64), (src + 1).astype(np.int64)


def gen_chains(spec: ChainsSpec) -> Dataset:
    """Directed chains; the class one-hot sits only on each chain's start node."""
    rng = np.random.default_rng(spec.seed)
    num_chains = spec.num_classes * spec.chains_per_class
    n = num_chains * spec.length
    src, dst = _chain_edges(num_chains, spec.length)
    adjacency = sp.csr_array((np.ones(len(src)), (src, dst)), shape=(n, n))
    chain_class = np.repeat(np.arange(spec.num_classes), spec.chains_per_class)
    features = np.zeros((spec.num_classes, n))
    starts = np.arange(num_chains) * spec.length
    features[chain_class, starts] = 1.0
    labels = np.repeat(chain_class, spec.length)
    graph = build_graph(adjacency, features, labels, directed=True, self_loops=False)
    train, val, test = _split_masks(n, rng)
    return Dataset(graph=graph, train_mask=train, val_mask=val, test_mask=test,
                   spec_echo={"kind": "chains", **asdict(spec)})


def gen_color_counting(spec: ColorCountingSpec, max_resamples: int = 1000) -> Dataset:
    """Undirected chains labeled with each chain's strict-majority color."""
    rng = np.random.default_rng(spec.seed)
    n = spec.num_chains * spec.length
    src, dst = _chain_edges(spec.num_chains, spec.length)
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    adjacency = sp.csr_array((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    num_colored = max(1, int(round(spec.colored_fraction * spec.length)))
    features = np.zeros((spec.num_colors, n))
    labels = np.empty(n, dtype=np.int64)
    for c in range(spec.num_chains):
        start = c * spec.length
        positions = start + rng.choice(spec.length, size=num_colored, replace=False)
        for attempt in range(max_resamples):
            colors = rng.integers(spec.num_colors, size=num_colored)
            counts = np.bincount(colors, minlength=spec.num_colors)
            top = counts.max()
            if np.sum(counts == top) == 1:
                break
        else:
            raise GenerationError(
                f"no strict majority color for chain {c} after {max_resamples} resamples")
        features[:, positions] = 0.0
        features[colors, positions] = 1.0
        labels[start:start + spec.length] = int(np.argmax(counts))
    graph = build_graph(adjacency, features, labels, directed=False, self_loops=True)
    train, val, test = _split_masks(n, rng)
    return Dataset(graph=graph, train_mask=train, val_mask=val, test_mask=test,
                   spec_echo={"kind": "colors", **asdict(spec)})


# -- persistence -----------------------------------------------------------


def save_dataset(ds: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = ds.graph
    coo = g.adjacency.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(out / EDGE_FILE, "w", encoding="utf-8") as fh:
        for r, c in zip(coo.row[order], coo.col[order]):
            fh.write(f"{r}\t{c}\n")
    with open(out / FEATURE_FILE, "w", encoding="utf-8") as fh:
        for col in g.features.T:
            fh.write(",".join(repr(float(v)) for v in col) + "\n")
    with open(out / LABEL_FILE, "w", encoding="utf-8") as fh:
        for i, label in enumerate(g.labels):
            fh.write(f"{i},{int(label)}\n")
    sidecar = {
        "directed": g.directed,
        "spec": ds.spec_echo,
        "train": np.flatnonzero(ds.train_mask).tolist(),
        "val": np.flatnonzero(ds.val_mask).tolist(),
        "test": np.flatnonzero(ds.test_mask).tolist(),
    }
    with open(out / SIDECAR_FILE, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")


def load_dataset(in_dir) -> Dataset:
    src = Path(in_dir)
    sidecar_path = src / SIDECAR_FILE
    try:
        with open(sidecar_path, encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{sidecar_path}: invalid JSON sidecar: {exc}") from exc
    graph = load_graph(src / EDGE_FILE, src / FEATURE_FILE, src / LABEL_FILE,
                       directed=bool(sidecar["directed"]))
    n = graph.n

    def mask_of(key):
        mask = np.zeros(n, dtype=bool)
        idx = np.asarray(sidecar[key], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DataFormatError(f"{sidecar_path}: {key} mask index out of range")
        mask[idx] = True
        return mask

    return Dataset(graph=graph, train_mask=mask_of("train"), val_mask=mask_of("val"),
                   test_mask=mask_of("test"), spec_echo=sidecar.get("spec", {}))


def load_graph(edge_path, feature_path, label_path=None, directed: bool = False,
               multilabel: bool = False) -> Graph:
    """Load a graph from an edge list, a features CSV, and an optional labels CSV.

    Duplicate edge lines are deduplicated; node ids must stay inside the
    feature-file row count. Parse failures carry the offending line number.
    """
    features_rows = []
    with open(feature_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise DataFormatError(f"{feature_path}:{lineno}: bad feature value") from exc
            if features_rows and len(row) != len(features_rows[0]):
                raise DataFormatError(
                    f"{feature_path}:{lineno}: expected {len(features_rows[0])} columns")
            features_rows.append(row)
    if not features_rows:
        raise DataFormatError(f"{feature_path}: no feature rows")
    features = np.asarray(features_rows).T  # column per node
    n = features.shape[1]

    src, dst = [], []
    with open(edge_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError(f"{edge_path}:{lineno}: expected 'src<TAB>dst'")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise DataFormatError(f"{edge_path}:{lineno}: non-integer node id") from exc
            if not (0 <= a < n and 0 <= b < n):
                raise DataFormatError(
                    f"{edge_path}:{lineno}: node id out of range for {n} nodes")
            src.append(a)
            dst.append(b)
    data = np.ones(len(src))
    adjacency = sp.csr_array((data, (np.asarray(src, dtype=np.int64),
                                     np.asarray(dst, dtype=np.int64))), shape=(n, n))
    adjacency.data[:] = 1.0  # duplicate lines collapse to a single 0/1 edge
    if not directed:
        adjacency = adjacency.maximum(adjacency.T)

    labels = None
    if label_path is not None:
        labels = _load_labels(label_path, n, multilabel)
    return build_graph(adjacency, features, labels, directed=directed)


def _load_labels(label_path, n, multilabel):
    if multilabel:
        rows = []
        with open(label_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append([float(tok) for tok in line.split(",")])
                except ValueError as exc:
                    raise DataFormatError(f"{label_path}:{lineno}: bad label value") from exc
        if len(rows) != n:
            raise DataFormatError(f"{label_path}: expected {n} multi-hot rows, got {len(rows)}")
        return np.asarray(rows).T
    labels = np.full(n, -1, dtype=np.int64)
    with open(label_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataFormatError(f"{label_path}:{lineno}: expected 'node_id,label'")
            try:
                node, label = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise DataFormatError(f"{label_path}:{lineno}: non-integer field") from exc
            if not 0 <= node < n:
                raise DataFormatError(f"{label_path}:{lineno}: node id out of range")
            labels[node] = label
    if np.any(labels < 0):
        missing = int(np.flatnonzero(labels < 0)[0])
        raise DataFormatError(f"{label_path}: node {missing} has no label")
    return labels
