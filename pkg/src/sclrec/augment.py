"""Stochastic graph augmentations (node drop, edge drop, node replication) and
the top-N cosine similarity index that drives replication and positive labeling."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from sclrec.dataset import BipartiteGraph, build_graph

SIM_MAGIC = b"SCLSIM1\0"


@dataclass(frozen=True)
class AugmentationConfig:
    rho1: float = 0.1   # node drop probability
    rho2: float = 0.1   # edge drop probability
    rho3: float = 0.1   # node replication probability
    k_segments: int = 4
    top_n: int = 10
    method: str = "NR"  # one of ND, ED, NR

    def __post_init__(self):
        for name in ("rho1", "rho2", "rho3"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.k_segments < 1:
            raise ValueError("k_segments must be >= 1")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if self.method not in ("ND", "ED", "NR"):
            raise ValueError(f"unknown augmentation method {self.method!r}")


@dataclass(frozen=True)
class AugmentedView:
    """A perturbed copy of a graph. Node id space matches the source; dropped
    nodes keep their ids and simply lose all incident edges."""

    graph: BipartiteGraph
    dropped_nodes: tuple = ()            # stacked node ids (ND)
    dropped_edge_indices: tuple = ()     # indices into the source edge tuple (ED)
    replications: tuple = ()             # (node, removed_edges, added_edges) triples (NR)


@dataclass(frozen=True)
class SimilarityIndex:
    """Per-node top-N same-side neighbors by cosine over binary interaction rows.

    Each entry is a tuple of (node_id, cosine) sorted by cosine descending,
    ties broken by ascending node id; a node never lists itself.
    """

    user_neighbors: tuple  # tuple (per user) of tuples of (user_id, cosine)
    item_neighbors: tuple
    top_n: int = field(default=0, compare=False)


def _interaction_matrix(graph: BipartiteGraph) -> sp.csr_matrix:
    if graph.edges:
        rows = np.fromiter((u for u, _ in graph.edges), dtype=np.int64, count=len(graph.edges))
        cols = np.fromiter((i for _, i in graph.edges), dtype=np.int64, count=len(graph.edges))
        data = np.ones(len(graph.edges))
        return sp.csr_matrix((data, (rows, cols)), shape=(graph.num_users, graph.num_items))
    return sp.csr_matrix((graph.num_users, graph.num_items), dtype=np.float64)


def _top_n_neighbors(mat: sp.csr_matrix, top_n: int):
    """Top-N cosine neighbors per row of a binary matrix; self excluded.

    cosine(a, b) = |N(a) ∩ N(b)| / (sqrt(deg a) * sqrt(deg b)); degree-0 rows
    get an empty list and score 0 against everyone else.
    """
    n = mat.shape[0]
    counts = (mat @ mat.T).toarray()
    deg = np.asarray(mat.sum(axis=1)).ravel()
    inv = np.zeros(n)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    scores = counts * inv[:, None] * inv[None, :]
    out = []
    ids = np.arange(n)
    for a in range(n):
        if deg[a] == 0:
            out.append(())
            continue
        row = scores[a].copy()
        row[a] = -np.inf  # self excluded
        # descending score, ties by ascending id
        order = np.lexsort((ids, -row))[: min(top_n, n - 1)]
        out.append(tuple((int(b), float(scores[a, b])) for b in order))
    return tuple(out)


def compute_similarity(graph: BipartiteGraph, top_n: int) -> SimilarityIndex:
    """User-side and item-side cosine similarity, each side computed separately."""
    if graph.num_users < 2 or graph.num_items < 2:
        raise ValueError("similarity needs at least 2 users and 2 items")
    mat = _interaction_matrix(graph)
    return SimilarityIndex(
        user_neighbors=_top_n_neighbors(mat, top_n),
        item_neighbors=_top_n_neighbors(mat.T.tocsr(), top_n),
        top_n=top_n,
    )


def node_drop(graph: BipartiteGraph, rho1: float, rng: np.random.Generator) -> AugmentedView:
    """Drop each node independently with probability rho1 along with incident edges."""
    if graph.num_nodes == 0:
        raise ValueError("empty graph")
    mask = rng.random(graph.num_nodes) < rho1
    dropped = np.flatnonzero(mask)
    dropped_set = set(int(x) for x in dropped)
    kept = [e for e in graph.edges
            if e[0] not in dropped_set and graph.num_users + e[1] not in dropped_set]
    g = build_graph(kept, graph.num_users, graph.num_items)
    return AugmentedView(graph=g, dropped_nodes=tuple(int(x) for x in dropped))


def edge_drop(graph: BipartiteGraph, rho2: float, rng: np.random.Generator) -> AugmentedView:
    """Drop each edge independently with probability rho2; node set untouched."""
    if graph.num_nodes == 0:
        raise ValueError("empty graph")
    mask = rng.random(len(graph.edges)) < rho2
    kept = [e for e, m in zip(graph.edges, mask) if not m]
    g = build_graph(kept, graph.num_users, graph.num_items)
    return AugmentedView(graph=g, dropped_edge_indices=tuple(int(x) for x in np.flatnonzero(mask)))


def node_replication(graph: BipartiteGraph, rho3: float, k_segments: int,
                     sim_index: SimilarityIndex, rng: np.random.Generator) -> AugmentedView:
    """Replace one interaction segment of each selected node with edges drawn
    from a similar node.

    For a selected node: its interactions (ordered by counterpart id ascending)
    are cut into k near-equal contiguous segments; one segment's edges are
    removed; a donor is drawn uniformly from the node's top-N neighbors; up to
    |segment| of the donor's interactions not already on the node are added.
    All decisions are made against the source edge set; the view's edges are
    (source - removed) ∪ added.
    """
    if graph.num_nodes == 0:
        raise ValueError("empty graph")
    user_items = [[] for _ in range(graph.num_users)]
    item_users = [[] for _ in range(graph.num_items)]
    for u, i in graph.edges:
        user_items[u].append(i)
        item_users[i].append(u)

    selected = rng.random(graph.num_nodes) < rho3
    removed, added, provenance = set(), set(), []

    def replicate(node, partners, neighbors, as_user):
        if not partners or not neighbors:
            return
        k = min(k_segments, len(partners))
        segments = np.array_split(np.array(sorted(partners)), k)
        seg = segments[int(rng.integers(k))]
        donor = neighbors[int(rng.integers(len(neighbors)))][0]
        donor_partners = user_items[donor] if as_user else item_users[donor]
        novel = sorted(set(donor_partners) - set(partners))
        n_add = min(len(seg), len(novel))
        picks = rng.choice(len(novel), size=n_add, replace=False) if n_add else []
        if as_user:
            rem = {(node, int(p)) for p in seg}
            add = {(node, novel[int(p)]) for p in picks}
        else:
            rem = {(int(p), node) for p in seg}
            add = {(novel[int(p)], node) for p in picks}
        removed.update(rem)
        added.update(add)
        provenance.append((int(node) if as_user else graph.num_users + int(node),
                           tuple(sorted(rem)), tuple(sorted(add))))

    for u in range(graph.num_users):
        if selected[u]:
            replicate(u, user_items[u], sim_index.user_neighbors[u], as_user=True)
    for i in range(graph.num_items):
        if selected[graph.num_users + i]:
            replicate(i, item_users[i], sim_index.item_neighbors[i], as_user=False)

    new_edges = (set(graph.edges) - removed) | added
    g = build_graph(new_edges, graph.num_users, graph.num_items)
    return AugmentedView(graph=g, replications=tuple(provenance))


def make_views(graph: BipartiteGraph, config: AugmentationConfig,
               sim_index, rng: np.random.Generator):
    """Two independent augmented views with the configured method."""
    def one():
        if config.method == "ND":
            return node_drop(graph, config.rho1, rng)
        if config.method == "ED":
            return edge_drop(graph, config.rho2, rng)
        return node_replication(graph, config.rho3, config.k_segments, sim_index, rng)
    return one(), one()


def save_similarity(index: SimilarityIndex, path) -> None:
    """Binary format: magic, user/item counts, then per-node neighbor lists as
    (count: u32 LE, then pairs of id: u32 LE, score: f32 LE)."""
    with open(path, "wb") as fh:
        fh.write(SIM_MAGIC)
        fh.write(struct.pack("<II", len(index.user_neighbors), len(index.item_neighbors)))
        for side in (index.user_neighbors, index.item_neighbors):
            for neighbors in side:
                fh.write(struct.pack("<I", len(neighbors)))
                for nid, score in neighbors:
                    fh.write(struct.pack("<If", nid, score))


def load_similarity(path) -> SimilarityIndex:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != SIM_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        n_users, n_items = struct.unpack("<II", fh.read(8))
        sides = []
        for count in (n_users, n_items):
            side = []
            for _ in range(count):
                (n,) = struct.unpack("<I", fh.read(4))
                side.append(tuple(struct.unpack("<If", fh.read(8)) for _ in range(n)))
            sides.append(tuple(side))
    return SimilarityIndex(user_neighbors=sides[0], item_neighbors=sides[1])
