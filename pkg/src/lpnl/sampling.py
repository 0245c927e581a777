"""Two-stage neighborhood sampling: budgeted layer growth, then PPR ranking.

Stage 1 grows an ego-subgraph around a center node, hop by hop. Within
each hop the candidate frontier is grouped by node type and at most
``layer_budget`` nodes per type are drawn without replacement, with
probability proportional to squared degree normalized within the type
group. Normalizing within type keeps low-degree node types from being
drowned out by high-degree ones.

Stage 2 scores every sampled node by personalized PageRank restricted
to the subgraph, walking edges in both directions, and keeps the top-k
as the anchor list that later turns structure into text.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .graph import EdgeMask, HetGraph, NodeType, UnknownNodeError

__all__ = [
    "SamplerConfig",
    "EgoSubgraph",
    "AnchorList",
    "layer_sampling_probs",
    "sample_subgraph",
    "ppr_exact",
    "ppr_approx",
    "top_k_anchors",
]

PPR_MODES = ("exact_power_iteration", "approximate_push")


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for both sampling stages.

    ``hops`` is capped at 3: beyond that the extra context stops paying
    for its tokens. ``layer_budget`` bounds sampled nodes per node type
    per hop so prompt length stays controllable before ranking even runs.
    """

    hops: int = 2
    layer_budget: int = 16
    anchor_k: int = 50
    alpha: float = 0.15
    ppr_mode: str = "exact_power_iteration"
    push_tolerance: float = 1e-4
    rng_seed: int = 0

    def __post_init__(self):
        if self.hops not in (1, 2, 3):
            raise ValueError(f"hops must be 1, 2 or 3, got {self.hops}")
        if self.anchor_k < 1:
            raise ValueError("anchor_k must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.layer_budget < 1:
            raise ValueError("layer_budget must be >= 1")
        if self.ppr_mode not in PPR_MODES:
            raise ValueError(f"ppr_mode must be one of {PPR_MODES}")
        if self.push_tolerance <= 0:
            raise ValueError("push_tolerance must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")

    def with_seed(self, seed: int) -> "SamplerConfig":
        return replace(self, rng_seed=seed)


@dataclass(frozen=True)
class EgoSubgraph:
    """A sampled h-hop neighborhood: layered nodes plus their induced edges.

    Layers are disjoint, exclude the center, and every layer-l node is
    adjacent to some node of layer l-1 (layer 0 being the center).
    ``induced_edges`` holds every graph edge among the sampled vertex set.
    """

    center: int
    layers: tuple[tuple[int, ...], ...]
    induced_edges: tuple[tuple[int, int, str], ...]

    @property
    def nodes(self) -> tuple[int, ...]:
        out = [self.center]
        for layer in self.layers:
            out.extend(layer)
        return tuple(out)

    def hop_of(self, v: int) -> int:
        if v == self.center:
            return 0
        for hop, layer in enumerate(self.layers, start=1):
            if v in layer:
                return hop
        raise UnknownNodeError(v)

    def adjacency(self) -> tuple[list[int], list[list[int]]]:
        """Undirected adjacency over the sampled vertex set.

        Returns (nodes, neighbor lists) with neighbor lists indexed the
        same way as ``nodes``. Edges contribute in both directions; walks
        over the subgraph ignore orientation.
        """
        order = list(self.nodes)
        index = {v: i for i, v in enumerate(order)}
        adj: list[list[int]] = [[] for _ in order]
        for u, v, _ in self.induced_edges:
            adj[index[u]].append(index[v])
            adj[index[v]].append(index[u])
        for lst in adj:
            lst.sort()
        return order, adj


@dataclass(frozen=True)
class AnchorList:
    """Top-k subgraph nodes for a center, ranked by PPR score.

    ``center_score`` is the PPR mass retained at the center itself; it is
    not an entry but is kept as a deterministic tie-break key for rankings.
    """

    center: int
    entries: tuple[tuple[int, float], ...]
    center_score: float = 0.0

    def ids(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def layer_sampling_probs(
    g: HetGraph,
    frontier: Sequence[int],
    node_type: NodeType | str,
    mask: EdgeMask | None = None,
) -> dict[int, float]:
    """Selection probabilities for one (type, layer) frontier group.

    Probability is squared degree over the group's summed squared degrees.
    An all-zero-degree group degenerates to 0/0 and falls back to uniform.
    """
    type_name = node_type.name if isinstance(node_type, NodeType) else node_type
    members = sorted(set(int(v) for v in frontier))
    for v in members:
        if g.type_of(v).name != type_name:
            raise ValueError(f"frontier node {v} is not of type {type_name!r}")
    if not members:
        return {}
    degs = g.degrees(members, mask).astype(np.float64)
    weights = degs * degs
    total = weights.sum()
    if total <= 0.0:
        probs = np.full(len(members), 1.0 / len(members))
    else:
        probs = weights / total
    return {v: float(p) for v, p in zip(members, probs)}


def _draw_without_replacement(
    rng: np.random.Generator, members: list[int], probs: np.ndarray, take: int
) -> list[int]:
    if take >= len(members):
        return list(members)
    nonzero = int(np.count_nonzero(probs))
    if take <= nonzero:
        picked = rng.choice(len(members), size=take, replace=False, p=probs)
        return [members[i] for i in picked]
    # Degenerate group: fewer positive-probability nodes than the budget.
    # Take every positive-weight node, fill the rest uniformly.
    positive = [i for i in range(len(members)) if probs[i] > 0]
    zero = [i for i in range(len(members)) if probs[i] == 0]
    fill = rng.choice(len(zero), size=take - nonzero, replace=False)
    picked = positive + [zero[i] for i in fill]
    return [members[i] for i in sorted(picked)]


def sample_subgraph(
    g: HetGraph,
    center: int,
    cfg: SamplerConfig,
    mask: EdgeMask | None = None,
) -> EgoSubgraph:
    """Stage-1 sampling: grow a layered subgraph around ``center``.

    Deterministic for a fixed (graph, center, config, mask): the RNG
    stream is derived from (rng_seed, center), so sampling distinct
    centers in parallel stays reproducible.
    """
    g._check_node(center)
    rng = np.random.default_rng([cfg.rng_seed, center])
    visited: set[int] = {center}
    layers: list[tuple[int, ...]] = []
    frontier = [center]
    for _ in range(cfg.hops):
        candidates = sorted(
            {w for u in frontier for w in g.all_neighbors(u, mask)} - visited
        )
        if not candidates:
            layers.append(())
            frontier = []
            continue
        by_type: dict[str, list[int]] = {}
        for v in candidates:
            by_type.setdefault(g.type_of(v).name, []).append(v)
        layer: list[int] = []
        for type_name in sorted(by_type):
            members = by_type[type_name]
            prob_map = layer_sampling_probs(g, members, type_name, mask)
            probs = np.array([prob_map[v] for v in members])
            layer.extend(
                _draw_without_replacement(rng, members, probs, cfg.layer_budget)
            )
        layer.sort()
        layers.append(tuple(layer))
        visited.update(layer)
        frontier = layer
    induced = tuple(g.induced_edges(visited, mask))
    return EgoSubgraph(center=center, layers=tuple(layers), induced_edges=induced)


def _walk_matrix(sub: EgoSubgraph, center: int) -> tuple[list[int], np.ndarray]:
    """Column-stochastic transition matrix of the subgraph walk.

    Column u spreads mass equally over u's subgraph neighbors; a node with
    no subgraph edges sends its mass back to the center so the stationary
    vector stays a proper distribution.
    """
    order, adj = sub.adjacency()
    index = {v: i for i, v in enumerate(order)}
    if center not in index:
        raise UnknownNodeError(center)
    n = len(order)
    m = np.zeros((n, n), dtype=np.float64)
    ci = index[center]
    for u, neigh in enumerate(adj):
        if neigh:
            share = 1.0 / len(neigh)
            for w in neigh:
                m[w, u] += share
        else:
            m[ci, u] = 1.0
    return order, m


def ppr_exact(sub: EgoSubgraph, center: int, alpha: float) -> dict[int, float]:
    """Personalized PageRank on the subgraph by power iteration.

    Iterates ``pi <- alpha * e_center + (1 - alpha) * M @ pi`` to an L1
    fixed-point residual below 1e-10. Successive iterates contract by
    (1 - alpha) per step, so enough steps are taken up front and the
    residual is verified once at the end. Scores sum to 1.
    """
    order, m = _walk_matrix(sub, center)
    n = len(order)
    index = {v: i for i, v in enumerate(order)}
    e = np.zeros(n)
    e[index[center]] = 1.0
    beta = 1.0 - alpha
    if beta <= 0.0:
        return {v: float(e[i]) for i, v in enumerate(order)}
    # delta after t steps is at most 2 * beta^t; aim below 1e-10 / 2
    steps = max(1, math.ceil(math.log(2.5e-11) / math.log(beta)))
    alpha_e = alpha * e
    beta_m = beta * m
    pi = e.copy()
    scratch = np.empty_like(pi)
    for _ in range(steps):
        np.dot(beta_m, pi, out=scratch)
        scratch += alpha_e
        pi, scratch = scratch, pi
    for _ in range(100_000):
        np.dot(beta_m, pi, out=scratch)
        scratch += alpha_e
        delta = np.abs(scratch - pi).sum()
        pi, scratch = scratch, pi
        if delta < 1e-10:
            break
    return {v: float(pi[i]) for i, v in enumerate(order)}


def ppr_approx(sub: EgoSubgraph, center: int, cfg: SamplerConfig) -> dict[int, float]:
    """Personalized PageRank by queue-driven forward push.

    Maintains per-node estimates and residuals. Any node whose residual
    reaches ``push_tolerance * degree`` is pushed: an ``alpha`` share of
    its residual settles into its estimate and the rest spreads to its
    neighbors. On termination the per-node estimate differs from the
    exact score by at most ``push_tolerance * degree(node)``.
    """
    order, adj = sub.adjacency()
    index = {v: i for i, v in enumerate(order)}
    if center not in index:
        raise UnknownNodeError(center)
    n = len(order)
    ci = index[center]
    alpha = cfg.alpha
    r_max = cfg.push_tolerance
    estimate = [0.0] * n
    residual = [0.0] * n
    residual[ci] = 1.0
    degree = [len(neigh) for neigh in adj]
    threshold = [max(r_max * d, r_max) for d in degree]
    queue: deque[int] = deque([ci])
    in_queue = [False] * n
    in_queue[ci] = True
    while queue:
        u = queue.popleft()
        in_queue[u] = False
        res = residual[u]
        if res < threshold[u]:
            continue
        estimate[u] += alpha * res
        residual[u] = 0.0
        spread = (1.0 - alpha) * res
        if degree[u] == 0:
            # Isolated within the subgraph: walk mass restarts at the center.
            residual[ci] += spread
            if not in_queue[ci] and residual[ci] >= threshold[ci]:
                queue.append(ci)
                in_queue[ci] = True
            continue
        share = spread / degree[u]
        for w in adj[u]:
            residual[w] += share
            if not in_queue[w] and residual[w] >= threshold[w]:
                queue.append(w)
                in_queue[w] = True
    return {v: estimate[index[v]] for v in order}


def top_k_anchors(
    g: HetGraph,
    center: int,
    cfg: SamplerConfig,
    mask: EdgeMask | None = None,
) -> AnchorList:
    """Full two-stage run: sample a subgraph, rank by PPR, keep the top k.

    The center itself is dropped from the entries; ties break toward the
    smaller node id so results are reproducible.
    """
    sub = sample_subgraph(g, center, cfg, mask)
    if cfg.ppr_mode == "exact_power_iteration":
        scores = ppr_exact(sub, center, cfg.alpha)
    else:
        scores = ppr_approx(sub, center, cfg)
    center_score = scores.pop(center, 0.0)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    entries = tuple((v, float(s)) for v, s in ranked[: cfg.anchor_k])
    return AnchorList(center=center, entries=entries, center_score=float(center_score))
