"""Cluster resource names: Louvain communities plus an iterative
approximation that keeps similarity evaluations linear in the input size.

The full Louvain method needs all pairwise similarities up front, which is
quadratic in the number of names. The approximative variant clusters a
random subset, turns the communities into bounded prototypes, absorbs the
remaining names that sit close enough to a prototype, and repeats on
whatever is left.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ClusteringError",
    "SimilarityGraph",
    "ClusterPrototype",
    "ApproxConfig",
    "ApproxResult",
    "PrototypeIndex",
    "build_similarity_graph",
    "louvain_partition",
    "louvain_with_modularity",
    "modularity",
    "make_prototypes",
    "nn_search",
    "approx_cluster",
    "prototypes_to_dict",
    "prototypes_from_dict",
]


class ClusteringError(RuntimeError):
    pass


class _CallableAdapter:
    """Gives a plain ``f(a, b) -> float`` the bulk interface the clusterer uses."""

    def __init__(self, fn: Callable[[str, str], float]):
        self.fn = fn

    def __call__(self, a: str, b: str) -> float:
        return self.fn(a, b)

    def encode(self, names: Sequence[str]) -> list[str]:
        return list(names)

    def against(self, query: str, enc) -> np.ndarray:
        if not isinstance(enc, list):
            enc = list(enc)
        return np.array([self.fn(query, other) for other in enc], dtype=np.float64)


def _as_bulk_similarity(sim):
    if hasattr(sim, "against") and hasattr(sim, "encode"):
        return sim
    return _CallableAdapter(sim)


def _slice_encoded(sim, enc, names: Sequence[str], start: int):
    if hasattr(enc, "slice"):
        return enc.slice(start)
    if isinstance(enc, list):
        return enc[start:]
    return sim.encode(names[start:])


@dataclass
class SimilarityGraph:
    """Weighted undirected graph over names; edges kept only above the floor."""

    names: tuple[str, ...]
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    sim_evaluations: int = 0

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def edge_count(self) -> int:
        return len(self.edge_w)


def build_similarity_graph(names: Iterable[str], sim, edge_floor: float) -> SimilarityGraph:
    """Evaluate all unordered pairs and keep edges strictly above ``edge_floor``."""
    ordered = sorted(set(names))
    if not ordered:
        raise ValueError("need at least one name")
    bulk = _as_bulk_similarity(sim)
    enc = bulk.encode(ordered)
    us, vs, ws = [], [], []
    evaluations = 0
    n = len(ordered)
    for i in range(n - 1):
        row = bulk.against(ordered[i], _slice_encoded(bulk, enc, ordered, i + 1))
        evaluations += n - 1 - i
        keep = np.nonzero(row > edge_floor)[0]
        if len(keep):
            us.append(np.full(len(keep), i, dtype=np.int64))
            vs.append(keep + i + 1)
            ws.append(row[keep])
    if us:
        edge_u = np.concatenate(us)
        edge_v = np.concatenate(vs).astype(np.int64)
        edge_w = np.concatenate(ws).astype(np.float64)
    else:
        edge_u = np.zeros(0, dtype=np.int64)
        edge_v = np.zeros(0, dtype=np.int64)
        edge_w = np.zeros(0)
    return SimilarityGraph(
        names=tuple(ordered),
        edge_u=edge_u,
        edge_v=edge_v,
        edge_w=edge_w,
        sim_evaluations=evaluations,
    )


# ---------------------------------------------------------------------------
# Louvain method
# ---------------------------------------------------------------------------


def modularity(graph: SimilarityGraph, partition: Mapping[str, int]) -> float:
    """Weighted modularity of a node-to-community mapping."""
    labels = np.array([partition[name] for name in graph.names], dtype=np.int64)
    return _modularity_arrays(
        graph.n, graph.edge_u, graph.edge_v, graph.edge_w, np.zeros(graph.n), labels
    )


def _modularity_arrays(n, edge_u, edge_v, edge_w, self_w, labels) -> float:
    total = float(edge_w.sum() + self_w.sum())
    if total <= 0:
        return 0.0
    two_m = 2.0 * total
    deg = np.zeros(n)
    np.add.at(deg, edge_u, edge_w)
    np.add.at(deg, edge_v, edge_w)
    deg += 2.0 * self_w
    n_comms = int(labels.max()) + 1 if n else 0
    intra = np.zeros(n_comms)
    same = labels[edge_u] == labels[edge_v]
    np.add.at(intra, labels[edge_u[same]], 2.0 * edge_w[same])
    np.add.at(intra, labels, 2.0 * self_w)
    tot = np.zeros(n_comms)
    np.add.at(tot, labels, deg)
    return float(np.sum(intra / two_m - (tot / two_m) ** 2))


def _one_level(n, offsets, nbr, nbr_w, deg, two_m, rng) -> np.ndarray:
    """Greedy local moves until no single move improves modularity."""
    comm = np.arange(n, dtype=np.int64)
    comm_tot = deg.copy()
    while True:
        moves = 0
        for v in rng.permutation(n):
            lo, hi = offsets[v], offsets[v + 1]
            if lo == hi:
                continue
            cv = comm[v]
            neigh = nbr[lo:hi]
            weights = nbr_w[lo:hi]
            cand, inverse = np.unique(comm[neigh], return_inverse=True)
            links = np.zeros(len(cand))
            np.add.at(links, inverse, weights)
            comm_tot[cv] -= deg[v]
            pos_cv = np.searchsorted(cand, cv)
            if pos_cv < len(cand) and cand[pos_cv] == cv:
                stay = links[pos_cv] - deg[v] * comm_tot[cv] / two_m
            else:
                stay = -deg[v] * comm_tot[cv] / two_m
            gains = links - deg[v] * comm_tot[cand] / two_m
            best = int(np.argmax(gains))
            if cand[best] != cv and gains[best] > stay + 1e-12:
                comm[v] = cand[best]
                comm_tot[cand[best]] += deg[v]
                moves += 1
            else:
                comm_tot[cv] += deg[v]
        if moves == 0:
            return comm


def _louvain_arrays(n, edge_u, edge_v, edge_w, seed, tolerance):
    rng = np.random.default_rng(seed)
    mapping = np.arange(n, dtype=np.int64)
    self_w = np.zeros(n)
    cur_n, u, v, w = n, edge_u, edge_v, edge_w
    phase_q = [_modularity_arrays(cur_n, u, v, w, self_w, np.arange(cur_n))]
    total = float(w.sum() + self_w.sum())
    while total > 0:
        deg = np.zeros(cur_n)
        np.add.at(deg, u, w)
        np.add.at(deg, v, w)
        deg += 2.0 * self_w
        order = np.argsort(np.concatenate([u, v]), kind="stable")
        endpoints = np.concatenate([u, v])[order]
        partners = np.concatenate([v, u])[order]
        partner_w = np.concatenate([w, w])[order]
        offsets = np.searchsorted(endpoints, np.arange(cur_n + 1))
        comm = _one_level(cur_n, offsets, partners, partner_w, deg, 2.0 * total, rng)
        _, comm = np.unique(comm, return_inverse=True)
        q = _modularity_arrays(cur_n, u, v, w, self_w, comm)
        if q - phase_q[-1] < tolerance:
            break
        phase_q.append(q)
        mapping = comm[mapping]
        # Aggregate communities into supernodes; intra weight becomes self-loops.
        new_n = int(comm.max()) + 1
        new_self = np.zeros(new_n)
        np.add.at(new_self, comm, self_w)
        cu, cv = comm[u], comm[v]
        intra = cu == cv
        np.add.at(new_self, cu[intra], w[intra])
        lo = np.minimum(cu[~intra], cv[~intra])
        hi = np.maximum(cu[~intra], cv[~intra])
        keys = lo * new_n + hi
        uniq, inverse = np.unique(keys, return_inverse=True)
        new_w = np.zeros(len(uniq))
        np.add.at(new_w, inverse, w[~intra])
        cur_n, u, v, w, self_w = new_n, uniq // new_n, uniq % new_n, new_w, new_self
        if cur_n == 1:
            break
    # Contiguous ids ordered by first appearance over the sorted name order.
    _, labels = np.unique(mapping, return_inverse=True)
    seen: dict[int, int] = {}
    final = np.empty_like(labels)
    for i, lab in enumerate(labels):
        cid = seen.setdefault(int(lab), len(seen))
        final[i] = cid
    return final, phase_q


def louvain_with_modularity(
    graph: SimilarityGraph, seed: int = 0, tolerance: float = 1e-7
) -> tuple[dict[str, int], list[float]]:
    """Louvain partition plus the modularity reached after each phase."""
    labels, phase_q = _louvain_arrays(
        graph.n, graph.edge_u, graph.edge_v, graph.edge_w, seed, tolerance
    )
    return {name: int(c) for name, c in zip(graph.names, labels)}, phase_q


def louvain_partition(graph: SimilarityGraph, seed: int = 0, tolerance: float = 1e-7) -> dict[str, int]:
    """Community per node via modularity maximization; isolated nodes stay singletons."""
    return louvain_with_modularity(graph, seed, tolerance)[0]


# ---------------------------------------------------------------------------
# Prototypes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterPrototype:
    """A bounded random subset of one cluster's members, its stand-in for search."""

    prototype_id: int
    rtype: str
    members: tuple[str, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("prototype needs at least one member")


def make_prototypes(
    partition: Mapping[str, int],
    m: int,
    seed: int = 0,
    rtype: str = "",
    start_id: int = 0,
) -> list[ClusterPrototype]:
    """One prototype per community, members sampled uniformly without replacement."""
    if m < 1:
        raise ValueError("prototype cap m must be >= 1")
    groups: dict[int, list[str]] = {}
    for name, cid in partition.items():
        groups.setdefault(cid, []).append(name)
    rng = np.random.default_rng(seed)
    out = []
    for rank, cid in enumerate(sorted(groups)):
        members = sorted(groups[cid])
        if len(members) > m:
            pick = rng.choice(len(members), size=m, replace=False)
            members = [members[i] for i in sorted(pick)]
        out.append(
            ClusterPrototype(prototype_id=start_id + rank, rtype=rtype, members=tuple(members))
        )
    return out


class PrototypeIndex:
    """Nearest-prototype search over a fixed prototype set."""

    def __init__(self, prototypes: Sequence[ClusterPrototype], sim):
        if not prototypes:
            raise ValueError("prototype set is empty")
        self.prototypes = sorted(prototypes, key=lambda p: p.prototype_id)
        self.sim = _as_bulk_similarity(sim)
        flat: list[str] = []
        owners: list[int] = []
        for pos, proto in enumerate(self.prototypes):
            flat.extend(proto.members)
            owners.extend([pos] * len(proto.members))
        self._owners = np.array(owners, dtype=np.int64)
        self._enc = self.sim.encode(flat)
        self.size = len(flat)

    def query(self, name: str) -> tuple[ClusterPrototype, float]:
        """Prototype with the highest member similarity; ties go to the lowest id."""
        sims = self.sim.against(name, self._enc)
        best = np.full(len(self.prototypes), -np.inf)
        np.maximum.at(best, self._owners, sims)
        pos = int(np.argmax(best))
        return self.prototypes[pos], float(best[pos])


def nn_search(name: str, prototypes: Sequence[ClusterPrototype], sim) -> tuple[ClusterPrototype, float]:
    """Single nearest-prototype lookup; build a PrototypeIndex for repeated queries."""
    return PrototypeIndex(prototypes, sim).query(name)


# ---------------------------------------------------------------------------
# Approximative clustering
# ---------------------------------------------------------------------------


@dataclass
class ApproxConfig:
    k: int = 100_000
    m: int = 10
    epsilon: float = 0.4
    seed: int = 0
    edge_floor: float | None = None  # defaults to epsilon
    max_iterations: int = 50

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("subset size k must be >= 2")
        if self.m < 1:
            raise ValueError("prototype cap m must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")

    @property
    def floor(self) -> float:
        return self.epsilon if self.edge_floor is None else self.edge_floor


@dataclass
class IterationStats:
    subset_size: int
    prototypes_created: int
    candidates: int
    absorbed: int
    graph_evaluations: int
    absorb_evaluations: int


@dataclass
class ApproxResult:
    prototypes: list[ClusterPrototype]
    assignment: dict[str, int]
    sim_evaluations: int
    iterations: list[IterationStats] = field(default_factory=list)
    absorbed: dict[str, int] = field(default_factory=dict)

    def partition(self) -> dict[str, int]:
        return dict(self.assignment)

    def absorbed_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for pid in self.absorbed.values():
            counts[pid] = counts.get(pid, 0) + 1
        return counts


def approx_cluster(names: Iterable[str], sim, cfg: ApproxConfig, rtype: str = "") -> ApproxResult:
    """Iterative subset clustering per the linear-evaluation scheme.

    Each round clusters a random subset of up to ``cfg.k`` names, caps the
    resulting communities into prototypes of at most ``cfg.m`` members,
    then sweeps the names left over: anything with similarity above
    ``cfg.epsilon`` to one of the round's prototypes is assigned to it and
    dropped. Rounds repeat until every name is clustered or absorbed.
    """
    remaining = sorted(set(names))
    if not remaining:
        raise ValueError("need at least one name")
    bulk = _as_bulk_similarity(sim)
    base = np.random.SeedSequence(cfg.seed)
    children = base.spawn(1 + 2 * cfg.max_iterations)
    subset_rng = np.random.default_rng(children[0])

    result = ApproxResult(prototypes=[], assignment={}, sim_evaluations=0)
    iteration = 0
    while remaining:
        if iteration >= cfg.max_iterations:
            raise ClusteringError(
                f"approximative clustering did not finish within {cfg.max_iterations} "
                f"iterations; {len(remaining)} names left (epsilon={cfg.epsilon}, k={cfg.k})"
            )
        louvain_seed = children[1 + 2 * iteration]
        proto_seed = children[2 + 2 * iteration]
        iteration += 1

        k = min(cfg.k, len(remaining))
        pick = subset_rng.choice(len(remaining), size=k, replace=False)
        picked = set(pick.tolist())
        subset = [remaining[i] for i in sorted(picked)]
        rest = [remaining[i] for i in range(len(remaining)) if i not in picked]

        graph = build_similarity_graph(subset, bulk, cfg.floor)
        partition = louvain_partition(graph, seed=louvain_seed)
        start_id = len(result.prototypes)
        protos = make_prototypes(partition, cfg.m, seed=proto_seed, rtype=rtype, start_id=start_id)
        for name, cid in partition.items():
            result.assignment[name] = start_id + cid
        result.prototypes.extend(protos)

        absorbed = 0
        absorb_evals = 0
        still_remaining = []
        index = PrototypeIndex(protos, bulk)
        for name in rest:
            proto, score = index.query(name)
            absorb_evals += index.size
            if score > cfg.epsilon:
                result.assignment[name] = proto.prototype_id
                result.absorbed[name] = proto.prototype_id
                absorbed += 1
            else:
                still_remaining.append(name)
        remaining = still_remaining
        result.sim_evaluations += graph.sim_evaluations + absorb_evals
        result.iterations.append(
            IterationStats(
                subset_size=k,
                prototypes_created=len(protos),
                candidates=len(rest),
                absorbed=absorbed,
                graph_evaluations=graph.sim_evaluations,
                absorb_evaluations=absorb_evals,
            )
        )
    return result


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def prototypes_to_dict(rtype: str, prototypes: Sequence[ClusterPrototype]) -> dict:
    return {
        "rtype": rtype,
        "prototypes": [
            {"id": p.prototype_id, "members": list(p.members)}
            for p in sorted(prototypes, key=lambda p: p.prototype_id)
        ],
    }


def prototypes_from_dict(payload: Mapping) -> tuple[str, list[ClusterPrototype]]:
    rtype = payload["rtype"]
    protos = [
        ClusterPrototype(prototype_id=int(p["id"]), rtype=rtype, members=tuple(p["members"]))
        for p in payload["prototypes"]
    ]
    return rtype, protos
