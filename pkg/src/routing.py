"""
Path computation and the exclusion-keyed path cache.

All searches minimise total weight (link length unless weights are given) and
break ties on the lexicographically smallest node sequence, so results are
reproducible across runs and platforms. Excluding a link removes it from the
search, which is the same as giving it an infinite weight.
"""

import math
from collections import namedtuple
from dataclasses import dataclass

import networkx as nx

from src.spectrum import sor

PathCacheKey = namedtuple("PathCacheKey", ["s", "d", "excluded"])
CandidateListKey = namedtuple("CandidateListKey", ["algorithm", "s", "d", "k"])


@dataclass(frozen=True)
class Path:
    nodes: tuple
    links: tuple
    directed: tuple
    length_km: float

    @property
    def hops(self):
        return len(self.links)

    @property
    def sort_key(self):
        return (self.length_km, self.nodes)


def make_path(topology, nodes):
    """
    Build a Path from a node sequence.

    Args:
        topology (Topology): Network
        nodes (Sequence[int]): Consecutive adjacent nodes, at least two

    Returns:
        Path: Route with link ids, directed link indices and total length

    Raises:
        ValueError: If two consecutive nodes are not adjacent or a node repeats
    """
    nodes = tuple(nodes)
    if len(nodes) < 2 or len(set(nodes)) != len(nodes):
        raise ValueError(f"Not a loop-free route: {nodes}")
    links = []
    directed = []
    for a, b in zip(nodes, nodes[1:]):
        link = topology.link_between(a, b)
        if link is None:
            raise ValueError(f"Nodes {a} and {b} are not adjacent")
        links.append(link.id)
        directed.append(topology.directed_index(link.id, a))
    length = sum(topology.links[link_id].length_km for link_id in links)
    return Path(nodes=nodes, links=tuple(links), directed=tuple(directed), length_km=length)


def exclusion_set(links):
    """Canonical exclusion set: sorted, duplicate-free tuple of link ids."""
    return tuple(sorted(set(links)))


class PathCache:
    """Memo of path computations; a stored None records that no path exists."""

    def __init__(self):
        self.entries = {}
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self.entries)

    @property
    def hit_rate(self):
        lookups = self.hits + self.misses
        return self.hits / lookups if lookups else 0.0

    def reset_counters(self):
        self.hits = 0
        self.misses = 0


def cache_lookup_or_compute(cache, key, compute):
    """
    Return the cached result for key, computing and storing it on a miss.

    Args:
        cache (PathCache): Cache owned by one simulation run
        key (Hashable): Canonical key, e.g. PathCacheKey
        compute (Callable[[], Any]): Deferred computation, called only on a miss

    Returns:
        Any: Cached or freshly computed value (None included)
    """
    if key in cache.entries:
        cache.hits += 1
        return cache.entries[key]
    cache.misses += 1
    value = compute()
    cache.entries[key] = value
    return value


def _weight_function(topology, weights):
    """networkx weight callable; None hides a link in the direction searched."""
    if weights is None:
        return lambda u, v, data: data["length_km"]
    if len(weights) == 2 * topology.num_links:
        def pick(u, data):
            return weights[topology.directed_index(data["link_id"], u)]
    elif len(weights) == topology.num_links:
        def pick(u, data):
            return weights[data["link_id"]]
    else:
        raise ValueError(
            f"Expected {topology.num_links} or {2 * topology.num_links} weights, "
            f"got {len(weights)}"
        )

    def weight(u, v, data):
        value = pick(u, data)
        return None if math.isinf(value) else value

    return weight


def _search_graph(topology, excluded):
    """Read-only view of the topology with the excluded links hidden."""
    if not excluded:
        return topology.graph
    hidden = [(topology.links[link_id].u, topology.links[link_id].v) for link_id in excluded]
    return nx.restricted_view(topology.graph, [], hidden)


def shortest_path(topology, s, d, excluded=(), weights=None):
    """
    Minimum-weight loop-free path avoiding the excluded links.

    Args:
        topology (Topology): Network
        s (int): Source node
        d (int): Destination node, different from s
        excluded (Iterable[int]): Link ids treated as having infinite weight
        weights (Optional[Sequence[float]]): Per-link (|E|) or per-directed-link (2|E|)
            weights; link lengths when omitted

    Returns:
        Optional[Path]: The path, None if s and d are disconnected after exclusion
    """
    if s == d:
        raise ValueError("Source and destination must differ")
    weight = _weight_function(topology, weights)
    graph = _search_graph(topology, set(excluded))
    try:
        # every equal-weight route, smallest node sequence wins
        nodes = min(tuple(p) for p in nx.all_shortest_paths(graph, s, d, weight=weight))
    except nx.NetworkXNoPath:
        return None
    return make_path(topology, nodes)


def cached_shortest_path(cache, topology, s, d, excluded=()):
    """Length-weighted shortest path served through the (s, d, L_e) cache when given."""
    excluded = exclusion_set(excluded)
    if cache is None:
        return shortest_path(topology, s, d, excluded)
    return cache_lookup_or_compute(
        cache,
        PathCacheKey(s, d, excluded),
        lambda: shortest_path(topology, s, d, excluded),
    )


def yen_ksp(topology, s, d, k, weights=None):
    """
    K shortest loop-free paths (Yen's algorithm, as run by networkx).

    Paths tied in weight with the k-th one are drawn as well, so the cut at k
    follows the (weight, node sequence) order.

    Args:
        topology (Topology): Network
        s (int): Source node
        d (int): Destination node
        k (int): Number of paths wanted, at least 1
        weights (Optional[Sequence[float]]): Finite per-link or per-directed-link weights

    Returns:
        List[Path]: Up to k paths in ascending (weight, node sequence) order
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if s == d:
        raise ValueError("Source and destination must differ")
    if weights is not None and any(math.isinf(w) for w in weights):
        raise ValueError("K shortest paths need finite weights")
    weight = _weight_function(topology, weights)
    graph = topology.graph

    ranked = []
    try:
        for nodes in nx.shortest_simple_paths(graph, s, d, weight=weight):
            cost = sum(weight(a, b, graph.edges[a, b]) for a, b in zip(nodes, nodes[1:]))
            # the generator yields in non-decreasing weight
            if len(ranked) >= k and cost > ranked[k - 1][0]:
                break
            ranked.append((cost, tuple(nodes)))
    except nx.NetworkXNoPath:
        return []

    ranked.sort()
    return [make_path(topology, nodes) for _, nodes in ranked[:k]]


def k_disjoint_paths(topology, s, d, k, cache=None):
    """
    Greedy link-disjoint paths: each next path avoids every link used so far.

    Args:
        topology (Topology): Network
        s (int): Source node
        d (int): Destination node
        k (int): Maximum number of paths
        cache (Optional[PathCache]): Serves each exclusion query when given

    Returns:
        List[Path]: Up to k mutually link-disjoint paths, shortest first
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    paths = []
    used = []
    while len(paths) < k:
        path = cached_shortest_path(cache, topology, s, d, used)
        if path is None:
            break
        paths.append(path)
        used.extend(path.links)
    return paths


def max_sor_link(state, path, cfg):
    """
    Busiest link of a path, judged on the direction the path travels.

    Args:
        state (NetworkState): Live spectrum
        path (Path): Candidate path
        cfg (SpectrumConfig): Spectrum dimensions

    Returns:
        int: Link id with the highest SOR, the earliest hop on ties
    """
    ratios = [sor(state.links[index], cfg) for index in path.directed]
    best = max(range(len(ratios)), key=lambda i: (ratios[i], -i))
    return path.links[best]


def ca_alternative_path(topology, state, s, d, prev_path, prev_lmax, cfg, cache=None):
    """
    Congestion-aware alternative path.

    The busiest link of the previous candidate joins the busiest links of all
    earlier candidates, and the shortest path avoiding all of them is returned.
    Only that exclusion-keyed shortest-path query is cached; the SOR evaluation
    always reads the live state.

    Args:
        topology (Topology): Network
        state (NetworkState): Live spectrum
        s (int): Source node
        d (int): Destination node
        prev_path (Path): Candidate k-1
        prev_lmax (Sequence[int]): Busiest links of candidates 1..k-2
        cfg (SpectrumConfig): Spectrum dimensions
        cache (Optional[PathCache]): Exclusion-keyed cache

    Returns:
        Tuple[Optional[Path], int]: Candidate k (None if the exclusions disconnect s
        and d) and the busiest link of prev_path
    """
    new_lmax = max_sor_link(state, prev_path, cfg)
    path = cached_shortest_path(cache, topology, s, d, list(prev_lmax) + [new_lmax])
    return path, new_lmax


def ca_disjoint_path(topology, s, d, p1, lmax_list, cache=None):
    """
    Congestion-aware disjoint path: avoids every link of p1 and each listed busy link.

    Args:
        topology (Topology): Network
        s (int): Source node
        d (int): Destination node
        p1 (Path): First shortest path
        lmax_list (Sequence[int]): Busiest links of candidates 2..K-1
        cache (Optional[PathCache]): Exclusion-keyed cache

    Returns:
        Optional[Path]: Path sharing no link with p1, or None
    """
    return cached_shortest_path(cache, topology, s, d, list(p1.links) + list(lmax_list))
