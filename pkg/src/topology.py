"""
Network topology loading, validation and analysis.

A topology file is a JSON document::

    {
        "name": "German",
        "nodes": 17,                      # or an explicit id list [0, 1, ...]
        "node_names": ["Berlin", ...],    # optional
        "links": [{"u": 0, "v": 6, "length_km": 306}, ...]
    }

Node ids are dense 0-based integers; link ids follow file order.
"""

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import networkx as nx
import numpy as np

from src.utils import log_event


class TopologyError(ValueError):
    """Raised when a topology document cannot be parsed or fails validation."""


@dataclass(frozen=True)
class Link:
    id: int
    u: int
    v: int
    length_km: float

    def other(self, node):
        """Return the endpoint opposite to node."""
        return self.v if node == self.u else self.u


@dataclass(frozen=True)
class Topology:
    name: str
    nodes: tuple
    links: tuple
    adjacency: tuple
    node_names: tuple = ()
    graph: nx.Graph = field(default=None, repr=False, compare=False)
    _pairs: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_links(self):
        return len(self.links)

    @property
    def max_link_length(self):
        return max(link.length_km for link in self.links)

    def degree(self, node):
        return len(self.adjacency[node])

    def link_between(self, u, v):
        """
        Look up the link joining two nodes.

        Args:
            u (int): First endpoint
            v (int): Second endpoint

        Returns:
            Optional[Link]: The link, or None when the nodes are not adjacent
        """
        return self._pairs.get((min(u, v), max(u, v)))

    def directed_index(self, link_id, from_node):
        """Index of the directed spectrum state used when leaving from_node over link_id."""
        return 2 * link_id if self.links[link_id].u == from_node else 2 * link_id + 1

    def label(self, node):
        return self.node_names[node] if self.node_names else str(node)

    def to_graph(self):
        """
        Mutable networkx copy of the topology.

        Returns:
            networkx.Graph: Nodes are ids, edges carry length_km and link_id
        """
        return nx.Graph(self.graph)


@dataclass(frozen=True)
class TopologyMetrics:
    d_avg: float
    l_avg_km: float
    lbc: tuple = None
    sigma_lbc: float = None


def build_topology(name, num_nodes, link_records, node_names=()):
    """
    Construct and validate a Topology from plain link records.

    Args:
        name (str): Network name
        num_nodes (int): Number of nodes, ids 0..num_nodes-1
        link_records (Iterable[Tuple[int, int, float]]): (u, v, length_km) triples
        node_names (Sequence[str]): Optional labels, one per node

    Returns:
        Topology: Validated topology

    Raises:
        TopologyError: On self-loops, duplicates, bad lengths or a disconnected graph
    """
    if num_nodes < 2:
        raise TopologyError(f"Topology '{name}' needs at least two nodes")
    if node_names and len(node_names) != num_nodes:
        raise TopologyError(
            f"Topology '{name}' has {len(node_names)} node names for {num_nodes} nodes"
        )

    links = []
    pairs = {}
    neighbours = [[] for _ in range(num_nodes)]
    graph = nx.Graph(name=name)
    graph.add_nodes_from(range(num_nodes))

    for index, (u, v, length_km) in enumerate(link_records):
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise TopologyError(f"Link {index} references unknown node ({u}, {v})")
        if u == v:
            raise TopologyError(f"Link {index} is a self-loop on node {u}")
        if not length_km > 0:
            raise TopologyError(f"Link {index} has non-positive length {length_km}")
        key = (min(u, v), max(u, v))
        if key in pairs:
            raise TopologyError(f"Duplicate link between nodes {key[0]} and {key[1]}")

        link = Link(id=index, u=u, v=v, length_km=float(length_km))
        links.append(link)
        pairs[key] = link
        neighbours[u].append((v, index))
        neighbours[v].append((u, index))
        graph.add_edge(u, v, length_km=link.length_km, link_id=index)

    adjacency = tuple(tuple(sorted(entries)) for entries in neighbours)
    topology = Topology(
        name=name,
        nodes=tuple(range(num_nodes)),
        links=tuple(links),
        adjacency=adjacency,
        node_names=tuple(node_names),
        graph=nx.freeze(graph),
        _pairs=pairs,
    )

    if not nx.is_connected(topology.graph):
        raise TopologyError(f"Topology '{name}' is not connected")

    low_degree = [n for n in topology.nodes if topology.degree(n) < 2]
    if low_degree:
        log_event(
            "topology_low_degree",
            {"topology": name, "nodes": low_degree},
            level="warning",
        )

    return topology


def parse_topology(document):
    """
    Validate an already-decoded topology document.

    Args:
        document (dict): Decoded JSON document

    Returns:
        Topology: Validated topology

    Raises:
        TopologyError: If required fields are missing or malformed
    """
    if not isinstance(document, dict):
        raise TopologyError("Topology document must be a JSON object")

    try:
        name = str(document["name"])
        nodes = document["nodes"]
        if isinstance(nodes, list):
            if sorted(nodes) != list(range(len(nodes))):
                raise TopologyError("Node ids must be dense 0-based integers")
            num_nodes = len(nodes)
        else:
            num_nodes = int(nodes)
        records = [
            (int(entry["u"]), int(entry["v"]), float(entry["length_km"]))
            for entry in document["links"]
        ]
    except (KeyError, TypeError) as e:
        raise TopologyError(f"Malformed topology document: {e}") from e

    return build_topology(name, num_nodes, records, document.get("node_names", ()))


@lru_cache(maxsize=32)
def _load_topology_file(path):
    try:
        with open(path, encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as e:
        raise TopologyError(f"Cannot parse topology file {path}: {e}") from e
    return parse_topology(document)


def load_topology(source):
    """
    Load a topology from a JSON file path or a decoded document.

    Args:
        source (Union[str, Path, dict]): File path or document

    Returns:
        Topology: Validated topology (file loads are cached per process)
    """
    if isinstance(source, dict):
        return parse_topology(source)

    path = str(Path(source).resolve())
    topology = _load_topology_file(path)
    log_event(
        "topology_loaded",
        {"name": topology.name, "nodes": topology.num_nodes, "links": topology.num_links},
        level="debug",
    )
    return topology


def summary(topology):
    """
    Average nodal degree and average link length.

    Args:
        topology (Topology): Network

    Returns:
        TopologyMetrics: d_avg and l_avg_km filled, LBC fields left empty
    """
    return TopologyMetrics(
        d_avg=2 * topology.num_links / topology.num_nodes,
        l_avg_km=float(np.mean([link.length_km for link in topology.links])),
    )


def compute_lbc(topology):
    """
    Link betweenness centrality over all unordered node pairs.

    Every equal-length shortest path of a pair is counted, so a pair with two
    shortest routes contributes two paths to the total.

    Args:
        topology (Topology): Connected network

    Returns:
        TopologyMetrics: Summary attributes plus per-link LBC and its std deviation
    """
    graph = topology.graph
    on_link = np.zeros(topology.num_links, dtype=np.int64)
    total = 0

    for s in topology.nodes:
        for d in topology.nodes[s + 1:]:
            for nodes in nx.all_shortest_paths(graph, s, d, weight="length_km"):
                total += 1
                for a, b in zip(nodes, nodes[1:]):
                    on_link[graph.edges[a, b]["link_id"]] += 1

    lbc = on_link / total
    base = summary(topology)
    return TopologyMetrics(
        d_avg=base.d_avg,
        l_avg_km=base.l_avg_km,
        lbc=tuple(float(value) for value in lbc),
        sigma_lbc=float(np.std(lbc)),
    )


def describe_topology(topology, top=5):
    """
    JSON-ready description of a network for run reports.

    Args:
        topology (Topology): Network
        top (int): Number of most central links to list

    Returns:
        dict: Size, degree, length and centrality attributes
    """
    metrics = compute_lbc(topology)
    ranked = sorted(range(topology.num_links), key=lambda i: (-metrics.lbc[i], i))
    return {
        "name": topology.name,
        "nodes": topology.num_nodes,
        "links": topology.num_links,
        "d_avg": round(metrics.d_avg, 4),
        "l_avg_km": round(metrics.l_avg_km, 2),
        "sigma_lbc": round(metrics.sigma_lbc, 6),
        "most_central_links": [
            {
                "link": i,
                "u": topology.label(topology.links[i].u),
                "v": topology.label(topology.links[i].v),
                "lbc": round(metrics.lbc[i], 6),
            }
            for i in ranked[:top]
        ],
    }
