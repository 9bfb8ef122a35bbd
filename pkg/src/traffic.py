"""
Dynamic request workload.

Arrivals are the superposition of one Poisson process per node, generated as a
single process of rate lambda * |V| with uniformly drawn sources. Randomness
comes from numpy's PCG64 generator; one SeedSequence per run is split into four
independent child streams (inter-arrivals, endpoints, bandwidths, holding
times) so changing how one category is drawn leaves the others untouched.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

DEFAULT_BANDWIDTHS = (25.0, 50.0, 75.0, 100.0, 125.0, 150.0)

ARRIVAL = "arrival"
DEPARTURE = "departure"
# departures sort before arrivals at equal times
_EVENT_RANK = {DEPARTURE: 0, ARRIVAL: 1}


@dataclass(frozen=True)
class TrafficConfig:
    lambda_per_node: float
    mu: float = 1.0
    bandwidth_set: tuple = DEFAULT_BANDWIDTHS
    total_requests: int = 100_000
    warmup_requests: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.lambda_per_node <= 0:
            raise ValueError("lambda_per_node must be positive")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if not self.bandwidth_set or min(self.bandwidth_set) <= 0:
            raise ValueError("bandwidth_set must hold positive rates")
        if self.total_requests < 1:
            raise ValueError("total_requests must be at least 1")
        if not 0 <= self.warmup_requests < self.total_requests:
            raise ValueError("warmup_requests must be in [0, total_requests)")
        object.__setattr__(self, "bandwidth_set", tuple(float(b) for b in self.bandwidth_set))

    @classmethod
    def from_load(cls, load_erlangs, num_nodes, mu=1.0, **kwargs):
        """
        Build a config for a target offered load.

        Args:
            load_erlangs (float): Offered load (lambda / mu) * |V|
            num_nodes (int): |V|
            mu (float): Departure rate, 1 / mean holding time

        Returns:
            TrafficConfig: Config with lambda = load * mu / |V|
        """
        if load_erlangs <= 0:
            raise ValueError("Offered load must be positive")
        return cls(lambda_per_node=load_erlangs * mu / num_nodes, mu=mu, **kwargs)

    def offered_load(self, num_nodes):
        return self.lambda_per_node / self.mu * num_nodes


@dataclass(frozen=True)
class Request:
    id: int
    s: int
    d: int
    b: float
    t_arrival: float
    t_hold: float

    @property
    def t_departure(self):
        return self.t_arrival + self.t_hold


@dataclass(order=True)
class Event:
    time: float
    rank: int
    ident: int
    kind: str = field(compare=False)
    payload: object = field(compare=False, default=None)

    @classmethod
    def arrival(cls, request):
        return cls(request.t_arrival, _EVENT_RANK[ARRIVAL], request.id, ARRIVAL, request)

    @classmethod
    def departure(cls, time, lightpath_id):
        return cls(time, _EVENT_RANK[DEPARTURE], lightpath_id, DEPARTURE, lightpath_id)


def cell_seed(base_seed, load_index, repetition):
    """
    Seed of one (load, repetition) cell.

    The policy is deliberately not an input, so every policy at the same load and
    repetition is served the identical request stream.
    """
    return int(base_seed) + 1000 * int(load_index) + int(repetition)


def generate_request_stream(topology, cfg):
    """
    Draw the full request sequence of one run.

    Args:
        topology (Topology): Network, for |V|
        cfg (TrafficConfig): Rates, bandwidth set, request count and seed

    Returns:
        List[Request]: Requests with ids 1..total_requests in arrival order
    """
    n = cfg.total_requests
    num_nodes = topology.num_nodes
    arrivals_rng, endpoints_rng, bandwidth_rng, holding_rng = (
        np.random.Generator(np.random.PCG64(child))
        for child in np.random.SeedSequence(cfg.seed).spawn(4)
    )

    times = np.cumsum(arrivals_rng.exponential(1.0 / (cfg.lambda_per_node * num_nodes), n))
    sources = endpoints_rng.integers(0, num_nodes, n)
    targets = endpoints_rng.integers(0, num_nodes - 1, n)
    targets = targets + (targets >= sources)
    bandwidths = bandwidth_rng.choice(np.asarray(cfg.bandwidth_set), n)
    holds = np.maximum(holding_rng.exponential(1.0 / cfg.mu, n), np.finfo(float).tiny)

    return [
        Request(
            id=i + 1,
            s=int(sources[i]),
            d=int(targets[i]),
            b=float(bandwidths[i]),
            t_arrival=float(times[i]),
            t_hold=float(holds[i]),
        )
        for i in range(n)
    ]


def dump_request_stream(requests, path):
    """Write requests as JSON lines, one record per request."""
    with open(path, "w", encoding="utf-8") as handle:
        for request in requests:
            handle.write(json.dumps(asdict(request)) + "\n")


def read_request_stream(path):
    """Read a stream written by dump_request_stream."""
    with open(path, encoding="utf-8") as handle:
        return [Request(**json.loads(line)) for line in handle if line.strip()]
