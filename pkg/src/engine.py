"""
Event-driven simulation loop and the RMCSA serving policies.

Every policy produces candidate paths in order and tries each one the same way:
modulation from the path length, slot count from the request rate, then
first-fit core and first-fit spectrum. The first candidate that fits wins.
"""

import heapq
import time
from dataclasses import dataclass

from src.metrics import MetricsAccumulator, finalize, record_decision
from src.modulation import DEFAULT_MODULATION_TABLE, required_slots, select_modulation
from src.routing import (
    CandidateListKey,
    PathCache,
    ca_alternative_path,
    ca_disjoint_path,
    cache_lookup_or_compute,
    cached_shortest_path,
    k_disjoint_paths,
    max_sor_link,
    shortest_path,
    yen_ksp,
)
from src.spectrum import (
    NetworkState,
    allocate,
    check_state,
    first_fit_over_cores,
    release,
    sor,
)
from src.traffic import Event, generate_request_stream
from src.utils import log_event

POLICIES = ("SP", "KSP", "KDP", "LB", "CALA")


@dataclass(frozen=True)
class PolicyConfig:
    policy: str
    k: int = 3
    lb_alpha: float = 0.5
    lb_update_interval: int = 1500

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"Unknown policy '{self.policy}', expected one of {POLICIES}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 <= self.lb_alpha <= 1.0:
            raise ValueError("lb_alpha must lie in [0, 1]")
        if self.lb_update_interval < 1:
            raise ValueError("lb_update_interval must be at least 1")


@dataclass
class Decision:
    accepted: bool
    service_latency: float
    allocation: object = None
    candidate_index: int = None
    modulation: object = None
    candidates_tried: int = 0


@dataclass(frozen=True)
class LbWeightSnapshot:
    weights: tuple
    snapshot_request_count: int


@dataclass
class SimulationContext:
    topology: object
    state: NetworkState
    spectrum_cfg: object
    policy_cfg: PolicyConfig
    cache: PathCache = None
    modulation_table: tuple = DEFAULT_MODULATION_TABLE
    lb_snapshot: LbWeightSnapshot = None


def take_lb_snapshot(topology, state, spectrum_cfg, alpha, request_count):
    """
    Freeze the load-balancing link weights.

    NLW = alpha * (L_l / L_max) + (1 - alpha) * SOR_l, one value per directed link
    so a route is weighted by the direction it would occupy.

    Args:
        topology (Topology): Network
        state (NetworkState): Live spectrum
        spectrum_cfg (SpectrumConfig): Spectrum dimensions
        alpha (float): Length coefficient in [0, 1]
        request_count (int): Requests served when the snapshot is taken

    Returns:
        LbWeightSnapshot: Weights indexed by directed link
    """
    longest = topology.max_link_length
    weights = []
    for link in topology.links:
        base = alpha * (link.length_km / longest)
        for index in (2 * link.id, 2 * link.id + 1):
            weights.append(base + (1 - alpha) * sor(state.links[index], spectrum_cfg))
    return LbWeightSnapshot(weights=tuple(weights), snapshot_request_count=request_count)


def _fit(ctx, req, path):
    """Modulation, slot count and first-fit placement on one candidate, or None."""
    if path is None:
        return None
    modulation = select_modulation(path.length_km, ctx.modulation_table)
    if modulation is None:
        return None
    slots = required_slots(req.b, modulation.m, ctx.spectrum_cfg)
    placement = first_fit_over_cores(ctx.state, path, slots, ctx.spectrum_cfg)
    if placement is None:
        return None
    return modulation, slots, placement


def _serve(req, ctx, route):
    """
    Try candidates in order and allocate the first one that fits.

    ``route`` is a zero-argument callable returning the candidates. Routing,
    modulation and spectrum search are timed; allocation bookkeeping is not
    part of the service latency.
    """
    started = time.perf_counter()
    tried = 0
    found = None
    for index, path in enumerate(route(), start=1):
        tried = index
        fit = _fit(ctx, req, path)
        if fit is not None:
            found = (index, path, fit)
            break
    latency = time.perf_counter() - started

    if found is None:
        return Decision(accepted=False, service_latency=latency, candidates_tried=tried)

    index, path, (modulation, slots, (core, start)) = found
    allocation = allocate(
        ctx.state, path, core, start, slots, req.t_departure, ctx.spectrum_cfg
    )
    return Decision(
        accepted=True,
        service_latency=latency,
        allocation=allocation,
        candidate_index=index,
        modulation=modulation,
        candidates_tried=tried,
    )


def serve_sp(req, ctx):
    """Single cached shortest path."""
    return _serve(
        req, ctx, lambda: [cached_shortest_path(ctx.cache, ctx.topology, req.s, req.d)]
    )


def serve_ksp(req, ctx):
    """Yen's K shortest paths in ascending length; the list is memoized per (s, d, K)."""
    k = ctx.policy_cfg.k

    def route():
        if ctx.cache is None:
            return yen_ksp(ctx.topology, req.s, req.d, k)
        return cache_lookup_or_compute(
            ctx.cache,
            CandidateListKey("KSP", req.s, req.d, k),
            lambda: yen_ksp(ctx.topology, req.s, req.d, k),
        )

    return _serve(req, ctx, route)


def serve_kdp(req, ctx):
    """Greedy link-disjoint candidates; may offer fewer than K."""
    return _serve(
        req,
        ctx,
        lambda: k_disjoint_paths(ctx.topology, req.s, req.d, ctx.policy_cfg.k, ctx.cache),
    )


def serve_lb(req, ctx):
    """
    Single least-cost path under the frozen NLW weights.

    Computed fresh for every request; the weights change at every snapshot so
    no path is memoized.
    """
    weights = ctx.lb_snapshot.weights if ctx.lb_snapshot else None
    return _serve(
        req, ctx, lambda: [shortest_path(ctx.topology, req.s, req.d, weights=weights)]
    )


def _cala_candidates(req, ctx):
    """
    Candidate 1 is the shortest path, candidates 2..K-1 are congestion-aware
    alternatives, candidate K is the congestion-aware disjoint path.

    Generated lazily: each alternative reads the SOR at the moment the previous
    candidate failed.
    """
    topology, s, d, k = ctx.topology, req.s, req.d, ctx.policy_cfg.k
    p1 = cached_shortest_path(ctx.cache, topology, s, d)
    yield p1
    if p1 is None or k == 1:
        return

    lmax = []
    previous = p1
    for _ in range(2, k):
        path, busiest = ca_alternative_path(
            topology, ctx.state, s, d, previous, lmax, ctx.spectrum_cfg, ctx.cache
        )
        lmax.append(busiest)
        if path is None:
            # further exclusions can only keep s and d apart
            break
        yield path
        previous = path
    else:
        if previous is not p1:
            lmax.append(max_sor_link(ctx.state, previous, ctx.spectrum_cfg))

    # P1's own busiest link is covered by excluding all of P1
    yield ca_disjoint_path(topology, s, d, p1, lmax[1:], ctx.cache)


def serve_cala(req, ctx):
    """Congestion- and latency-aware candidates served through the path cache."""
    return _serve(req, ctx, lambda: _cala_candidates(req, ctx))


SERVE_POLICIES = {
    "SP": serve_sp,
    "KSP": serve_ksp,
    "KDP": serve_kdp,
    "LB": serve_lb,
    "CALA": serve_cala,
}


def run_simulation(
    topology,
    spectrum_cfg,
    traffic_cfg,
    policy_cfg,
    modulation_table=DEFAULT_MODULATION_TABLE,
    requests=None,
    use_cache=True,
    check_invariants=False,
    trace=None,
    nru_links="directed",
    tau_from="warmup",
    config_echo=None,
):
    """
    Run one simulation: serve every arrival, release lightpaths on departure.

    Args:
        topology (Topology): Network
        spectrum_cfg (SpectrumConfig): Cores, slots, guard band
        traffic_cfg (TrafficConfig): Workload and seed
        policy_cfg (PolicyConfig): Serving policy
        modulation_table (Sequence[ModulationEntry]): Reach table
        requests (Optional[List[Request]]): Replayed stream instead of a generated one
        use_cache (bool): Memoize path computations (never used by LB)
        check_invariants (bool): Verify the spectrum ledger after every event
        trace (Optional[list]): Receives one dict per decision
        nru_links (str): "directed" or "undirected" link count in the NRU capacity
        tau_from (str): "warmup" (observation starts after warm-up) or "zero"
        config_echo (Optional[dict]): Stored verbatim in the report

    Returns:
        RunReport: Metrics of the requests recorded after warm-up
    """
    if nru_links not in ("directed", "undirected"):
        raise ValueError("nru_links must be 'directed' or 'undirected'")
    if tau_from not in ("warmup", "zero"):
        raise ValueError("tau_from must be 'warmup' or 'zero'")

    if requests is None:
        requests = generate_request_stream(topology, traffic_cfg)
    if not requests:
        raise ValueError("No requests to simulate")
    policy = policy_cfg.policy
    serve = SERVE_POLICIES[policy]
    ctx = SimulationContext(
        topology=topology,
        state=NetworkState.for_topology(topology, spectrum_cfg),
        spectrum_cfg=spectrum_cfg,
        policy_cfg=policy_cfg,
        cache=PathCache() if use_cache and policy != "LB" else None,
        modulation_table=tuple(modulation_table),
    )

    log_event(
        "simulation_started",
        {
            "topology": topology.name,
            "policy": policy,
            "k": policy_cfg.k,
            "requests": len(requests),
            "seed": traffic_cfg.seed,
        },
        level="debug",
    )

    acc = MetricsAccumulator()
    warmup = traffic_cfg.warmup_requests
    window_end = requests[-1].t_arrival
    window_start = 0.0
    departures = []
    served = 0

    for req in requests:
        while departures and departures[0].time <= req.t_arrival:
            release(ctx.state, heapq.heappop(departures).payload)
            if check_invariants:
                check_state(ctx.state)

        if policy == "LB" and served % policy_cfg.lb_update_interval == 0:
            ctx.lb_snapshot = take_lb_snapshot(
                topology, ctx.state, spectrum_cfg, policy_cfg.lb_alpha, served
            )
            log_event(
                "lb_weights_updated",
                {"requests_served": served, "max_weight": max(ctx.lb_snapshot.weights)},
                level="debug",
            )

        decision = serve(req, ctx)
        served += 1
        if decision.accepted:
            allocation = decision.allocation
            heapq.heappush(
                departures, Event.departure(allocation.expiry_time, allocation.lightpath_id)
            )
        if check_invariants:
            check_state(ctx.state)

        if req.id == warmup and tau_from == "warmup":
            window_start = req.t_arrival
        if req.id > warmup:
            record_decision(acc, req, decision, window_end)

        if trace is not None:
            allocation = decision.allocation
            trace.append(
                {
                    "id": req.id,
                    "accepted": decision.accepted,
                    "candidate": decision.candidate_index,
                    "core": allocation.core if allocation else None,
                    "start_slot": allocation.start_slot if allocation else None,
                    "data_slots": allocation.data_slots if allocation else None,
                    "hops": allocation.hops if allocation else None,
                }
            )

    tau = window_end - window_start
    report = finalize(
        acc,
        topology,
        spectrum_cfg,
        tau,
        directed_links=nru_links == "directed",
        cache=ctx.cache,
        config=config_echo,
    )

    log_event(
        "simulation_completed",
        {
            "topology": topology.name,
            "policy": policy,
            "rbp": report.rbp,
            "bbp": report.bbp,
            "cache_hits": report.cache_hits,
            "cache_misses": report.cache_misses,
        },
        level="debug",
    )
    return report
