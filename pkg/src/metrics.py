"""
Blocking, utilisation and latency metrics, plus repetition-level aggregation.

Definitions, for the requests recorded after warm-up:

    RBP = R_b / (R_b + R_a)
    BBP = sum of blocked bandwidth / sum of requested bandwidth
    NRU = sum over accepted of SS_r * H_p * T_h / (|E| * |C| * |S| * tau)
    ASL = sum over accepted of service latency / R_a
    AHL = sum over accepted of H_p / R_a
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

METRIC_NAMES = ("rbp", "bbp", "nru", "asl_seconds", "ahl")


@dataclass
class MetricsAccumulator:
    r_accepted: int = 0
    r_blocked: int = 0
    bw_blocked_gbps: float = 0.0
    bw_total_gbps: float = 0.0
    nru_numerator: float = 0.0
    latency_sum: float = 0.0
    hops_sum: int = 0


@dataclass
class RunReport:
    rbp: float
    bbp: float
    nru: float
    asl_seconds: float
    ahl: float
    observation_time_s: float
    cache_hits: int = 0
    cache_misses: int = 0
    counts: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def cache_hit_rate(self):
        lookups = self.cache_hits + self.cache_misses
        return self.cache_hits / lookups if lookups else None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**{key: data[key] for key in cls.__dataclass_fields__ if key in data})


@dataclass
class AggregateReport:
    n: int
    confidence: float
    mean: dict
    half_width: dict

    def to_dict(self):
        return asdict(self)


def record_decision(acc, req, decision, window_end=None):
    """
    Add one post-warm-up request to the running tallies.

    Args:
        acc (MetricsAccumulator): Tallies of the run
        req (Request): The request
        decision (Decision): Outcome of serving it
        window_end (Optional[float]): End of the observation window; holding times
            reaching past it are truncated
    """
    acc.bw_total_gbps += req.b
    if not decision.accepted:
        acc.r_blocked += 1
        acc.bw_blocked_gbps += req.b
        return

    hold = req.t_hold
    if window_end is not None:
        hold = max(0.0, min(hold, window_end - req.t_arrival))
    hops = decision.allocation.hops
    acc.r_accepted += 1
    acc.nru_numerator += decision.allocation.data_slots * hops * hold
    acc.latency_sum += decision.service_latency
    acc.hops_sum += hops


def finalize(acc, topology, spectrum_cfg, tau, directed_links=True, cache=None, config=None):
    """
    Turn tallies into the run's metric values.

    Args:
        acc (MetricsAccumulator): Tallies of the run
        topology (Topology): Network, for the link count
        spectrum_cfg (SpectrumConfig): Cores and slots per core
        tau (float): Observation time, positive
        directed_links (bool): Count each direction of a link in the NRU capacity
        cache (Optional[PathCache]): Source of the hit/miss counters
        config (Optional[dict]): Configuration echo stored with the report

    Returns:
        RunReport: Metrics plus raw numerators and denominators
    """
    if tau <= 0:
        raise ValueError(f"Observation time must be positive, got {tau}")

    requests = acc.r_accepted + acc.r_blocked
    links = topology.num_links * (2 if directed_links else 1)
    capacity = links * spectrum_cfg.cores * spectrum_cfg.slots_per_core * tau

    return RunReport(
        rbp=acc.r_blocked / requests if requests else 0.0,
        bbp=acc.bw_blocked_gbps / acc.bw_total_gbps if acc.bw_total_gbps else 0.0,
        nru=acc.nru_numerator / capacity,
        asl_seconds=acc.latency_sum / acc.r_accepted if acc.r_accepted else None,
        ahl=acc.hops_sum / acc.r_accepted if acc.r_accepted else None,
        observation_time_s=tau,
        cache_hits=cache.hits if cache is not None else 0,
        cache_misses=cache.misses if cache is not None else 0,
        counts={**asdict(acc), "nru_capacity": capacity, "nru_links": links},
        config=dict(config or {}),
    )


def t_quantile(df, confidence=0.99):
    """Two-sided Student-t critical value for the given degrees of freedom."""
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"Unsupported confidence level {confidence}")
    if df < 1:
        raise ValueError("Degrees of freedom must be at least 1")
    return float(stats.t.ppf((1.0 + confidence) / 2.0, df))


def mean_confidence(values, confidence=0.99):
    """
    Mean and confidence half-width of repetition values.

    Args:
        values (Sequence[float]): One value per repetition, None entries ignored
        confidence (float): Two-sided level, e.g. 0.99

    Returns:
        Tuple[Optional[float], Optional[float]]: (mean, half-width); half-width is
        None with fewer than two values, both None with no values
    """
    data = np.asarray([v for v in values if v is not None], dtype=float)
    if data.size == 0:
        return None, None
    mean = float(data.mean())
    if data.size < 2:
        return mean, None
    std = float(data.std(ddof=1))
    return mean, t_quantile(data.size - 1, confidence) * std / math.sqrt(data.size)


def aggregate(reports, confidence=0.99):
    """
    Student-t intervals of every metric over repetitions.

    Args:
        reports (Sequence[RunReport]): One report per repetition, at least two
        confidence (float): Two-sided level, e.g. 0.99

    Returns:
        AggregateReport: Per-metric mean and half-width
    """
    if len(reports) < 2:
        raise ValueError("Aggregation needs at least two repetitions")
    mean = {}
    half_width = {}
    for name in METRIC_NAMES:
        mean[name], half_width[name] = mean_confidence(
            [getattr(report, name) for report in reports], confidence
        )
    return AggregateReport(n=len(reports), confidence=confidence, mean=mean, half_width=half_width)


def erlang_b(load, servers):
    """
    Erlang-B blocking probability, by the numerically stable recursion.

    Args:
        load (float): Offered load in Erlangs
        servers (int): Number of servers

    Returns:
        float: Probability an arrival finds every server busy
    """
    blocking = 1.0
    for n in range(1, servers + 1):
        blocking = load * blocking / (n + load * blocking)
    return blocking
