from celery import Celery

from config import settings
from src.engine import PolicyConfig, run_simulation
from src.modulation import DEFAULT_MODULATION_TABLE, load_modulation_table
from src.spectrum import SpectrumConfig
from src.topology import load_topology
from src.traffic import TrafficConfig
from src.utils import log_event

celery = Celery(
    "tasks", broker=settings.CELERY_BROKER_URL, backend=settings.CELERY_RESULT_BACKEND
)
celery.conf.task_routes = {"tasks.run_cell": {"queue": "cells"}}
celery.conf.task_serializer = "json"
celery.conf.result_serializer = "json"
# one long simulation per worker process at a time
celery.conf.worker_prefetch_multiplier = 1
celery.conf.task_acks_late = True


def build_cell(
    topology_path,
    policy,
    load_erlangs,
    load_index,
    repetition,
    seed,
    spectrum,
    traffic,
    k=3,
    lb_alpha=0.5,
    lb_update_interval=1500,
    modulation_table=None,
    nru_links="directed",
    tau_from="warmup",
    use_cache=True,
):
    """
    Describe one (policy, load, repetition) run as a JSON-serialisable dict.

    Args:
        topology_path (str): Topology file
        policy (str): Serving policy name
        load_erlangs (float): Offered load
        load_index (int): Position of the load in the sweep
        repetition (int): Repetition number
        seed (int): Seed of the request stream
        spectrum (dict): SpectrumConfig fields
        traffic (dict): mu, bandwidth_set, total_requests, warmup_requests

    Returns:
        dict: Cell description accepted by run_cell
    """
    return {
        "topology": str(topology_path),
        "policy": policy,
        "k": k,
        "lb_alpha": lb_alpha,
        "lb_update_interval": lb_update_interval,
        "load_erlangs": float(load_erlangs),
        "load_index": int(load_index),
        "repetition": int(repetition),
        "seed": int(seed),
        "spectrum": dict(spectrum),
        "traffic": dict(traffic),
        "modulation_table": modulation_table,
        "nru_links": nru_links,
        "tau_from": tau_from,
        "use_cache": use_cache,
    }


def simulate_cell(cell):
    """
    Run the simulation a cell describes.

    Args:
        cell (dict): Output of build_cell

    Returns:
        dict: RunReport fields plus the cell's policy, load and repetition
    """
    topology = load_topology(cell["topology"])
    spectrum_cfg = SpectrumConfig.from_dict(cell["spectrum"])
    traffic = cell["traffic"]
    traffic_cfg = TrafficConfig.from_load(
        cell["load_erlangs"],
        topology.num_nodes,
        mu=traffic.get("mu", 1.0),
        bandwidth_set=tuple(traffic.get("bandwidth_set", TrafficConfig.bandwidth_set)),
        total_requests=traffic.get("total_requests", TrafficConfig.total_requests),
        warmup_requests=traffic.get("warmup_requests", TrafficConfig.warmup_requests),
        seed=cell["seed"],
    )
    policy_cfg = PolicyConfig(
        policy=cell["policy"],
        k=cell.get("k", 3),
        lb_alpha=cell.get("lb_alpha", 0.5),
        lb_update_interval=cell.get("lb_update_interval", 1500),
    )
    table = cell.get("modulation_table")
    modulation_table = load_modulation_table(table) if table else DEFAULT_MODULATION_TABLE

    report = run_simulation(
        topology,
        spectrum_cfg,
        traffic_cfg,
        policy_cfg,
        modulation_table=modulation_table,
        use_cache=cell.get("use_cache", True),
        check_invariants=settings.DEBUG_CHECKS,
        nru_links=cell.get("nru_links", "directed"),
        tau_from=cell.get("tau_from", "warmup"),
        config_echo=cell,
    )

    result = report.to_dict()
    result.update(
        {
            "policy": cell["policy"],
            "load_erlangs": cell["load_erlangs"],
            "load_index": cell["load_index"],
            "repetition": cell["repetition"],
            "seed": cell["seed"],
            "cache_hit_rate": report.cache_hit_rate,
        }
    )
    return result


@celery.task(bind=True, name="tasks.run_cell")
def run_cell(self, cell):
    """
    Celery entry point for one experiment cell.

    Args:
        cell (dict): Output of build_cell

    Returns:
        dict: Report of the run, see simulate_cell
    """
    try:
        result = simulate_cell(cell)
    except Exception as exc:
        log_event(
            "cell_failed",
            {
                "policy": cell.get("policy"),
                "load_erlangs": cell.get("load_erlangs"),
                "repetition": cell.get("repetition"),
                "error": str(exc),
            },
            level="error",
        )
        raise

    log_event(
        "cell_completed",
        {
            "task_id": self.request.id,
            "policy": result["policy"],
            "load_erlangs": result["load_erlangs"],
            "repetition": result["repetition"],
            "rbp": result["rbp"],
        },
    )
    return result
