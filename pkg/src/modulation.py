import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ModulationEntry:
    name: str
    m: int
    supported_rate_gbps: float
    max_reach_km: float


# Distance-adaptive formats, highest reach first. Reach limits are inclusive.
DEFAULT_MODULATION_TABLE = (
    ModulationEntry("DP-BPSK", 1, 25.0, 8000.0),
    ModulationEntry("DP-QPSK", 2, 50.0, 4000.0),
    ModulationEntry("DP-8QAM", 3, 75.0, 2000.0),
    ModulationEntry("DP-16QAM", 4, 100.0, 1000.0),
    ModulationEntry("DP-32QAM", 5, 125.0, 500.0),
    ModulationEntry("DP-64QAM", 6, 150.0, 250.0),
)


def load_modulation_table(records):
    """
    Build a modulation table from configuration records.

    Args:
        records (List[dict]): Items with name, m, supported_rate_gbps, max_reach_km

    Returns:
        Tuple[ModulationEntry, ...]: Entries sorted by ascending m

    Raises:
        ValueError: If a record is malformed or a higher m does not have a shorter reach
    """
    try:
        table = sorted(
            (
                ModulationEntry(
                    name=str(record["name"]),
                    m=int(record["m"]),
                    supported_rate_gbps=float(record["supported_rate_gbps"]),
                    max_reach_km=float(record["max_reach_km"]),
                )
                for record in records
            ),
            key=lambda entry: entry.m,
        )
    except (KeyError, TypeError) as e:
        raise ValueError(f"Malformed modulation table record: {e}") from e

    if not table:
        raise ValueError("Modulation table must contain at least one entry")
    for lower, higher in zip(table, table[1:]):
        if higher.m == lower.m or higher.max_reach_km >= lower.max_reach_km:
            raise ValueError(
                f"Modulation table not strictly ordered at {lower.name} -> {higher.name}"
            )
    if table[0].m < 1 or table[0].max_reach_km <= 0:
        raise ValueError("Modulation entries need m >= 1 and a positive reach")
    return tuple(table)


def select_modulation(path_length_km, table=DEFAULT_MODULATION_TABLE):
    """
    Pick the most efficient format whose reach covers the path.

    Args:
        path_length_km (float): Path length L_p
        table (Sequence[ModulationEntry]): Modulation table

    Returns:
        Optional[ModulationEntry]: Entry with the largest m that reaches, None if the
        path is longer than every reach in the table
    """
    best = None
    for entry in table:
        if entry.max_reach_km >= path_length_km and (best is None or entry.m > best.m):
            best = entry
    return best


def required_slots(bandwidth_gbps, m, cfg):
    """
    Number of slots a dual-polarised signal needs: ceil(b / (2 * B_s * m)).

    Args:
        bandwidth_gbps (float): Requested rate b
        m (int): Bits per symbol of the chosen format
        cfg (SpectrumConfig): Provides the slot bandwidth B_s

    Returns:
        int: Slot count, at least 1
    """
    if m < 1 or bandwidth_gbps <= 0:
        raise ValueError(f"Invalid slot computation input b={bandwidth_gbps}, m={m}")
    # round() absorbs float noise such as 3.0000000000000004
    return max(1, math.ceil(round(bandwidth_gbps / (2 * cfg.slot_bandwidth_ghz * m), 9)))
