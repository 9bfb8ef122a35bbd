"""
Per-directed-link, per-core spectrum slot occupancy.

Each undirected link owns two independent spectrum states: index 2*id for the
u->v direction and 2*id+1 for v->u. A lightpath occupies a contiguous window in
one core on every directed link of its route, followed by guard slots at the
high-index end unless the window already ends at the last slot.
"""

from dataclasses import dataclass, field
from itertools import count

import numpy as np


class SpectrumConflictError(RuntimeError):
    """Raised when an allocation would overwrite an occupied slot."""


class UnknownLightpathError(KeyError):
    """Raised when releasing a lightpath id that is not active."""


class SpectrumInvariantError(RuntimeError):
    """Raised when occupancy disagrees with the active-lightpath ledger."""


@dataclass(frozen=True)
class SpectrumConfig:
    cores: int = 4
    slots_per_core: int = 320
    slot_bandwidth_ghz: float = 12.5
    guard_slots: int = 1

    def __post_init__(self):
        if self.cores < 1:
            raise ValueError("cores must be a positive integer")
        if self.slots_per_core < 1:
            raise ValueError("slots_per_core must be a positive integer")
        if self.slot_bandwidth_ghz <= 0:
            raise ValueError("slot_bandwidth_ghz must be positive")
        if self.guard_slots < 0:
            raise ValueError("guard_slots must be non-negative")

    @classmethod
    def from_dict(cls, data):
        return cls(**{key: data[key] for key in cls.__dataclass_fields__ if key in data})

    def to_dict(self):
        return {
            "cores": self.cores,
            "slots_per_core": self.slots_per_core,
            "slot_bandwidth_ghz": self.slot_bandwidth_ghz,
            "guard_slots": self.guard_slots,
        }


class LinkSpectrumState:
    """
    Occupancy of one directed fibre.

    The (cores x slots) boolean matrix is the reference state; ``masks`` mirrors
    each core as an int bitmap (bit i = slot i) for window searches.
    """

    __slots__ = ("occupancy", "occupied_count_per_core", "masks")

    def __init__(self, cfg):
        self.occupancy = np.zeros((cfg.cores, cfg.slots_per_core), dtype=bool)
        self.occupied_count_per_core = np.zeros(cfg.cores, dtype=np.int64)
        self.masks = [0] * cfg.cores

    def mark(self, core, start, stop, value):
        self.occupancy[core, start:stop] = value
        window = ((1 << (stop - start)) - 1) << start
        if value:
            self.masks[core] |= window
        else:
            self.masks[core] &= ~window
        self.occupied_count_per_core[core] = int(self.occupancy[core].sum())


@dataclass(frozen=True)
class Allocation:
    lightpath_id: int
    path: tuple
    core: int
    start_slot: int
    data_slots: int
    guard_slots_used: int
    expiry_time: float

    @property
    def hops(self):
        return len(self.path)

    @property
    def stop_slot(self):
        """One past the last slot held, guard included."""
        return self.start_slot + self.data_slots + self.guard_slots_used


@dataclass
class NetworkState:
    """Spectrum of every directed link plus the ledger of active lightpaths."""

    cfg: SpectrumConfig
    links: list
    active: dict = field(default_factory=dict)
    _ids: object = field(default_factory=lambda: count(1), repr=False)

    @classmethod
    def for_topology(cls, topology, cfg):
        return cls(cfg=cfg, links=[LinkSpectrumState(cfg) for _ in range(2 * topology.num_links)])

    def snapshot(self):
        """Copy of all occupancy matrices, for before/after comparisons."""
        return np.stack([link.occupancy.copy() for link in self.links])

    def next_lightpath_id(self):
        return next(self._ids)


def _directed(path):
    return tuple(getattr(path, "directed", path))


def sor(link_state, cfg):
    """
    Spectrum occupancy ratio of one directed link.

    Args:
        link_state (LinkSpectrumState): Link occupancy
        cfg (SpectrumConfig): Spectrum dimensions

    Returns:
        float: Occupied slots over all cores divided by |S| * |C|
    """
    return float(link_state.occupied_count_per_core.sum()) / (cfg.slots_per_core * cfg.cores)


def traffic_load(link_state):
    """Total occupied slots on a directed link, guard slots included."""
    return int(link_state.occupied_count_per_core.sum())


def _path_busy(state, directed, core):
    """Union bitmap of one core over the links of a path."""
    busy = 0
    for index in directed:
        busy |= state.links[index].masks[core]
    return busy


def _first_window(busy, slots, data_slots, guard_slots):
    if data_slots > slots:
        return None
    free = ~busy & ((1 << slots) - 1)

    width = data_slots + guard_slots
    if width <= slots:
        # bit i of runs survives iff slots i..i+span-1 are all free
        runs = free
        span = 1
        while span < width:
            step = min(span, width - span)
            runs &= runs >> step
            span += step
        if runs:
            return (runs & -runs).bit_length() - 1

    # the spectrum edge stands in for the guard band
    tail = slots - data_slots
    if guard_slots and busy >> tail == 0:
        return tail
    return None


def find_first_fit(state, path, core, data_slots, cfg):
    """
    Lowest starting slot that satisfies continuity, contiguity and the guard rule.

    Args:
        state (NetworkState): Network spectrum
        path (Path or Sequence[int]): Route, as a Path or directed link indices
        core (int): Core index, identical on every link
        data_slots (int): Slots carrying data
        cfg (SpectrumConfig): Spectrum dimensions and guard width

    Returns:
        Optional[int]: Starting slot index, None when no window exists
    """
    directed = _directed(path)
    if not directed or data_slots < 1:
        raise ValueError("find_first_fit needs a non-empty path and data_slots >= 1")
    busy = _path_busy(state, directed, core)
    return _first_window(busy, cfg.slots_per_core, data_slots, cfg.guard_slots)


def first_fit_over_cores(state, path, data_slots, cfg):
    """
    First-fit core selection followed by first-fit spectrum assignment.

    Args:
        state (NetworkState): Network spectrum
        path (Path or Sequence[int]): Route
        data_slots (int): Slots carrying data
        cfg (SpectrumConfig): Spectrum dimensions

    Returns:
        Optional[Tuple[int, int]]: (core, start slot) of the first fit, None if blocked
    """
    directed = _directed(path)
    for core in range(cfg.cores):
        busy = _path_busy(state, directed, core)
        start = _first_window(busy, cfg.slots_per_core, data_slots, cfg.guard_slots)
        if start is not None:
            return core, start
    return None


def allocate(state, path, core, start_slot, data_slots, expiry_time, cfg):
    """
    Occupy a slot window on every link of a path and register the lightpath.

    Args:
        state (NetworkState): Network spectrum
        path (Path or Sequence[int]): Route
        core (int): Core index
        start_slot (int): First data slot (SSI)
        data_slots (int): Data slot count (SS_r)
        expiry_time (float): Simulated departure time
        cfg (SpectrumConfig): Spectrum dimensions and guard width

    Returns:
        Allocation: The registered lightpath

    Raises:
        SpectrumConflictError: If any slot of the window is already occupied
    """
    directed = _directed(path)
    end = start_slot + data_slots
    if not directed or start_slot < 0 or data_slots < 1 or end > cfg.slots_per_core:
        raise ValueError(f"Window [{start_slot}, {end}) does not fit the spectrum")

    guard = min(cfg.guard_slots, cfg.slots_per_core - end)
    stop = end + guard
    for index in directed:
        if state.links[index].occupancy[core, start_slot:stop].any():
            raise SpectrumConflictError(
                f"Slots [{start_slot}, {stop}) of core {core} busy on directed link {index}"
            )

    for index in directed:
        state.links[index].mark(core, start_slot, stop, True)

    allocation = Allocation(
        lightpath_id=state.next_lightpath_id(),
        path=directed,
        core=core,
        start_slot=start_slot,
        data_slots=data_slots,
        guard_slots_used=guard,
        expiry_time=expiry_time,
    )
    state.active[allocation.lightpath_id] = allocation
    return allocation


def release(state, lightpath_id):
    """
    Free every slot (data and guard) of an active lightpath.

    Args:
        state (NetworkState): Network spectrum
        lightpath_id (int): Id returned by allocate

    Raises:
        UnknownLightpathError: If the id is not active
    """
    allocation = state.active.pop(lightpath_id, None)
    if allocation is None:
        raise UnknownLightpathError(lightpath_id)
    for index in allocation.path:
        state.links[index].mark(
            allocation.core, allocation.start_slot, allocation.stop_slot, False
        )


def check_state(state):
    """
    Rebuild occupancy from the ledger and compare it with the live matrices.

    Raises:
        SpectrumInvariantError: On overlap between lightpaths, slots without an owner,
        or per-core counters and bitmaps out of step
    """
    owners = np.zeros((len(state.links), state.cfg.cores, state.cfg.slots_per_core), dtype=np.int64)
    for allocation in state.active.values():
        for index in allocation.path:
            owners[index, allocation.core, allocation.start_slot:allocation.stop_slot] += 1

    if (owners > 1).any():
        raise SpectrumInvariantError("A slot is owned by more than one lightpath")
    if not np.array_equal(owners.astype(bool), state.snapshot()):
        raise SpectrumInvariantError("Occupancy does not match the active lightpaths")
    for index, link in enumerate(state.links):
        if not np.array_equal(link.occupied_count_per_core, link.occupancy.sum(axis=1)):
            raise SpectrumInvariantError(f"Occupied-slot counters stale on directed link {index}")
        for core, row in enumerate(link.occupancy):
            if link.masks[core] != sum(1 << int(slot) for slot in np.flatnonzero(row)):
                raise SpectrumInvariantError(
                    f"Slot bitmap of core {core} stale on directed link {index}"
                )


def dump_occupancy(state, topology):
    """
    Text dump of all occupancy, one line per directed link and core.

    Args:
        state (NetworkState): Network spectrum
        topology (Topology): Used for endpoint labels

    Returns:
        str: Lines of the form "u->v c<core> 0011..."
    """
    lines = []
    for link in topology.links:
        for direction, (a, b) in enumerate(((link.u, link.v), (link.v, link.u))):
            matrix = state.links[2 * link.id + direction].occupancy
            for core in range(state.cfg.cores):
                bits = "".join("1" if slot else "0" for slot in matrix[core])
                lines.append(f"{a}->{b} c{core} {bits}")
    return "\n".join(lines) + "\n"
