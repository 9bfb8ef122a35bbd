import math

import numpy as np
import pytest

from src.routing import make_path
from src.spectrum import (
    NetworkState,
    SpectrumConfig,
    SpectrumConflictError,
    SpectrumInvariantError,
    UnknownLightpathError,
    allocate,
    check_state,
    dump_occupancy,
    find_first_fit,
    first_fit_over_cores,
    release,
    sor,
    traffic_load,
)


@pytest.fixture
def state(line, small_spectrum):
    return NetworkState.for_topology(line, small_spectrum)


class TestSpectrumConfig:
    def test_defaults(self):
        cfg = SpectrumConfig()
        assert (cfg.cores, cfg.slots_per_core, cfg.slot_bandwidth_ghz, cfg.guard_slots) == (
            4,
            320,
            12.5,
            1,
        )

    @pytest.mark.parametrize(
        "kwargs",
        [{"cores": 0}, {"slots_per_core": 0}, {"slot_bandwidth_ghz": 0}, {"guard_slots": -1}],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SpectrumConfig(**kwargs)

    def test_from_dict_ignores_unknown_keys(self):
        cfg = SpectrumConfig.from_dict({"cores": 7, "colour": "blue"})
        assert cfg.cores == 7
        assert SpectrumConfig.from_dict(cfg.to_dict()) == cfg


class TestFirstFit:
    def test_empty_spectrum_starts_at_zero(self, state, small_spectrum):
        assert find_first_fit(state, [0, 2], 0, 4, small_spectrum) == 0

    def test_guard_slot_separates_neighbours(self, state, small_spectrum):
        allocate(state, [0], 0, 0, 3, 1.0, small_spectrum)
        # slots 0-2 data, slot 3 guard
        assert find_first_fit(state, [0], 0, 2, small_spectrum) == 4

    def test_window_must_be_free_on_every_link(self, state, small_spectrum):
        allocate(state, [0], 0, 0, 3, 1.0, small_spectrum)
        allocate(state, [2], 0, 4, 3, 1.0, small_spectrum)
        assert find_first_fit(state, [0, 2], 0, 3, small_spectrum) == 8

    def test_spectrum_edge_replaces_guard(self, state, small_spectrum):
        allocate(state, [0], 0, 0, 13, 1.0, small_spectrum)
        # slots 14 and 15 are free; a two-slot request needs no guard at the edge
        assert find_first_fit(state, [0], 0, 2, small_spectrum) == 14
        allocation = allocate(state, [0], 0, 14, 2, 1.0, small_spectrum)
        assert allocation.guard_slots_used == 0
        assert find_first_fit(state, [0], 0, 1, small_spectrum) is None

    def test_full_width_request(self, state, small_spectrum):
        assert find_first_fit(state, [0], 1, 16, small_spectrum) == 0
        assert find_first_fit(state, [0], 1, 17, small_spectrum) is None

    def test_without_guard(self, line):
        cfg = SpectrumConfig(cores=1, slots_per_core=8, guard_slots=0)
        state = NetworkState.for_topology(line, cfg)
        allocate(state, [0], 0, 0, 3, 1.0, cfg)
        assert find_first_fit(state, [0], 0, 5, cfg) == 3

    def test_cores_are_scanned_in_order(self, state, small_spectrum):
        allocate(state, [0], 0, 0, 16, 1.0, small_spectrum)
        assert first_fit_over_cores(state, [0, 2], 4, small_spectrum) == (1, 0)
        allocate(state, [2], 1, 0, 16, 1.0, small_spectrum)
        assert first_fit_over_cores(state, [0, 2], 4, small_spectrum) is None

    def test_accepts_path_objects(self, line, state, small_spectrum):
        path = make_path(line, [2, 1, 0])
        allocate(state, path, 0, 0, 2, 1.0, small_spectrum)
        assert state.links[3].occupancy[0, :3].all()
        assert not state.links[2].occupancy.any()
        assert find_first_fit(state, path, 0, 1, small_spectrum) == 3

    def test_rejects_empty_path(self, state, small_spectrum):
        with pytest.raises(ValueError):
            find_first_fit(state, [], 0, 1, small_spectrum)


def scan_first_fit(rows, data_slots, guard_slots):
    """Slot-by-slot search over the busy rows of one core, one row per link."""
    busy = np.logical_or.reduce(rows)
    slots = busy.size
    for start in range(slots - data_slots + 1):
        end = start + data_slots
        if busy[start:end].any():
            continue
        if end == slots:
            return start
        if end + guard_slots <= slots and not busy[end:end + guard_slots].any():
            return start
    return None


class TestFirstFitAgainstScan:
    @pytest.mark.parametrize("guard_slots", [0, 1, 2])
    def test_matches_slot_scan(self, corridor, guard_slots):
        rng = np.random.default_rng(40 + guard_slots)
        routes = [make_path(corridor, nodes) for nodes in ([0, 1], [0, 1, 3], [0, 2, 5, 4, 7])]
        edge_hits = 0
        for trial in range(400):
            slots = int(rng.integers(1, 72))
            cfg = SpectrumConfig(cores=2, slots_per_core=slots, guard_slots=guard_slots)
            state = NetworkState.for_topology(corridor, cfg)
            density = rng.uniform(0.0, 0.7)
            for link in state.links:
                for core in range(cfg.cores):
                    for slot in np.flatnonzero(rng.random(slots) < density):
                        link.mark(core, int(slot), int(slot) + 1, True)

            route = routes[trial % len(routes)]
            data_slots = int(rng.integers(1, min(slots, 8) + 1))
            expected = []
            for core in range(cfg.cores):
                rows = [state.links[index].occupancy[core] for index in route.directed]
                start = scan_first_fit(rows, data_slots, guard_slots)
                assert find_first_fit(state, route, core, data_slots, cfg) == start
                expected.append(start)
                if guard_slots and start is not None and start + data_slots == slots:
                    edge_hits += 1

            first = next(
                ((core, start) for core, start in enumerate(expected) if start is not None), None
            )
            assert first_fit_over_cores(state, route, data_slots, cfg) == first

        if guard_slots:
            assert edge_hits > 0

    def test_wide_guard_needs_the_whole_band(self, line):
        # a window at slot 8 leaves room for one of the two guard slots
        cfg = SpectrumConfig(cores=1, slots_per_core=12, guard_slots=2)
        state = NetworkState.for_topology(line, cfg)
        state.links[0].mark(0, 0, 8, True)
        assert find_first_fit(state, [0], 0, 3, cfg) == 9
        assert scan_first_fit([state.links[0].occupancy[0]], 3, 2) == 9


class TestAllocateRelease:
    def test_conflict(self, state, small_spectrum):
        allocate(state, [0, 2], 0, 0, 3, 1.0, small_spectrum)
        with pytest.raises(SpectrumConflictError):
            allocate(state, [2], 0, 3, 2, 1.0, small_spectrum)

    def test_window_outside_spectrum(self, state, small_spectrum):
        with pytest.raises(ValueError):
            allocate(state, [0], 0, 10, 7, 1.0, small_spectrum)

    def test_release_restores_state(self, state, small_spectrum):
        before = state.snapshot()
        allocation = allocate(state, [0, 2], 1, 5, 4, 2.5, small_spectrum)
        assert allocation.hops == 2
        assert allocation.stop_slot == 10
        assert state.links[0].occupied_count_per_core.tolist() == [0, 5]

        release(state, allocation.lightpath_id)
        assert np.array_equal(state.snapshot(), before)
        assert state.active == {}

    def test_release_unknown(self, state):
        with pytest.raises(UnknownLightpathError):
            release(state, 42)
        assert issubclass(UnknownLightpathError, KeyError)

    def test_double_release(self, state, small_spectrum):
        allocation = allocate(state, [0], 0, 0, 1, 1.0, small_spectrum)
        release(state, allocation.lightpath_id)
        with pytest.raises(UnknownLightpathError):
            release(state, allocation.lightpath_id)

    def test_lightpath_ids_are_unique(self, state, small_spectrum):
        ids = {
            allocate(state, [0], 0, 2 * i, 1, 1.0, small_spectrum).lightpath_id for i in range(5)
        }
        assert len(ids) == 5


class TestOccupancyRatio:
    def test_sor_counts_guard_slots(self, state, small_spectrum):
        allocate(state, [0], 0, 0, 4, 1.0, small_spectrum)
        assert sor(state.links[0], small_spectrum) == pytest.approx(5 / 32)
        assert traffic_load(state.links[0]) == 5

    def test_directions_are_independent(self, state, small_spectrum):
        allocate(state, [0], 0, 0, 4, 1.0, small_spectrum)
        assert sor(state.links[1], small_spectrum) == 0.0


class TestInvariants:
    def test_check_state_detects_orphan_slots(self, state, small_spectrum):
        allocate(state, [0], 0, 0, 2, 1.0, small_spectrum)
        check_state(state)
        state.links[2].occupancy[1, 7] = True
        with pytest.raises(SpectrumInvariantError):
            check_state(state)

    def test_check_state_detects_stale_counters(self, state, small_spectrum):
        allocate(state, [0], 0, 0, 2, 1.0, small_spectrum)
        state.links[0].occupied_count_per_core[0] = 0
        with pytest.raises(SpectrumInvariantError, match="counters"):
            check_state(state)

    def test_check_state_detects_stale_bitmap(self, state, small_spectrum):
        allocate(state, [0], 1, 4, 2, 1.0, small_spectrum)
        check_state(state)
        state.links[0].masks[1] = 0
        with pytest.raises(SpectrumInvariantError, match="bitmap"):
            check_state(state)

    def test_randomised_operations(self, corridor):
        cfg = SpectrumConfig(cores=3, slots_per_core=24, guard_slots=1)
        state = NetworkState.for_topology(corridor, cfg)
        rng = np.random.default_rng(11)
        empty = state.snapshot()
        node_routes = [[0, 1, 3, 4, 7, 8], [0, 2, 5, 4], [5, 6], [2, 3, 4, 6, 8], [7, 4]]
        routes = [make_path(corridor, nodes) for nodes in node_routes]
        routes += [make_path(corridor, list(reversed(nodes))) for nodes in node_routes]

        for step in range(100_000):
            if state.active and rng.random() < 0.45:
                release(state, int(rng.choice(list(state.active))))
            else:
                route = routes[rng.integers(len(routes))]
                slots = int(rng.integers(1, 7))
                placement = first_fit_over_cores(state, route, slots, cfg)
                if placement is not None:
                    allocate(state, route, placement[0], placement[1], slots, math.inf, cfg)
            if step % 1000 == 0:
                check_state(state)

        check_state(state)
        for lightpath_id in list(state.active):
            release(state, lightpath_id)
        assert np.array_equal(state.snapshot(), empty)


def test_dump_occupancy(triangle):
    cfg = SpectrumConfig(cores=1, slots_per_core=4, guard_slots=1)
    state = NetworkState.for_topology(triangle, cfg)
    allocate(state, make_path(triangle, [1, 0]), 0, 0, 1, 1.0, cfg)
    lines = dump_occupancy(state, triangle).splitlines()

    assert len(lines) == 6
    assert lines[0] == "0->1 c0 0000"
    assert lines[1] == "1->0 c0 1100"
