import math
from pathlib import Path

import pytest

from src.spectrum import NetworkState, SpectrumConfig, allocate
from src.topology import build_topology, load_topology

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "topologies"

# Nine-node corridor network, ids are node numbers minus one.
# e1 = 4-5 (link 2) and e2 = 6-5 (link 7) carry every short route from 1 to 9.
CORRIDOR_LINKS = [
    (0, 1, 100),  # 0: 1-2
    (1, 3, 100),  # 1: 2-4
    (3, 4, 100),  # 2: 4-5  e1
    (4, 7, 100),  # 3: 5-8
    (7, 8, 100),  # 4: 8-9
    (0, 2, 100),  # 5: 1-3
    (2, 5, 160),  # 6: 3-6
    (5, 4, 100),  # 7: 6-5  e2
    (4, 6, 100),  # 8: 5-7
    (6, 8, 150),  # 9: 7-9
    (5, 6, 400),  # 10: 6-7
    (2, 3, 200),  # 11: 3-4
]
E1 = 2
E2 = 7


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical runs, deselect with -m 'not slow'")


@pytest.fixture
def triangle():
    """A=0, B=1, C=2; the direct A-C link is shorter than A-B-C."""
    return build_topology("triangle", 3, [(0, 1, 100), (1, 2, 100), (0, 2, 150)])


@pytest.fixture
def line():
    return build_topology("line", 3, [(0, 1, 100), (1, 2, 100)])


@pytest.fixture
def pair():
    return build_topology("pair", 2, [(0, 1, 100)])


@pytest.fixture
def corridor():
    return build_topology("corridor", 9, CORRIDOR_LINKS)


@pytest.fixture
def small_spectrum():
    return SpectrumConfig(cores=2, slots_per_core=16, slot_bandwidth_ghz=12.5, guard_slots=1)


@pytest.fixture
def german():
    return load_topology(DATA_DIR / "german.json")


def saturate(state, link_ids, cfg):
    """Fill every core of both directions of the given links."""
    for link_id in link_ids:
        for index in (2 * link_id, 2 * link_id + 1):
            for core in range(cfg.cores):
                allocate(state, [index], core, 0, cfg.slots_per_core, math.inf, cfg)


@pytest.fixture
def congested_corridor(corridor, small_spectrum):
    """Corridor network with e1 and e2 fully occupied in both directions."""
    state = NetworkState.for_topology(corridor, small_spectrum)
    saturate(state, [E1, E2], small_spectrum)
    return corridor, state
