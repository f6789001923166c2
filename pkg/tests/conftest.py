import numpy as np
import pytest

from fransim.channel import FAP, FUE, ChannelParams, ChannelRealization, Topology

ACCEPTANCE_LINES: list[str] = []


def small_topology(servers, n_faps=None, cache=None, speeds=None):
    """F-APs on a line, each F-UE at its server's centre (positions do not matter
    for hand-built gains). ``servers[i]`` is F-UE i's serving node id."""
    n_faps = max(servers) if n_faps is None else n_faps
    cache = cache or [0.5] * n_faps
    faps = tuple(FAP(i + 1, (100.0 * (i + 1), 0.0), 30.0, cache[i]) for i in range(n_faps))
    pos = {0: (0.0, 0.0), **{f.id: f.position for f in faps}}
    fues = tuple(FUE(i, pos[s], s, (speeds or [1.5] * len(servers))[i]) for i, s in enumerate(servers))
    return Topology((0.0, 0.0), 500.0, faps, fues)


def unit_params(n_subchannels, noise=1.0, bandwidth=1.0):
    return ChannelParams(bandwidth=bandwidth, n_subchannels=n_subchannels, noise_power=noise)


def random_gains(rng, n_fues, n_rx, n_sub, low=0.05, high=5.0):
    return ChannelRealization(rng.uniform(low, high, (n_fues, n_rx, n_sub)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
