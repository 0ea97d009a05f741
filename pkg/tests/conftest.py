import time

import numpy as np
import pytest

from rotorvib.signal_core import ChannelRecord


def pytest_sessionstart(session):
    session.config.rotorvib_started = time.perf_counter()


def pytest_collection_modifyitems(session, config, items):
    # acceptance checks run last so the runtime criterion sees the whole session
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")


def sine_channel(freq, amp=1.0, fs=2048.0, n=4096, phase=0.0, offset=0.0, unit="m", role="vibration", name="x"):
    t = np.arange(n) / fs
    return ChannelRecord(name, offset + amp * np.sin(2 * np.pi * freq * t + phase), fs, unit, role)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
