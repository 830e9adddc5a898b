from __future__ import annotations

import numpy as np
import pytest

from cyclenilm.waveform import DEFAULT_SAMPLE_RATE, NOMINAL_FREQ, Waveform


def sine(duration: float, amplitude: float = 1.0, freq: float = NOMINAL_FREQ,
         fs: float = DEFAULT_SAMPLE_RATE, phase: float = 0.0) -> np.ndarray:
    t = np.arange(int(round(duration * fs))) / fs
    return amplitude * np.sin(2 * np.pi * freq * t + phase)


@pytest.fixture
def sine_wave() -> Waveform:
    return Waveform(sine(0.1))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request) -> list:
    """Collects (criterion, passed, detail) rows printed after the run."""
    return request.config.stash.setdefault(_ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(_ACCEPTANCE_KEY, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(rows):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  "
                                    f"{detail}")
