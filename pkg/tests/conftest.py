import logging

import numpy as np
import pytest

from lrom import config, rom
from lrom.geometry import GeometrySpec


@pytest.fixture(scope="session")
def spec1d():
    return GeometrySpec.from_dict(config.builtin("poisson_1d")["geometry"])


@pytest.fixture(scope="session")
def spec2d():
    return GeometrySpec.from_dict(config.builtin("poisson_2d")["geometry"])


def small_config(**kw):
    """16x16 version of the 1D benchmark, small enough for unit tests."""
    doc = config.builtin("poisson_1d")
    doc["mesh"].update({"nx": 16, "ny": 16})
    doc["sampling"].update({"n_train_deim": 60, "n_train_rb": 40})
    doc["clustering"].update({"n_clusters": 2, "n_clusters_deim": 3})
    cfg = config.to_rom_config(doc)
    from dataclasses import replace
    return replace(cfg, **kw) if kw else cfg


@pytest.fixture(scope="session")
def small_model():
    cfg = small_config()
    return rom.train(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_warnings(caplog):
    caplog.set_level(logging.WARNING)


def pytest_terminal_summary(terminalreporter):
    from oracles import ACCEPTANCE
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
