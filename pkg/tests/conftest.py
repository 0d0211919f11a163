import pytest

from fcldvr.scenario import PRESETS, sag_fault_scenario
from fcldvr.sim import run_scenario


@pytest.fixture(scope="session")
def table2():
    return PRESETS["table2"]


@pytest.fixture(scope="session")
def sag_fault_run():
    scn = sag_fault_scenario()
    return scn, run_scenario(scn)
