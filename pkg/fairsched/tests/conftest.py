import pytest

from fairsched.experiment import bundled_scenario_path
from fairsched.scenario import Scenario, load_scenario, make_scenario


@pytest.fixture
def s0() -> Scenario:
    """two servers with mirrored capacities, two mirrored frameworks"""
    return load_scenario(bundled_scenario_path("s0"))


@pytest.fixture
def classic() -> Scenario:
    """single server c=(9,18); d_1=(1,4), d_2=(3,1)"""
    return make_scenario([[9, 18]], [[1, 4], [3, 1]])


@pytest.fixture
def small_s0() -> Scenario:
    """s0 with capacities scaled down to (10,3), (3,10)"""
    return make_scenario([[10, 3], [3, 10]], [[5, 1], [1, 5]])
