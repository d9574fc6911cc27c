import warnings

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from se3sync import liegroup as lg
from se3sync import potential as pt
from se3sync.config import FIG2_A, FIG2_B, FIG2_D
from se3sync.errors import SynergyWarning

# acceptance lines collected by test_acceptance.py, echoed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def fig2_w():
    return pt.validate_weight(FIG2_A, FIG2_B, FIG2_D)


@pytest.fixture(scope="session")
def synth_p(fig2_w):
    return pt.synth_params(fig2_w)


@pytest.fixture(scope="session")
def fig2_p(fig2_w):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SynergyWarning)
        return pt.synth_params(fig2_w, [0.3 * np.pi], gamma=0.33, delta=0.02)


def rand_rot(rng):
    # scipy's sampler, independent of the package's Haar sampler
    return Rotation.random(random_state=rng).as_matrix()


def rand_pose(rng, box=2.0):
    return lg.pose(rand_rot(rng), rng.uniform(-box, box, 3))
