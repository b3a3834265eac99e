import numpy as np
import pytest

import selfadjust_toolbox as sat

np.set_printoptions(precision=2, suppress=True)


@pytest.fixture(autouse=True)
def _debug_engine():
    with sat.rc_context(**{'engine.debug': True}):
        yield
    sat.shutdown_pool()
