import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng_seeded():
    import numpy as np

    return np.random.default_rng(12345)


@pytest.fixture
def tight_cfg():
    """EP config for tests that compare against fixed points."""
    from stancekit.inference import FitConfig

    return FitConfig(ep_tolerance=1e-12, ep_max_sweeps=500, damping=0.9)
