import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from dfmm.eldf import Eldf


@pytest.fixture
def unit_curve():
    """Constant density 1 over a wide domain: value == volume."""
    def make(side="bid", v_hi=10_000.0):
        return Eldf(c2=0.0, c1=0.0, c0=1.0, side=side, v_lo=0.0, v_hi=v_hi)
    return make
