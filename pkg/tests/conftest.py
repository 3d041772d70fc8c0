import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from facemtl.autodiff import set_mode


@pytest.fixture(autouse=True)
def _f64_mode():
    """Tests run in 64-bit test mode unless they opt into f32 themselves."""
    set_mode("f64")
    yield
    set_mode("f64")
