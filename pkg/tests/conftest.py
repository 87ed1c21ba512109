import pytest

from biofilmsim import PRESET_NAMES, preset, run


@pytest.fixture(scope="session")
def preset_runs():
    """Run every built-in scenario once; shared by the slower suites."""
    return {name: run(preset(name)) for name in PRESET_NAMES}
