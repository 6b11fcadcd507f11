import pytest


@pytest.fixture(autouse=True)
def isolated_output_dir(settings, tmp_path):
    """Runs started without --out-dir land in the test's temporary directory."""
    settings.SIM_OUTPUT_DIR = tmp_path / 'runs'
    settings.SIM_DEFAULT_PARALLEL = 1
    return settings.SIM_OUTPUT_DIR
