import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ergonet", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("ergonet")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    """Keep CLI result caching inside the test's temporary directory."""
    monkeypatch.setenv("ERGONET_CACHE_DIR", str(tmp_path / "cache"))
