import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from swsampling.harness import ExperimentConfig, Reference, make_data, reference_estimate  # noqa: E402


@pytest.fixture(scope="session")
def ref_cache(request):
    """Reference values are expensive; keep them in pytest's cache directory."""
    return request.config.cache.mkdir("swsampling-references")


@pytest.fixture(scope="session")
def gauss3():
    return make_data(ExperimentConfig(dims=[3]), 3)


@pytest.fixture(scope="session")
def gauss3_ref(gauss3, ref_cache):
    mu, nu = gauss3
    return reference_estimate(mu, nu, Reference("fibonacci_lattice", 200_000), cache_dir=ref_cache)
