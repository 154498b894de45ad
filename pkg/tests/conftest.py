import pytest

from deltaspec.registry import ConstantsRegistry, get_registry, set_registry


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance runs (deselect with '-m \"not slow\"')")


@pytest.fixture
def fresh_registry():
    previous = get_registry()
    registry = ConstantsRegistry()
    set_registry(registry)
    yield registry
    set_registry(previous)
