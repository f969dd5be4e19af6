import random

import pytest

from skanf.bytecode import disassemble
from skanf.deobfuscator import deobfuscate
from skanf.fixtures.bundles import bundle_path
from skanf.fixtures.generator import BOT, fixture_world, named
from skanf.symbolic import solver


@pytest.fixture(scope="session", autouse=True)
def solver_models_verified():
    """Every model the solver hands out during the run was re-checked concretely."""
    yield
    st = solver.SOLVER_STATS
    assert st["verified"] == st["models"], st


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture(scope="session")
def destroyer():
    code, gt = named("destroyer-inu")
    return code, gt, deobfuscate(disassemble(code)), fixture_world(gt)


@pytest.fixture(scope="session")
def bundles():
    return bundle_path


@pytest.fixture(scope="session")
def bot():
    return BOT


def pytest_collection_modifyitems(config, items):
    # acceptance last, so the model-soundness line sees every solver call of the run
    items.sort(key=lambda it: it.path.name == "test_acceptance.py")
