from __future__ import annotations

from pathlib import Path

import pytest

from apex.sop import bundled_atlas

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def atlas():
    return bundled_atlas()


@pytest.fixture(scope="session")
def rie_doc(atlas):
    return atlas.lookup("rie")


@pytest.fixture(scope="session")
def spin_doc(atlas):
    return atlas.lookup("spin_coating")


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES
