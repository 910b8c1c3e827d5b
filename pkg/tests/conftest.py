import numpy as np
import pytest

from risscan.cli import _resolve_scenario
from risscan.detection import calibrate_threshold, reference_templates
from risscan.ris_design import DesignParams, build_codebook

from util import TWO_RIS_DICT, scenario_from

# Shared reduced-effort design settings: enough iterations for clean
# beams at 12x12 scale, cheap enough to build once per session.
FAST_DESIGN = DesignParams(max_iters=600)


@pytest.fixture(scope="session")
def desk():
    return _resolve_scenario("desk")


@pytest.fixture(scope="session")
def desk_book(desk):
    return build_codebook(desk, FAST_DESIGN, np.random.default_rng(100))


@pytest.fixture(scope="session")
def desk_templates(desk, desk_book):
    return reference_templates(desk, desk_book)


@pytest.fixture(scope="session")
def desk_gamma(desk, desk_book, desk_templates):
    return calibrate_threshold(
        desk, desk_book, 1e-2, 50_000, np.random.default_rng(101),
        templates=desk_templates,
    )


@pytest.fixture(scope="session")
def two_ris():
    return scenario_from(TWO_RIS_DICT)


@pytest.fixture(scope="session")
def two_ris_book(two_ris):
    return build_codebook(two_ris, FAST_DESIGN, np.random.default_rng(102))


@pytest.fixture(scope="session")
def two_ris_gamma(two_ris, two_ris_book):
    return calibrate_threshold(
        two_ris, two_ris_book, 1e-2, 5_000, np.random.default_rng(103)
    )
