# hypothesis 기본 프로필
import os

from hypothesis import settings

settings.register_profile("default", max_examples=200, deadline=None)
settings.register_profile("ci", max_examples=1000, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# 저장소 루트에서 app 패키지를 import
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import pytest

from app.config.loader import load_floor_plan, load_pathway_library, scenario_from_preset
from app.simulation.engine import EDSimulation

SMALL_SEEDS = {"patient": 11, "dynamics": 12}


def small_config(**overrides):
    document = {"horizon_days": 1, "seeds": dict(SMALL_SEEDS)}
    document.update(overrides)
    baseline = document.pop("baseline", "default")
    return scenario_from_preset("S", baseline, document)


@pytest.fixture(scope="session")
def library():
    return load_pathway_library("default")


@pytest.fixture(scope="session")
def medium_plan():
    return load_floor_plan("medium")


@pytest.fixture
def small_sim(library):
    return EDSimulation(small_config(), library=library)


@pytest.fixture(scope="session")
def small_run(library):
    """1일짜리 소형 ED run (세션 공유, 수정 금지)"""
    sim = EDSimulation(small_config(), library=library)
    sim.run()
    return sim
