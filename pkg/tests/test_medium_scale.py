"""Medium preset 규모의 결정성/보존 검사. `pytest -m calibration` 으로 실행."""

import pytest

from app.config.loader import scenario_from_preset
from app.simulation.engine import EDSimulation

pytestmark = pytest.mark.calibration


def medium(seed, days=1, baseline="default"):
    return scenario_from_preset("M", baseline, {"horizon_days": days, "seeds": {"patient": seed, "dynamics": seed + 1000}})


def ledger_bytes(sim):
    return "\n".join(record.to_line() for record in sim.take_ledger()).encode("utf-8")


def test_medium_three_day_run_is_byte_identical(library):
    first = EDSimulation(medium(7, days=3), library=library)
    second = EDSimulation(medium(7, days=3), library=library)
    first.run()
    second.run()
    assert first.summary() == second.summary()
    assert ledger_bytes(first) == ledger_bytes(second)


@pytest.mark.parametrize("seed", range(100))
def test_medium_conservation(library, seed):
    sim = EDSimulation(medium(seed), library=library)
    summary = sim.run()
    assert summary.arrivals == len(sim.arrivals)
    assert summary.discharged + summary.admitted + summary.lwbs + summary.deceased + summary.in_progress == summary.arrivals
    for patient in sim.patients.values():
        assert sum(patient.cumulative_wait.values()) == patient.total_wait
        if patient.disposition in ("discharged", "admitted"):
            los = patient.disposition_time - patient.arrival_time
            assert los == patient.total_wait + patient.travel_minutes + patient.treatment_minutes
    for pool in sim.kernel.pools.values():
        assert 0 <= pool.in_use <= pool.capacity
