from types import SimpleNamespace

import numpy as np
import pytest

from app.errors import PathwayLoadError
from app.models.pathway_models import StaffRequirement
from app.simulation.staff import DOCTOR_GENERAL, DOCTOR_TRAUMA
from app.simulation.pathways import choose_branch, instantiate, load_pathways, walk_steps

TRIAGE = {"id": "triage", "kind": "triage", "base_duration": 4, "room": "triage_room", "staff": [{"role": "nurse"}]}


def pathway_doc(**changes):
    document = {
        "id": "minor",
        "name": "경증",
        "eligible_esi": [1, 2, 3, 4, 5],
        "initial_severity": 5,
        "steps": [
            dict(TRIAGE),
            {"id": "exam", "kind": "provider_exam", "base_duration": 10, "room": "exam_room",
             "staff": [{"role": "doctor", "specialization": "general"}]},
        ],
    }
    document.update(changes)
    return document


def manifest_for(pathway_id="minor"):
    return {"conditions": {level: {pathway_id: 1.0} for level in (1, 2, 3, 4, 5)}}


def test_shipped_library(library):
    assert len(library.pathways) == 8
    assert set(library.condition_weights()[1]) == {"cardiac", "trauma"}
    for pathway in library.pathways.values():
        assert pathway.steps[0].kind == "triage"
    assert "imaging_room:ct" in library.room_kinds()
    assert "trauma_kit" in library.equipment_names()


def test_branch_steps_are_walked(library):
    ids = [step.id for step in walk_steps(library["trauma"].steps)]
    assert ids.index("repair") > ids.index("trauma_ct")
    assert "trauma_observation" in ids


def test_branch_probabilities_must_sum_to_one():
    steps = pathway_doc()["steps"]
    steps[1]["branch"] = [
        {"probability": 0.5, "steps": []},
        {"probability": 0.3, "steps": []},
    ]
    with pytest.raises(PathwayLoadError, match="sum to 0.8") as info:
        load_pathways([("minor.yaml", pathway_doc(steps=steps))], manifest_for())
    assert info.value.source == "minor.yaml"


def test_room_missing_from_floor_plan():
    with pytest.raises(PathwayLoadError, match="exam_room"):
        load_pathways([("minor.yaml", pathway_doc())], manifest_for(), available_rooms=["triage_room"])


def test_unknown_room_kind():
    steps = pathway_doc()["steps"]
    steps[1]["room"] = "helipad"
    with pytest.raises(PathwayLoadError, match="helipad"):
        load_pathways([("minor.yaml", pathway_doc(steps=steps))], manifest_for())


def test_manifest_unknown_pathway():
    with pytest.raises(PathwayLoadError, match="unknown pathway 'ghost'"):
        load_pathways([("minor.yaml", pathway_doc())], manifest_for("ghost"))


def test_manifest_ineligible_level():
    document = pathway_doc(eligible_esi=[4, 5])
    with pytest.raises(PathwayLoadError, match="not eligible for ESI 1"):
        load_pathways([("minor.yaml", document)], manifest_for())


def test_duplicate_pathway_id():
    documents = [("a.yaml", pathway_doc()), ("b.yaml", pathway_doc())]
    with pytest.raises(PathwayLoadError, match="duplicate pathway id") as info:
        load_pathways(documents, manifest_for())
    assert info.value.source == "b.yaml"


def test_pathway_must_start_with_triage():
    steps = pathway_doc()["steps"][1:]
    with pytest.raises(PathwayLoadError):
        load_pathways([("minor.yaml", pathway_doc(steps=steps))], manifest_for())


def test_one_doctor_line_per_step():
    steps = pathway_doc()["steps"]
    steps[1]["staff"] = [{"role": "doctor"}, {"role": "doctor", "specialization": "trauma"}]
    with pytest.raises(PathwayLoadError):
        load_pathways([("minor.yaml", pathway_doc(steps=steps))], manifest_for())


def test_choose_branch_frequencies(library):
    ct_step = next(step for step in instantiate(library["trauma"]) if step.step_id == "trauma_ct")
    rng = np.random.default_rng(5)
    picks = [choose_branch(ct_step, rng)[0].step_id for _ in range(5000)]
    assert picks.count("repair") / len(picks) == pytest.approx(0.4, abs=0.03)


def test_empty_branch_inserts_nothing(library):
    exam = next(step for step in instantiate(library["abdominal"]) if step.branch)
    rng = np.random.default_rng(1)
    lengths = {len(choose_branch(exam, rng)) for _ in range(200)}
    assert 0 in lengths
    assert instantiate(library["uri"])[1].branch is None
    assert choose_branch(instantiate(library["uri"])[1], rng) == []


def test_doctor_requirement_takes_a_list_of_specializations():
    any_of = StaffRequirement(role="doctor", specialization=["general", "trauma"])
    assert any_of.specializations() == ("general", "trauma")
    assert StaffRequirement(role="doctor", specialization=["trauma"]).specialization == "trauma"
    with pytest.raises(ValueError):
        StaffRequirement(role="doctor", specialization=[])
    with pytest.raises(ValueError):
        StaffRequirement(role="doctor", specialization=["general", "general"])
    with pytest.raises(ValueError):
        StaffRequirement(role="doctor", specialization=["general", "cardiology"])


def test_general_steps_list_trauma_doctors_explicitly(library, small_sim):
    patient = SimpleNamespace(bed_room=None)
    exam = instantiate(library["uri"])[1]
    assert small_sim.executor.groups_for(patient, exam) == [("exam_room",), (DOCTOR_GENERAL, DOCTOR_TRAUMA)]
    repair = next(s for s in walk_steps(library["trauma"].steps) if s.id == "repair")
    assert [req.specializations() for req in repair.staff] == [("trauma",)]
