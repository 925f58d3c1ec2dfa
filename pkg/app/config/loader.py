"""시나리오/평면도/pathway/스터디 문서 로더.

YAML을 읽어 pydantic 모델로 검증한다. 실패는 모두 ConfigurationError(경로, 사유)로 바꾼다.
"""

import copy
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Tuple, Union

import yaml
from pydantic import ValidationError

from app import __version__
from app.config.presets import TABLE1, apply_baseline, preset_document
from app.errors import ConfigurationError
from app.models.ledger_models import InterventionCommand
from app.models.scenario_models import SimConfig
from app.models.study_models import ScenarioMatrix

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
MANIFEST_NAME = "manifest.yaml"
PathLike = Union[str, Path]


def load_yaml(path: PathLike) -> Any:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError("파일이 없습니다", source=str(path))
    try:
        with path.open("r", encoding="utf-8") as handle:
            return yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"YAML 파싱 실패: {exc}", source=str(path)) from exc


def validation_report(exc: ValidationError) -> str:
    lines = []
    for error in exc.errors():
        location = ".".join(str(item) for item in error.get("loc", ())) or "<root>"
        lines.append(f"  - {location}: {error.get('msg')}")
    return "\n".join(lines)


def deep_merge(base: Mapping, override: Mapping) -> dict:
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _looks_like_path(name: str) -> bool:
    return "/" in name or "\\" in name or name.endswith((".yaml", ".yml"))


def resolve_data_path(name: str, category: str, base_dir: Optional[PathLike] = None, suffix: str = ".yaml") -> Path:
    """경로처럼 보이면 base_dir 기준 상대 경로, 이름만 있으면 app/data/<category>/ 아래에서 찾는다."""
    if _looks_like_path(name):
        path = Path(name)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        return path
    return DATA_DIR / category / f"{name}{suffix}"


def build_config(document: Mapping, source: str = "<scenario>") -> SimConfig:
    try:
        return SimConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigurationError("시나리오 검증 실패\n" + validation_report(exc), source=source) from exc


def scenario_document(document: Mapping, source: str = "<scenario>") -> dict:
    doc = dict(document or {})
    preset = doc.pop("preset", None)
    baseline = doc.get("baseline", "default")
    if preset is not None:
        if preset not in TABLE1:
            raise ConfigurationError(f"알 수 없는 preset {preset!r} (사용 가능: {sorted(TABLE1)})", source=source)
        base = apply_baseline(preset_document(preset), baseline)
        doc = deep_merge(base, doc)
    elif baseline != "default":
        logger.warning("%s: baseline %s without a preset only sets the label", source, baseline)
    return doc


def scenario_from_preset(size: str = "M", baseline: str = "default", overrides: Optional[Mapping] = None) -> SimConfig:
    doc = scenario_document({"preset": size, "baseline": baseline, **(overrides or {})}, source=f"preset:{size}")
    return build_config(doc, source=f"preset:{size}")


def load_scenario(path: PathLike) -> SimConfig:
    path = Path(path)
    raw = load_yaml(path)
    if not isinstance(raw, Mapping):
        raise ConfigurationError("시나리오 문서는 mapping이어야 합니다", source=str(path))
    doc = scenario_document(raw, source=str(path))
    for key, category in (("floor_plan", "floorplans"), ("pathways", "pathways")):
        value = doc.get(key)
        if isinstance(value, str) and _looks_like_path(value):
            doc[key] = str(resolve_data_path(value, category, base_dir=path.parent))
    config = build_config(doc, source=str(path))
    logger.info("Loaded scenario %s (size=%s, baseline=%s)", config.name, config.size, config.baseline)
    return config


def scenario_with_overrides(path: PathLike, seed: Optional[int] = None, days: Optional[int] = None) -> SimConfig:
    """run/replay 공통: 시나리오 파일에 --seed/--days 덮어쓰기를 적용한다."""
    config = load_scenario(path)
    overrides: dict = {}
    if seed is not None:
        overrides["seeds"] = {"patient": seed, "dynamics": seed + 1}
    if days is not None:
        overrides["horizon_days"] = days
    if not overrides:
        return config
    return build_config(deep_merge(config.model_dump(mode="json"), overrides), source=str(path))


def load_floor_plan(name: str, base_dir: Optional[PathLike] = None):
    from app.simulation.spatial import FloorPlan

    path = resolve_data_path(name, "floorplans", base_dir=base_dir)
    document = load_yaml(path)
    if not isinstance(document, Mapping):
        raise ConfigurationError("평면도 문서는 mapping이어야 합니다", source=str(path))
    document = dict(document)
    document.setdefault("name", path.stem)
    return FloorPlan.from_document(document, source=str(path))


def pathway_documents(directory: Path) -> Tuple[List[Tuple[str, Any]], Any]:
    if not directory.is_dir():
        raise ConfigurationError("pathway 디렉터리가 없습니다", source=str(directory))
    manifest_path = directory / MANIFEST_NAME
    documents = [
        (str(path), load_yaml(path))
        for path in sorted(directory.glob("*.yaml"))
        if path.name != MANIFEST_NAME
    ]
    return documents, load_yaml(manifest_path)


def load_pathway_library(name: str, base_dir: Optional[PathLike] = None, available_rooms: Optional[Iterable[str]] = None):
    from app.simulation.pathways import load_pathways

    directory = Path(name) if _looks_like_path(name) else DATA_DIR / "pathways" / name
    if not directory.is_absolute() and base_dir is not None and _looks_like_path(name):
        directory = Path(base_dir) / directory
    documents, manifest = pathway_documents(directory)
    return load_pathways(
        documents,
        manifest,
        available_rooms=list(available_rooms) if available_rooms is not None else None,
        manifest_source=str(directory / MANIFEST_NAME),
    )


def load_matrix(path: PathLike) -> ScenarioMatrix:
    path = Path(path)
    if not _looks_like_path(str(path)) and not path.is_file():
        path = resolve_data_path(str(path), "studies")
    document = load_yaml(path)
    try:
        return ScenarioMatrix.model_validate(document or {})
    except ValidationError as exc:
        raise ConfigurationError("스터디 설정 검증 실패\n" + validation_report(exc), source=str(path)) from exc


def parse_commands(lines: Iterable[str], source: str = "<commands>") -> List[InterventionCommand]:
    commands: List[InterventionCommand] = []
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            commands.append(InterventionCommand.model_validate(json.loads(line)))
        except (json.JSONDecodeError, ValidationError) as exc:
            raise ConfigurationError(f"명령 {number}행이 유효하지 않습니다: {exc}", source=source) from exc
    return commands


def load_commands(path: PathLike) -> List[InterventionCommand]:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError("명령 파일이 없습니다", source=str(path))
    with path.open("r", encoding="utf-8") as handle:
        return parse_commands(handle, source=str(path))


def fingerprint(config: SimConfig, library=None, plan=None) -> str:
    """빌드 버전 + 시나리오 + pathway + 평면도를 묶은 설정 해시"""
    document = {
        "version": __version__,
        "config": config.model_dump(mode="json"),
        "pathways": library.to_document() if library is not None else None,
        "floor_plan": plan.to_document() if plan is not None else None,
    }
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def scenario_fingerprint(config: SimConfig) -> str:
    """설정이 가리키는 pathway 라이브러리와 평면도까지 읽어 run과 같은 해시를 만든다."""
    return fingerprint(config, load_pathway_library(config.pathways), load_floor_plan(config.floor_plan))
