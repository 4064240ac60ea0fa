"""Explanation records: one YAML document per explanation plus its rasters.

Reading a record back gives an ExplanationResult equal to the one written;
floats go through YAML's shortest round-trip repr.
"""
import logging
from pathlib import Path

import yaml

from explainer_app.exceptions import FormatError
from explainer_app.models import Edit, EditList, ExplanationResult
from explainer_app.nn.bundle_io import plain
from explainer_app.rendering.pnm import raster_suffix, write_pnm
from explainer_app.serializers import validate_document
from explainer_app.serializers.record_serializer import (
    RECORD_FORMAT, RECORD_VERSION, ExplanationRecordSerializer,
)

logger = logging.getLogger(__name__)

RECORD_NAME = "explanation.yaml"


def explanation_record(result: ExplanationResult, rf_query=None, rf_distractor=None, config=None, rasters=None):
    """The record as a plain dict, keys in schema order."""
    width = result.edits.width
    edits = []
    for step, edit in enumerate(result.edits, start=1):
        entry = {
            "step": step,
            "query_cell": [edit.query_row, edit.query_col],
            "source_cell": [edit.source_row, edit.source_col],
        }
        if rf_query is not None:
            entry["query_rect"] = list(rf_query.rectangle(edit.query_cell(width)))
        if rf_distractor is not None:
            entry["source_rect"] = list(rf_distractor.rectangle(edit.source_cell(width)))
        edits.append(entry)
    record = {
        "format": RECORD_FORMAT,
        "version": RECORD_VERSION,
        "query": {"id": result.query_id, "label": result.query_class},
        "distractor": {"id": result.distractor_id, "label": result.target_class},
        "grid": {"height": result.edits.height, "width": width},
        "strategy": str(result.strategy),
        "status": str(result.status),
        "edits": edits,
        "trajectory": [
            {"step": step, "query_logprob": point.query_logprob, "target_logprob": point.target_logprob}
            for step, point in enumerate(result.trajectory)
        ],
        "notes": list(result.notes),
    }
    if config is not None:
        record["config"] = config
    if rasters:
        record["rasters"] = dict(rasters)
    return plain(record)


def write_explanation(result, renders=None, out_dir=".", *, rf_query=None, rf_distractor=None, config=None):
    """Write ``explanation.yaml`` and, when ``renders`` is given, its rasters into ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        rasters = {}
        if renders is not None:
            for name, raster in renders.rasters().items():
                filename = name + raster_suffix(raster)
                write_pnm(out_dir / filename, raster)
                rasters[name] = filename
        record = explanation_record(result, rf_query, rf_distractor, config, rasters)
        path = out_dir / RECORD_NAME
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(record, fh, sort_keys=False)
    except OSError as exc:
        raise FormatError(f"cannot write explanation to {out_dir}: {exc}", field="out_dir") from exc
    logger.info("explanation written path=%s status=%s edits=%d", path, result.status, result.edit_count)
    return path


def result_from_record(record) -> ExplanationResult:
    grid = record["grid"]
    edits = EditList(grid["height"], grid["width"], tuple(
        Edit(*entry["query_cell"], *entry["source_cell"]) for entry in record["edits"]
    ))
    return ExplanationResult(
        edits=edits,
        trajectory=tuple((entry["query_logprob"], entry["target_logprob"]) for entry in record["trajectory"]),
        status=record["status"],
        query_class=record["query"]["label"],
        target_class=record["distractor"]["label"],
        query_id=record["query"]["id"],
        distractor_id=record["distractor"]["id"],
        strategy=record["strategy"],
        notes=tuple(record.get("notes", ())),
    )


def load_record(path):
    """Validated record dict; ``path`` may be the YAML file or its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / RECORD_NAME
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read record {path}: {exc}", field="record") from exc
    except yaml.YAMLError as exc:
        raise FormatError(f"record {path} is not valid YAML: {exc}", field="record") from exc
    return validate_document(ExplanationRecordSerializer, raw, "record")


def read_explanation(path) -> ExplanationResult:
    return result_from_record(load_record(path))
