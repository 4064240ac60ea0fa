"""Metric reports on disk."""
import logging
from pathlib import Path

import yaml

from explainer_app.exceptions import FormatError
from explainer_app.nn.bundle_io import plain

logger = logging.getLogger(__name__)

REPORT_FORMAT = "counterfactual-report"
REPORT_VERSION = 1


def write_report(path, reports, config=None):
    """``reports``: name → MetricReport, written in sorted name order."""
    path = Path(path)
    document = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "metrics": {name: reports[name].to_dict() for name in sorted(reports)},
    }
    if config is not None:
        document["config"] = config
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(plain(document), fh, sort_keys=False)
    except OSError as exc:
        raise FormatError(f"cannot write report {path}: {exc}", field="report") from exc
    logger.info("report written path=%s metrics=%s", path, ",".join(sorted(reports)))
    return path


def read_report(path):
    try:
        with open(path, encoding="utf-8") as fh:
            document = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise FormatError(f"cannot read report {path}: {exc}", field="report") from exc
    if not isinstance(document, dict) or document.get("format") != REPORT_FORMAT:
        raise FormatError(f"{path} is not a metric report", field="format")
    return document
