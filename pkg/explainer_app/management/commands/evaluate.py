# explainer_app/management/commands/evaluate.py
import logging
from pathlib import Path

import yaml

from explainer_app.data.annotation_io import load_annotations
from explainer_app.evaluation.metrics import (
    agreement_cross_class, agreement_same_class, avg_edit_count, region_annotation_hit_rate,
)
from explainer_app.evaluation.reports import write_report
from explainer_app.evaluation.selection import agreement_queries
from explainer_app.exceptions import EvaluationError, FormatError
from explainer_app.management.base import ExplainerCommand, usage_error
from explainer_app.nn.bundle_io import load_model
from explainer_app.nn.trainer import predict_labels
from explainer_app.rendering.receptive_field import ReceptiveFieldMap
from explainer_app.rendering.records import RECORD_NAME, read_explanation
from explainer_app.seeding import seeded_stream

logger = logging.getLogger(__name__)


def collect_records(root):
    """Results under ``root`` in sorted path order, with the class policy batch indexes recorded."""
    root = Path(root)
    paths = [root] if root.is_file() else sorted(root.rglob(RECORD_NAME))
    policies = {}
    for index_path in sorted(root.rglob("batch.yaml")) if root.is_dir() else ():
        try:
            with open(index_path, encoding="utf-8") as fh:
                index = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise FormatError(f"cannot read batch index {index_path}: {exc}", field="batch") from exc
        for entry in index.get("pairs", []):
            policies[(index_path.parent / entry["record"]).resolve()] = entry.get("class_policy")
    return [(read_explanation(path), policies.get(path.resolve())) for path in paths]


class Command(ExplainerCommand):
    help = "Compute edit-count, annotation hit-rate and agreement reports."

    def add_command_arguments(self, parser):
        parser.add_argument("--records", help="record file or directory searched recursively")
        parser.add_argument("--model", help="model manifest; enables hit rates and agreement")
        parser.add_argument("--images", help="dataset images (IDX), for agreement")
        parser.add_argument("--labels", help="dataset labels (IDX), for agreement")
        parser.add_argument("--annotations", help="annotation file, for hit rates")
        parser.add_argument("--radius", type=float, help="keypoint radius in pixels (default: half the stride)")
        parser.add_argument("--queries", type=int, default=20, help="agreement queries")
        parser.add_argument("--distractors-per-query", type=int)
        parser.add_argument("--out", help="report path; defaults to <output-dir>/report.yaml")

    def config_overrides(self, options):
        return {"evaluation": {
            "radius": options["radius"],
            "distractors_per_query": options["distractors_per_query"],
        }}

    def run(self, config, options):
        reports = {}
        model_path = options["model"] or config.model
        model = load_model(model_path) if model_path else None

        # ─── 1) edit counts and hit rates from records ─────────────
        if options["records"]:
            records = collect_records(options["records"])
            if not records:
                raise usage_error(f"no {RECORD_NAME} found under {options['records']}")
            results = [result for result, _ in records]
            reports["avg_edit_count"] = avg_edit_count(results)
            for policy in sorted({policy for _, policy in records if policy}):
                group = [result for result, p in records if p == policy]
                name = f"avg_edit_count:{policy}"
                reports[name] = avg_edit_count(group, name=name)

            paths = self.dataset_paths(config, options) or {}
            annotations_path = options["annotations"] or paths.get("annotations")
            if annotations_path and model is not None:
                rf = ReceptiveFieldMap.for_model(model)
                hit_rates = region_annotation_hit_rate(results, load_annotations(annotations_path), rf, rf,
                                                       config.radius)
                reports.update(hit_rates)
            elif annotations_path:
                logger.warning("hit rates skipped: annotations given without a model")
                self.stderr.write("hit rates skipped: --annotations needs --model")

        # ─── 2) agreement on fresh searches ────────────────────────
        dataset = self.load_dataset(self.dataset_paths(config, options))
        if model is not None and dataset is not None:
            predictions = predict_labels(model, dataset.images)
            same, cross = agreement_queries(dataset, predictions, options["queries"],
                                            config.distractors_per_query, seeded_stream(config.seed, "agreement"))
            for name, metric, queries in (("agreement_same_class", agreement_same_class, same),
                                          ("agreement_cross_class", agreement_cross_class, cross)):
                try:
                    reports[name] = metric(model, queries, config.search)
                except EvaluationError as exc:
                    self.stderr.write(f"{name} skipped: {exc}")

        if not reports:
            raise usage_error("nothing to evaluate: pass --records and/or --model with a dataset")
        path = write_report(self.output_path(config, options["out"], "report.yaml"), reports, config.echo())
        for name in sorted(reports):
            value = reports[name].value
            shown = "n/a" if value is None else f"{value:.4f}"
            self.stdout.write(f"{name}: {shown} (n={reports[name].sample_count})")
        self.stdout.write(self.style.SUCCESS(f"report written to {path}"))
