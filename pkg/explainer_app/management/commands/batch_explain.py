# explainer_app/management/commands/batch_explain.py
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import yaml

from explainer_app.data.annotation_io import load_attributes
from explainer_app.evaluation.selection import sample_pairs
from explainer_app.management.base import ExplainerCommand, usage_error
from explainer_app.management.commands.explain import explain_pair, search_arguments, search_overrides
from explainer_app.models import DistractorClassPolicy, DistractorImagePolicy
from explainer_app.nn.bundle_io import plain
from explainer_app.nn.trainer import predict_labels
from explainer_app.rendering.receptive_field import ReceptiveFieldMap
from explainer_app.rendering.records import write_explanation
from explainer_app.seeding import seeded_stream

logger = logging.getLogger(__name__)

INDEX_NAME = "batch.yaml"


class Command(ExplainerCommand):
    help = "Explain a seeded sample of query/distractor pairs; one record directory per pair."

    def add_command_arguments(self, parser):
        parser.add_argument("--model", help="model manifest (YAML)")
        parser.add_argument("--images", help="dataset images (IDX)")
        parser.add_argument("--labels", help="dataset labels (IDX)")
        parser.add_argument("--annotations", help="annotation file (keypoints image policy)")
        parser.add_argument("--attributes", help="class attribute table (attributes class policy)")
        parser.add_argument("--count", type=int, default=50, help="pairs to sample")
        parser.add_argument("--class-policy", choices=DistractorClassPolicy.values)
        parser.add_argument("--image-policy", choices=DistractorImagePolicy.values)
        search_arguments(parser)
        parser.add_argument("--out-dir", help="defaults to <output-dir>/batch")

    def config_overrides(self, options):
        overrides = search_overrides(options)
        overrides["distractor"] = {
            "class_policy": options.get("class_policy"),
            "image_policy": options.get("image_policy"),
        }
        return overrides

    def run(self, config, options):
        if options["count"] <= 0:
            raise usage_error("--count must be positive")
        model = self.require_model(config, options)
        paths = self.dataset_paths(config, options)
        dataset = self.load_dataset(paths)
        if dataset is None:
            raise usage_error("a dataset is required: --images/--labels or dataset: in the config")
        attributes = load_attributes(paths["attributes"]) if paths.get("attributes") else None

        predictions = predict_labels(model, dataset.images)
        pairs = sample_pairs(
            dataset, predictions, options["count"], seeded_stream(config.seed, "pairs"),
            config.class_policy, config.image_policy, attributes,
        )
        out_dir = self.output_path(config, options["out_dir"], "batch")
        rf = ReceptiveFieldMap.for_model(model)
        # pairs run in parallel, so each search stays single-threaded
        search = replace(config.search, workers=1)

        def explain(numbered):
            number, pair = numbered
            result, renders = explain_pair(model, dataset, pair.query_index, pair.distractor_index,
                                           pair.target_class, config, rf, search)
            return number, pair, result, renders

        jobs = list(enumerate(pairs))
        if config.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                done = list(pool.map(explain, jobs))
        else:
            done = [explain(job) for job in jobs]

        # single writer, fixed names in pair order
        written = []
        for number, pair, result, renders in sorted(done, key=lambda item: item[0]):
            path = write_explanation(result, renders, out_dir / f"pair_{number:04d}",
                                     rf_query=rf, rf_distractor=rf, config=config.echo())
            written.append((pair, result, path))

        index = {
            "format": "counterfactual-batch",
            "version": 1,
            "config": config.echo(),
            "pairs": [
                {
                    "record": f"{path.parent.name}/{path.name}",
                    "query_id": result.query_id,
                    "distractor_id": result.distractor_id,
                    "target_class": pair.target_class,
                    "class_policy": pair.class_policy,
                    "status": str(result.status),
                    "edits": result.edit_count,
                }
                for pair, result, path in written
            ],
        }
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / INDEX_NAME, "w", encoding="utf-8") as fh:
            yaml.safe_dump(plain(index), fh, sort_keys=False)

        flipped = sum(result.flipped for _, result, _ in written)
        logger.info("batch done pairs=%d flipped=%d out_dir=%s", len(written), flipped, out_dir)
        self.stdout.write(self.style.SUCCESS(
            f"{len(written)} pair(s) explained, {flipped} flipped; index at {out_dir / INDEX_NAME}"
        ))
