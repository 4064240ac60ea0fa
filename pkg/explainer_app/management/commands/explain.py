# explainer_app/management/commands/explain.py
import numpy as np

from explainer_app.data.annotation_io import load_attributes
from explainer_app.evaluation.selection import pick_distractor_class, pick_distractor_image
from explainer_app.management.base import ExplainerCommand, safe_name, usage_error
from explainer_app.models import ExclusionPolicy, HighlightMode, SearchStrategy, StopRule
from explainer_app.nn.trainer import predict_labels
from explainer_app.rendering.heatmap import render_explanation
from explainer_app.rendering.receptive_field import ReceptiveFieldMap
from explainer_app.rendering.records import write_explanation
from explainer_app.search.greedy import greedy_counterfactual
from explainer_app.seeding import seeded_stream


def search_arguments(parser):
    parser.add_argument("--strategy", choices=SearchStrategy.values)
    parser.add_argument("--exclusion-policy", choices=ExclusionPolicy.values)
    parser.add_argument("--stop-rule", choices=StopRule.values)
    parser.add_argument("--max-edits", type=int)
    parser.add_argument("--highlight", choices=HighlightMode.values)


def search_overrides(options):
    return {
        "search": {
            "strategy": options.get("strategy"),
            "exclusion_policy": options.get("exclusion_policy"),
            "stop_rule": options.get("stop_rule"),
            "max_edits": options.get("max_edits"),
        },
        "rendering": {"highlight": options.get("highlight")},
    }


def explain_pair(model, dataset, query_index, distractor_index, target_class, config, rf, search=None):
    """Greedy search and rendering for one pair; (ExplanationResult, RenderedExplanation)."""
    query_image = dataset.images[query_index]
    distractor_image = dataset.images[distractor_index]
    result = greedy_counterfactual(
        model, query_image, distractor_image, target_class, search or config.search,
        query_id=dataset.ids[query_index], distractor_id=dataset.ids[distractor_index],
    )
    return result, render_explanation(result, query_image, distractor_image, rf, rf, config.highlight)


class Command(ExplainerCommand):
    help = "Explain why the model predicts the query's class and not a distractor class."

    def add_command_arguments(self, parser):
        parser.add_argument("--model", help="model manifest (YAML)")
        parser.add_argument("--images", help="dataset images (IDX)")
        parser.add_argument("--labels", help="dataset labels (IDX)")
        parser.add_argument("--annotations", help="annotation file, for keypoint-based distractor choice")
        parser.add_argument("--attributes", help="class attribute table, for attribute-based class choice")
        parser.add_argument("--query-index", type=int, required=True)
        target = parser.add_mutually_exclusive_group(required=True)
        target.add_argument("--distractor-index", type=int, help="use this image as I'")
        target.add_argument("--distractor-class", type=int, help="pick I' among images predicted as this class")
        target.add_argument("--auto-distractor", action="store_true",
                            help="pick c' and I' with the configured distractor policies")
        search_arguments(parser)
        parser.add_argument("--out-dir", help="defaults to <output-dir>/explain/<query id>")

    def config_overrides(self, options):
        return search_overrides(options)

    def run(self, config, options):
        model = self.require_model(config, options)
        paths = self.dataset_paths(config, options)
        dataset = self.load_dataset(paths)
        if dataset is None:
            raise usage_error("a dataset is required: --images/--labels or dataset: in the config")
        query_index = options["query_index"]
        if not 0 <= query_index < len(dataset):
            raise usage_error(f"--query-index {query_index} outside [0, {len(dataset)})")

        distractor_index = options["distractor_index"]
        if distractor_index is not None:
            if not 0 <= distractor_index < len(dataset):
                raise usage_error(f"--distractor-index {distractor_index} outside [0, {len(dataset)})")
            target_class = int(predict_labels(model, dataset.images[[distractor_index]])[0])
        else:
            rng = seeded_stream(config.seed, "distractors")
            predictions = predict_labels(model, dataset.images)
            target_class = options["distractor_class"]
            if target_class is None:
                attributes = load_attributes(paths["attributes"]) if paths.get("attributes") else None
                target_class = pick_distractor_class(int(predictions[query_index]), model.class_count, rng,
                                                     config.class_policy, attributes)
            if not 0 <= target_class < model.class_count:
                raise usage_error(f"--distractor-class {target_class} outside [0, {model.class_count})")
            candidates = np.flatnonzero(predictions == target_class)
            distractor_index = pick_distractor_image(query_index, candidates, rng, config.image_policy, dataset)

        out_dir = self.output_path(config, options["out_dir"], f"explain/{safe_name(dataset.ids[query_index])}")
        rf = ReceptiveFieldMap.for_model(model)
        result, renders = explain_pair(model, dataset, query_index, distractor_index, target_class, config, rf)
        path = write_explanation(result, renders, out_dir, rf_query=rf, rf_distractor=rf, config=config.echo())
        self.stdout.write(self.style.SUCCESS(
            f"{result.status}: {result.edit_count} edit(s) from class {result.query_class} "
            f"to {result.target_class}; record at {path}"
        ))
