# explainer_app/management/commands/render.py
from pathlib import Path

from explainer_app.management.base import ExplainerCommand, usage_error
from explainer_app.models import HighlightMode
from explainer_app.rendering.heatmap import render_explanation
from explainer_app.rendering.receptive_field import ReceptiveFieldMap
from explainer_app.rendering.records import RECORD_NAME, load_record, result_from_record, write_explanation


class Command(ExplainerCommand):
    help = "Re-render heatmaps and composites for existing explanation records."

    def add_command_arguments(self, parser):
        parser.add_argument("records", nargs="+", help="record files or directories")
        parser.add_argument("--model", help="model manifest (YAML)")
        parser.add_argument("--images", help="dataset images (IDX) holding the explained images")
        parser.add_argument("--labels", help="dataset labels (IDX)")
        parser.add_argument("--highlight", choices=HighlightMode.values)
        parser.add_argument("--out-dir", help="write here instead of next to each record")

    def config_overrides(self, options):
        return {"rendering": {"highlight": options["highlight"]}}

    def run(self, config, options):
        model = self.require_model(config, options)
        dataset = self.require_dataset(config, options)
        rf = ReceptiveFieldMap.for_model(model)

        for given in options["records"]:
            path = Path(given)
            record_path = path / RECORD_NAME if path.is_dir() else path
            record = load_record(record_path)
            result = result_from_record(record)
            try:
                query_index = dataset.index_of(result.query_id)
                distractor_index = dataset.index_of(result.distractor_id)
            except ValueError:
                raise usage_error(f"{record_path}: images {result.query_id}/{result.distractor_id} "
                                  f"are not in the dataset") from None
            renders = render_explanation(result, dataset.images[query_index], dataset.images[distractor_index],
                                         rf, rf, config.highlight)
            out_dir = Path(options["out_dir"]) if options["out_dir"] else record_path.parent
            if options["out_dir"] and len(options["records"]) > 1:
                out_dir = out_dir / record_path.parent.name
            written = write_explanation(result, renders, out_dir, rf_query=rf, rf_distractor=rf,
                                        config=record.get("config"))
            self.stdout.write(self.style.SUCCESS(f"rendered {written}"))
