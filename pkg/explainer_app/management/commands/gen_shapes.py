# explainer_app/management/commands/gen_shapes.py
from explainer_app.data.annotation_io import write_annotations
from explainer_app.data.idx import write_dataset
from explainer_app.data.shapes import gen_shapes
from explainer_app.management.base import ExplainerCommand
from explainer_app.models import ShapeGrammar


class Command(ExplainerCommand):
    help = "Write a synthetic colored-shapes dataset (IDX images/labels + annotations) to disk."

    def add_command_arguments(self, parser):
        parser.add_argument("--count", type=int, default=1000, help="training images")
        parser.add_argument("--test-count", type=int, default=0, help="held-out images")
        parser.add_argument("--height", type=int, default=28)
        parser.add_argument("--width", type=int, default=28)
        parser.add_argument("--grammar", choices=ShapeGrammar.values, default=ShapeGrammar.POSITION)
        parser.add_argument("--out-dir", help="defaults to <output-dir>/shapes")

    def run(self, config, options):
        out_dir = self.output_path(config, options["out_dir"], "shapes")
        splits = [("train", options["count"])]
        if options["test_count"]:
            splits.append(("test", options["test_count"]))

        for split, count in splits:
            dataset = gen_shapes(count, (options["height"], options["width"]), options["grammar"],
                                 config.seed, split)
            write_dataset(dataset, out_dir / f"{split}-images.idx", out_dir / f"{split}-labels.idx")
            write_annotations(out_dir / f"{split}-annotations.yaml", dataset.annotations)
            self.stdout.write(self.style.SUCCESS(
                f"{split}: {count} {options['grammar']} images, {dataset.class_count} classes → {out_dir}"
            ))
