# explainer_app/management/commands/train.py
from explainer_app.management.base import ExplainerCommand, usage_error
from explainer_app.nn.architectures import reference_layers
from explainer_app.nn.bundle_io import save_model
from explainer_app.nn.trainer import train
from explainer_app.seeding import seeded_stream


class Command(ExplainerCommand):
    help = "Train the reference CNN on an IDX dataset and save a model bundle."

    def add_command_arguments(self, parser):
        parser.add_argument("--images", help="training images (IDX)")
        parser.add_argument("--labels", help="training labels (IDX)")
        parser.add_argument("--test-images", help="test images (IDX)")
        parser.add_argument("--test-labels", help="test labels (IDX)")
        parser.add_argument("--epochs", type=int)
        parser.add_argument("--learning-rate", type=float)
        parser.add_argument("--momentum", type=float)
        parser.add_argument("--batch-size", type=int)
        parser.add_argument("--holdout", type=float, help="fraction of the training set held out for testing")
        parser.add_argument("--out", help="manifest path; defaults to <output-dir>/model.yaml")

    def config_overrides(self, options):
        return {"training": {
            "epochs": options["epochs"],
            "learning_rate": options["learning_rate"],
            "momentum": options["momentum"],
            "batch_size": options["batch_size"],
            "holdout": options["holdout"],
        }}

    def run(self, config, options):
        dataset = self.require_dataset(config, options)
        test_dataset = self.load_dataset(self.dataset_paths(config, options, "test_"), "test")
        if config.holdout > 0:
            if test_dataset is not None:
                raise usage_error("--holdout and a test dataset are mutually exclusive")
            dataset, test_dataset = dataset.holdout(config.holdout, seeded_stream(config.seed, "split"))

        extractor, head = reference_layers(dataset.class_count)
        model = train(extractor, head, dataset, config.training, test_dataset)
        model.metrics["config"] = config.echo()
        path = save_model(model, self.output_path(config, options["out"], "model.yaml"))

        summary = f"model saved to {path} (train accuracy {model.metrics['train_accuracy']:.4f}"
        if model.metrics["test_accuracy"] is not None:
            summary += f", test accuracy {model.metrics['test_accuracy']:.4f}"
        self.stdout.write(self.style.SUCCESS(summary + ")"))
