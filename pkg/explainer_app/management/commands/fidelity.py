# explainer_app/management/commands/fidelity.py
from explainer_app.evaluation.metrics import BestEditInstance, relaxation_fidelity
from explainer_app.evaluation.reports import write_report
from explainer_app.evaluation.selection import sample_pairs
from explainer_app.management.base import ExplainerCommand, usage_error
from explainer_app.models import SearchStrategy
from explainer_app.nn.network import forward_features
from explainer_app.nn.trainer import predict_labels
from explainer_app.seeding import seeded_stream


class Command(ExplainerCommand):
    help = "Compare relaxed best-edit solutions against exhaustive search on sampled instances."

    def add_command_arguments(self, parser):
        parser.add_argument("--model", help="model manifest (YAML)")
        parser.add_argument("--images", help="dataset images (IDX)")
        parser.add_argument("--labels", help="dataset labels (IDX)")
        parser.add_argument("--count", type=int, default=100, help="best-edit instances")
        parser.add_argument("--compare", choices=SearchStrategy.values, default=SearchStrategy.RELAXED,
                            help="strategy checked against exhaustive search")
        parser.add_argument("--out", help="report path; defaults to <output-dir>/fidelity.yaml")

    def run(self, config, options):
        if options["count"] <= 0:
            raise usage_error("--count must be positive")
        model = self.require_model(config, options)
        dataset = self.require_dataset(config, options)
        predictions = predict_labels(model, dataset.images)
        pairs = sample_pairs(dataset, predictions, options["count"], seeded_stream(config.seed, "fidelity"))
        if not pairs:
            raise usage_error("no usable query/distractor pair in the dataset")

        instances = [
            BestEditInstance(
                forward_features(model, dataset.images[pair.query_index]),
                forward_features(model, dataset.images[pair.distractor_index]),
                pair.target_class,
                instance_id=f"{dataset.ids[pair.query_index]}>{dataset.ids[pair.distractor_index]}",
            )
            for pair in pairs
        ]
        report = relaxation_fidelity(model, instances, config.search.relax, options["compare"], config.workers)
        path = write_report(self.output_path(config, options["out"], "fidelity.yaml"),
                            {report.name: report}, config.echo())
        self.stdout.write(
            f"match rate {report.details['match_rate']:.4f}, "
            f"probability ratio {report.details['probability_ratio']:.4f} (n={report.sample_count})"
        )
        self.stdout.write(self.style.SUCCESS(f"report written to {path}"))
