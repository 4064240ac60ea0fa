# explainer_app/management/base.py
"""Shared plumbing for the explainer management commands."""
import json
import logging
import sys
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError, handle_default_options

from explainer_app.config import resolve_config
from explainer_app.data.annotation_io import load_annotations
from explainer_app.data.dataset import Dataset
from explainer_app.data.idx import load_idx
from explainer_app.exceptions import ExplainerError
from explainer_app.nn.bundle_io import load_model

logger = logging.getLogger(__name__)


def usage_error(detail):
    return CommandError(json.dumps({"error": "UsageError", "detail": detail}), returncode=2)


def safe_name(image_id):
    return str(image_id).replace(":", "_").replace("/", "_")


class ExplainerCommand(BaseCommand):
    """``--seed``, ``--config``, ``--workers`` and ``--output-dir`` for every command.

    Subclasses implement ``add_command_arguments`` and ``run``; an
    ``ExplainerError`` leaves the command as a single JSON error line.
    """

    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)

        def reject(message):
            raise usage_error(message)

        # argparse would print its usage text and exit 2 on its own
        parser.error = reject
        return parser

    def run_from_argv(self, argv):
        """Django's entry point, minus the ``CommandError:`` prefix: stderr gets the bare JSON line."""
        self._called_from_command_line = True
        try:
            parser = self.create_parser(argv[0], argv[1])
            options = parser.parse_args(argv[2:])
            cmd_options = vars(options)
            args = cmd_options.pop("args", ())
            handle_default_options(options)
            self.execute(*args, **cmd_options)
        except CommandError as exc:
            self.stderr.write(str(exc), style_func=str)
            sys.exit(exc.returncode)

    def add_arguments(self, parser):
        parser.add_argument("--seed", type=int, help="run seed (overrides config and EXPLAINER_SEED)")
        parser.add_argument("--config", help="YAML run config")
        parser.add_argument("--workers", type=int, help="thread pool size for candidate/pair evaluation")
        parser.add_argument("--output-dir", help="root directory for artifacts")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def config_overrides(self, options):
        """Nested config values taken from command-specific flags."""
        return {}

    def handle(self, *args, **options):
        try:
            overrides = {
                "seed": options.get("seed"),
                "workers": options.get("workers"),
                "output_dir": options.get("output_dir"),
            }
            overrides.update(self.config_overrides(options))
            config = resolve_config(options.get("config"), overrides)
            return self.run(config, options)
        except ExplainerError as exc:
            logger.error("command failed command=%s error=%s detail=%s",
                         type(self).__module__.rsplit(".", 1)[-1], type(exc).__name__, exc)
            raise CommandError(json.dumps(exc.payload())) from exc

    def run(self, config, options):
        raise NotImplementedError

    # ── helpers ──────────────────────────────────────────────────────────

    def dataset_paths(self, config, options, prefix=""):
        """{images, labels, annotations, attributes} from flags, else the config section."""
        images, labels = options.get(f"{prefix}images"), options.get(f"{prefix}labels")
        if bool(images) != bool(labels):
            raise usage_error(f"--{prefix}images and --{prefix}labels go together")
        section = config.test_dataset if prefix == "test_" else config.dataset
        if images:
            paths = {"images": images, "labels": labels}
            if not prefix:
                paths["annotations"] = options.get("annotations")
                paths["attributes"] = options.get("attributes")
            return paths
        return dict(section) if section else None

    def load_dataset(self, paths, split="train") -> Dataset | None:
        if not paths:
            return None
        dataset = load_idx(paths["images"], paths["labels"], split)
        if paths.get("annotations"):
            annotations = load_annotations(paths["annotations"])
            dataset = Dataset(dataset.images, dataset.labels, dataset.split, dataset.class_count,
                              dataset.ids, annotations, dataset.source)
        return dataset

    def require_dataset(self, config, options):
        dataset = self.load_dataset(self.dataset_paths(config, options))
        if dataset is None:
            raise usage_error("a dataset is required: --images/--labels or dataset: in the config")
        return dataset

    def require_model(self, config, options):
        path = options.get("model") or config.model
        if not path:
            raise usage_error("a model is required: --model or model: in the config")
        return load_model(path)

    def output_path(self, config, given, default):
        return Path(given) if given else config.output_dir / default
