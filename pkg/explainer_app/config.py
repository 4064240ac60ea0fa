"""Run configuration: settings defaults, then the YAML config file, then CLI flags."""
import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml
from django.conf import settings

from explainer_app.exceptions import FormatError
from explainer_app.models import DistractorClassPolicy, DistractorImagePolicy, HighlightMode
from explainer_app.nn.trainer import TrainingConfig
from explainer_app.search.config import RelaxOptConfig, SearchConfig
from explainer_app.serializers import validate_document
from explainer_app.serializers.config_serializer import CONFIG_VERSION, RunConfigSerializer

logger = logging.getLogger(__name__)


def default_document():
    explainer = settings.EXPLAINER
    return {
        "version": CONFIG_VERSION,
        "seed": explainer["SEED"],
        "workers": explainer["WORKERS"],
        "output_dir": str(explainer["OUTPUT_DIR"]),
        "model": None,
        "dataset": None,
        "test_dataset": None,
        "search": {"strategy": "exhaustive", "exclusion_policy": "query-and-distractor-cells",
                   "stop_rule": "argmax", "max_edits": None},
        "relax": RelaxOptConfig().as_dict(),
        "training": {"epochs": 10, "learning_rate": 0.01, "momentum": 0.9, "batch_size": 64, "holdout": 0.0},
        "distractor": {"class_policy": DistractorClassPolicy.RANDOM.value,
                       "image_policy": DistractorImagePolicy.RANDOM.value},
        "rendering": {"highlight": HighlightMode.SOFT.value},
        "evaluation": {"radius": None, "distractors_per_query": 5},
    }


def merge(base, overrides):
    """Recursive update; ``None`` in ``overrides`` means "not given"."""
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _plain(data):
    if isinstance(data, dict):
        return {str(key): _plain(value) for key, value in data.items()}
    if isinstance(data, list):
        return [_plain(value) for value in data]
    return data


def read_config_file(path):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}", field="config") from exc
    except yaml.YAMLError as exc:
        raise FormatError(f"config {path} is not valid YAML: {exc}", field="config") from exc
    validate_document(RunConfigSerializer, raw, "config")
    return raw


@dataclass(frozen=True)
class RunConfig:
    seed:         int
    workers:      int
    output_dir:   Path
    model:        str | None
    dataset:      dict | None
    test_dataset: dict | None
    search:       SearchConfig
    training:     TrainingConfig
    holdout:      float
    class_policy: str
    image_policy: str
    highlight:    str
    radius:       float | None
    distractors_per_query: int
    document:     dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_document(cls, document):
        search = document["search"]
        training = document["training"]
        return cls(
            seed=document["seed"],
            workers=document["workers"],
            output_dir=Path(document["output_dir"]),
            model=document["model"],
            dataset=document["dataset"],
            test_dataset=document["test_dataset"],
            search=SearchConfig(
                exclusion_policy=search["exclusion_policy"],
                max_edits=search["max_edits"],
                strategy=search["strategy"],
                stop_rule=search["stop_rule"],
                relax=RelaxOptConfig(**document["relax"]),
                workers=document["workers"],
            ),
            training=TrainingConfig(
                epochs=training["epochs"],
                learning_rate=training["learning_rate"],
                momentum=training["momentum"],
                batch_size=training["batch_size"],
                seed=document["seed"],
            ),
            holdout=training["holdout"],
            class_policy=document["distractor"]["class_policy"],
            image_policy=document["distractor"]["image_policy"],
            highlight=document["rendering"]["highlight"],
            radius=document["evaluation"]["radius"],
            distractors_per_query=document["evaluation"]["distractors_per_query"],
            document=document,
        )

    def echo(self):
        """The resolved configuration as embedded in records and reports."""
        return copy.deepcopy(self.document)


def resolve_config(config_path=None, overrides=None) -> RunConfig:
    """defaults ← ``config_path`` ← ``overrides`` (nested dict, None entries ignored)."""
    document = default_document()
    if config_path:
        document = merge(document, read_config_file(config_path))
    if overrides:
        document = merge(document, overrides)
    # flags are validated like file values
    validate_document(RunConfigSerializer, document, "config")
    document = _plain(document)
    logger.debug("config resolved path=%s seed=%s strategy=%s", config_path, document["seed"],
                 document["search"]["strategy"])
    return RunConfig.from_document(document)
