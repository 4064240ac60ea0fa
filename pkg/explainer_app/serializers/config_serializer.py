from rest_framework import serializers

from explainer_app.models import (
    DistractorClassPolicy, DistractorImagePolicy, ExclusionPolicy, HighlightMode, RoundingRule, SearchStrategy,
    StopRule,
)

CONFIG_VERSION = 1


class DatasetPathsSerializer(serializers.Serializer):
    images      = serializers.CharField()
    labels      = serializers.CharField()
    annotations = serializers.CharField(required=False, allow_null=True)
    attributes  = serializers.CharField(required=False, allow_null=True)


class SearchSectionSerializer(serializers.Serializer):
    strategy         = serializers.ChoiceField(choices=SearchStrategy.choices, required=False)
    exclusion_policy = serializers.ChoiceField(choices=ExclusionPolicy.choices, required=False)
    stop_rule        = serializers.ChoiceField(choices=StopRule.choices, required=False)
    max_edits        = serializers.IntegerField(min_value=1, required=False, allow_null=True)


class RelaxSectionSerializer(serializers.Serializer):
    learning_rate    = serializers.FloatField(required=False)
    max_steps        = serializers.IntegerField(min_value=1, required=False)
    entropy_weight_a = serializers.FloatField(min_value=0.0, required=False)
    entropy_weight_p = serializers.FloatField(min_value=0.0, required=False)
    sharpness_stop   = serializers.FloatField(required=False)
    gate_p_entropy   = serializers.BooleanField(required=False)
    rounding         = serializers.ChoiceField(choices=RoundingRule.choices, required=False)


class TrainingSectionSerializer(serializers.Serializer):
    epochs        = serializers.IntegerField(min_value=0, required=False)
    learning_rate = serializers.FloatField(required=False)
    momentum      = serializers.FloatField(min_value=0.0, required=False)
    batch_size    = serializers.IntegerField(min_value=1, required=False)
    holdout       = serializers.FloatField(min_value=0.0, max_value=0.9, required=False)


class DistractorSectionSerializer(serializers.Serializer):
    class_policy = serializers.ChoiceField(choices=DistractorClassPolicy.choices, required=False)
    image_policy = serializers.ChoiceField(choices=DistractorImagePolicy.choices, required=False)


class RenderingSectionSerializer(serializers.Serializer):
    highlight = serializers.ChoiceField(choices=HighlightMode.choices, required=False)


class EvaluationSectionSerializer(serializers.Serializer):
    radius                = serializers.FloatField(min_value=0.0, required=False, allow_null=True)
    distractors_per_query = serializers.IntegerField(min_value=2, required=False)


class RunConfigSerializer(serializers.Serializer):
    version      = serializers.IntegerField()
    seed         = serializers.IntegerField(min_value=0, required=False)
    workers      = serializers.IntegerField(min_value=1, required=False)
    output_dir   = serializers.CharField(required=False)
    model        = serializers.CharField(required=False, allow_null=True)
    dataset      = DatasetPathsSerializer(required=False, allow_null=True)
    test_dataset = DatasetPathsSerializer(required=False, allow_null=True)
    search       = SearchSectionSerializer(required=False)
    relax        = RelaxSectionSerializer(required=False)
    training     = TrainingSectionSerializer(required=False)
    distractor   = DistractorSectionSerializer(required=False)
    rendering    = RenderingSectionSerializer(required=False)
    evaluation   = EvaluationSectionSerializer(required=False)

    def validate_version(self, value):
        if value != CONFIG_VERSION:
            raise serializers.ValidationError(f"unsupported config version {value}")
        return value
