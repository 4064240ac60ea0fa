from rest_framework import serializers

from explainer_app.models import ExplanationStatus, SearchStrategy

RECORD_FORMAT = "counterfactual-explanation"
RECORD_VERSION = 1


class CellSerializer(serializers.ListField):
    """[row, col]"""

    def __init__(self, **kwargs):
        super().__init__(child=serializers.IntegerField(min_value=0), min_length=2, max_length=2, **kwargs)


class RectSerializer(serializers.ListField):
    """[top, left, bottom, right], inclusive pixel bounds"""

    def __init__(self, **kwargs):
        super().__init__(child=serializers.IntegerField(min_value=0), min_length=4, max_length=4, **kwargs)


class ImageRefSerializer(serializers.Serializer):
    id    = serializers.CharField()
    label = serializers.IntegerField(min_value=0)


class GridSerializer(serializers.Serializer):
    height = serializers.IntegerField(min_value=1)
    width  = serializers.IntegerField(min_value=1)


class EditEntrySerializer(serializers.Serializer):
    step        = serializers.IntegerField(min_value=1)
    query_cell  = CellSerializer()
    source_cell = CellSerializer()
    query_rect  = RectSerializer(required=False)
    source_rect = RectSerializer(required=False)


class TrajectoryEntrySerializer(serializers.Serializer):
    step           = serializers.IntegerField(min_value=0)
    query_logprob  = serializers.FloatField()
    target_logprob = serializers.FloatField()


class ExplanationRecordSerializer(serializers.Serializer):
    format     = serializers.CharField()
    version    = serializers.IntegerField()
    query      = ImageRefSerializer()
    distractor = ImageRefSerializer()
    grid       = GridSerializer()
    strategy   = serializers.ChoiceField(choices=SearchStrategy.choices)
    status     = serializers.ChoiceField(choices=ExplanationStatus.choices)
    edits      = EditEntrySerializer(many=True, allow_empty=True)
    trajectory = TrajectoryEntrySerializer(many=True)
    notes      = serializers.ListField(child=serializers.CharField(allow_blank=True), required=False)
    config     = serializers.JSONField(required=False)
    rasters    = serializers.DictField(child=serializers.CharField(), required=False)

    def validate_format(self, value):
        if value != RECORD_FORMAT:
            raise serializers.ValidationError(f"expected {RECORD_FORMAT!r}")
        return value

    def validate_version(self, value):
        if value != RECORD_VERSION:
            raise serializers.ValidationError(f"unsupported record version {value}")
        return value

    def validate(self, attrs):
        steps = [entry["step"] for entry in attrs["trajectory"]]
        if steps != list(range(len(attrs["edits"]) + 1)):
            raise serializers.ValidationError({"trajectory": "needs one entry per edit plus the start, in order"})
        if [entry["step"] for entry in attrs["edits"]] != list(range(1, len(attrs["edits"]) + 1)):
            raise serializers.ValidationError({"edits": "steps must run 1..n in order"})
        return attrs
