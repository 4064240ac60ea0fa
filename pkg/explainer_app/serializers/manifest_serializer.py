from rest_framework import serializers

MANIFEST_FORMAT = "counterfactual-model"
MANIFEST_VERSION = 1


class InputGeometrySerializer(serializers.Serializer):
    height   = serializers.IntegerField(min_value=1)
    width    = serializers.IntegerField(min_value=1)
    channels = serializers.IntegerField(min_value=1)


class LayerSpecSerializer(serializers.Serializer):
    """Layer kinds are checked when the spec is built, so unknown kinds get their own error."""
    kind         = serializers.CharField()
    out_channels = serializers.IntegerField(min_value=1, required=False)
    kernel_size  = serializers.IntegerField(min_value=1, required=False)
    stride       = serializers.IntegerField(min_value=1, required=False)
    padding      = serializers.IntegerField(min_value=0, required=False)
    window       = serializers.IntegerField(min_value=1, required=False)
    units        = serializers.IntegerField(min_value=1, required=False)


class WeightEntrySerializer(serializers.Serializer):
    name  = serializers.CharField()
    shape = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_empty=True)


class ModelManifestSerializer(serializers.Serializer):
    format         = serializers.CharField()
    version        = serializers.IntegerField()
    input_geometry = InputGeometrySerializer()
    class_count    = serializers.IntegerField(min_value=1)
    blob           = serializers.CharField()
    extractor      = LayerSpecSerializer(many=True, allow_empty=True)
    head           = LayerSpecSerializer(many=True)
    weights        = WeightEntrySerializer(many=True)
    metrics        = serializers.JSONField(required=False)

    def validate_format(self, value):
        if value != MANIFEST_FORMAT:
            raise serializers.ValidationError(f"expected {MANIFEST_FORMAT!r}")
        return value

    def validate_version(self, value):
        if value != MANIFEST_VERSION:
            raise serializers.ValidationError(f"unsupported manifest version {value}")
        return value
