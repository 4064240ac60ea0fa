from rest_framework import serializers

ANNOTATIONS_FORMAT = "annotations"
ATTRIBUTES_FORMAT = "class-attributes"
DOCUMENT_VERSION = 1


class _VersionedSerializer(serializers.Serializer):
    expected_format = None

    format  = serializers.CharField()
    version = serializers.IntegerField()

    def validate_format(self, value):
        if value != self.expected_format:
            raise serializers.ValidationError(f"expected {self.expected_format!r}")
        return value

    def validate_version(self, value):
        if value != DOCUMENT_VERSION:
            raise serializers.ValidationError(f"unsupported version {value}")
        return value


class KeypointSerializer(serializers.Serializer):
    name    = serializers.CharField()
    x       = serializers.FloatField()
    y       = serializers.FloatField()
    visible = serializers.BooleanField(default=True)


class ImageAnnotationSerializer(serializers.Serializer):
    id        = serializers.CharField()
    mask      = serializers.CharField(help_text="PGM path, relative to the annotation file")
    keypoints = KeypointSerializer(many=True, required=False)


class AnnotationFileSerializer(_VersionedSerializer):
    expected_format = ANNOTATIONS_FORMAT

    images = ImageAnnotationSerializer(many=True)

    def validate_images(self, value):
        ids = [entry["id"] for entry in value]
        if len(set(ids)) != len(ids):
            raise serializers.ValidationError("image ids must be unique")
        return value


class ClassAttributesSerializer(serializers.Serializer):
    label  = serializers.IntegerField(min_value=0)
    values = serializers.ListField(child=serializers.FloatField(), min_length=1)


class AttributeTableSerializer(_VersionedSerializer):
    expected_format = ATTRIBUTES_FORMAT

    classes = ClassAttributesSerializer(many=True)

    def validate_classes(self, value):
        labels = sorted(entry["label"] for entry in value)
        if labels != list(range(len(value))):
            raise serializers.ValidationError("labels must cover 0..n-1 exactly once")
        if len({len(entry["values"]) for entry in value}) != 1:
            raise serializers.ValidationError("every class needs the same number of attributes")
        return value
