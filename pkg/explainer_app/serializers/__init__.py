from rest_framework import serializers

from explainer_app.exceptions import FormatError


def _first_error(errors, prefix=""):
    """(dotted field path, message) of the first DRF validation error."""
    if isinstance(errors, dict):
        key, value = next(iter(errors.items()))
        path = key if key != "non_field_errors" else ""
        return _first_error(value, f"{prefix}.{path}".strip(".") if path else prefix)
    if isinstance(errors, list) and errors:
        for index, item in enumerate(errors):
            if item:
                if isinstance(item, (dict, list)):
                    return _first_error(item, f"{prefix}.{index}".strip("."))
                return prefix, str(item)
    return prefix, str(errors)


def validate_document(serializer_class, data, document):
    """Run ``serializer_class`` on parsed YAML; raise FormatError naming the bad field."""
    if not isinstance(data, dict):
        raise FormatError(f"{document}: expected a mapping at top level", field=document)
    serializer = serializer_class(data=data)
    try:
        serializer.is_valid(raise_exception=True)
    except serializers.ValidationError as exc:
        field, message = _first_error(exc.detail)
        raise FormatError(f"{document}: {field or 'document'}: {message}", field=field or document) from None
    return serializer.validated_data
