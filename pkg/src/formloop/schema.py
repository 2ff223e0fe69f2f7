"""Structural schema handling shared by the broker and the record store.

Schemas are plain JSON-schema documents (draft 2020-12 subset). Payloads are
validated on every post; rejections name the offending field so tenants can
fix their documents without guessing.
"""

from __future__ import annotations

import json
from typing import Any

import jsonschema

_VALIDATOR = jsonschema.Draft202012Validator


class SchemaError(Exception):
    """Base class for schema-related failures."""


class InvalidSchema(SchemaError):
    """The schema document itself is malformed (cyclic, wrong structure, ...)."""


class ValidationError(SchemaError):
    """A payload does not conform to its schema."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field


def check_schema(schema: Any) -> None:
    """Raise InvalidSchema unless `schema` is a well-formed schema document.

    A schema must be JSON-serializable (this rejects cyclic documents) and
    structurally valid per the metaschema.
    """
    try:
        json.dumps(schema)
    except (TypeError, ValueError) as exc:
        raise InvalidSchema(f"schema is not a JSON document: {exc}") from exc
    try:
        _VALIDATOR.check_schema(schema)
    except jsonschema.SchemaError as exc:
        raise InvalidSchema(f"malformed schema: {exc.message}") from exc


def validate(payload: Any, schema: Any) -> None:
    """Validate `payload` against `schema`; raise ValidationError naming the field."""
    validator = _VALIDATOR(schema)
    best = jsonschema.exceptions.best_match(validator.iter_errors(payload))
    if best is None:
        return
    field = _offending_field(best)
    raise ValidationError(f"payload invalid at '{field}': {best.message}", field=field)


def _offending_field(error: jsonschema.ValidationError) -> str:
    path = [str(p) for p in error.absolute_path]
    # "required" failures point at the parent object; pull the missing name
    # out of the message so the error names the actual field.
    if error.validator == "required":
        missing = error.message.split("'")
        if len(missing) >= 2:
            path.append(missing[1])
    return ".".join(path) if path else "<root>"


def is_valid(payload: Any, schema: Any) -> bool:
    try:
        validate(payload, schema)
    except ValidationError:
        return False
    return True
