"""JSON schemas for scene inputs and CLI reports."""

from __future__ import annotations

import jsonschema

from .errors import InputError

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SECTION = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "type": {"const": "polygon"},
                "vertices": {"type": "array", "items": _POINT, "minItems": 3},
            },
            "required": ["type", "vertices"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "disk"},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "center": _POINT,
            },
            "required": ["type", "radius"],
            "additionalProperties": False,
        },
    ]
}

CONTACT_SCENE = {
    "type": "object",
    "properties": {
        "section": SECTION,
        "contacts": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"point": _POINT, "normal": _POINT, "value": {"type": "number"}},
                "required": ["point"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["contacts"],
    "additionalProperties": False,
}

CAPILLARY_SCENE = {
    "type": "object",
    "properties": {
        "obstacle": SECTION,
        "droplet": {"type": "array", "items": _POINT, "minItems": 3},
        "lambda": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
        "snap": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["obstacle", "droplet", "lambda"],
    "additionalProperties": False,
}

REPORT = {
    "type": "object",
    "properties": {
        "command": {
            "enum": ["partition", "check-abp", "phi-scan", "capillary", "neumann-chain", "fuzz"]
        },
        "version": {"type": "string"},
        "seed": {"type": "integer"},
        "input_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "status": {"enum": ["ok", "violation"]},
        "result": {"type": "object"},
    },
    "required": ["command", "version", "seed", "input_sha256", "tolerances", "status", "result"],
    "additionalProperties": False,
}

RESULT = {
    "partition": {"required": ["cells", "box_half_width"]},
    "check-abp": {"required": ["lambda", "measure", "cap", "margin", "per_cell"]},
    "phi-scan": {"required": ["grid_size", "min_margin", "endpoints", "max_derivative_error"]},
    "capillary": {"required": ["energy", "free_perimeter", "wetted", "volume", "reference", "margin"]},
    "neumann-chain": {"required": ["c", "A_hat", "cap", "bound", "tolerance", "upper_ok", "lower_ok"]},
    "fuzz": {"required": ["trials", "min_margin", "violations"]},
}


def validate(instance, schema, what: str) -> None:
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        raise InputError(f"{what}: {exc.message}") from exc


def validate_report(report: dict) -> None:
    validate(report, REPORT, "report")
    validate(report["result"], {"type": "object", **RESULT[report["command"]]}, "report result")
