"""JSON schemas for every JSON document the command line writes."""

from __future__ import annotations

import jsonschema

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM}, "minItems": 1}
_MATRIX_OR_NULL = {"type": "array", "items": {"type": "array", "items": _NUM_OR_NULL}, "minItems": 1}
_VECTOR = {"type": "array", "items": _NUM}


def _obj(props: dict, required=None) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(required if required is not None else props),
        "additionalProperties": False,
    }


TRAJECTORY = _obj({
    "n": {"type": "integer", "minimum": 0},
    "events": {"type": "array",
               "items": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}},
    "pattern": _MATRIX,
    "t_absorb": _NUM_OR_NULL,
})

ENSEMBLE = _obj({
    "n": {"type": "integer", "minimum": 0},
    "replicates": {"type": "integer", "minimum": 1},
    "seed": {"type": "integer", "minimum": 0},
    "mean_pattern": _MATRIX,
    "se_pattern": _MATRIX,
    "patterns": {"type": "array", "items": _MATRIX},
})

PATTERN = _obj({
    "pattern": _MATRIX,
    "error_bound": {"type": "number", "minimum": 0},
    "eps": {"type": "number", "exclusiveMinimum": 0},
})

CLASSIFY = _obj({
    "class": {"enum": ["heterogamous", "panmictic", "homogamous"]},
    "curvature": _NUM,
})

FINE_BALANCE = _obj({
    "fine_balance": {"type": "boolean"},
    "defect": {"type": "number", "minimum": 0},
    "alpha_bar": {"anyOf": [_VECTOR, {"type": "null"}]},
    "beta_bar": {"anyOf": [_VECTOR, {"type": "null"}]},
    "pattern": {"anyOf": [_MATRIX, {"type": "null"}]},
})

SYM2X2 = _obj({
    "case": {"enum": ["FineBalance", "GammaOne", "GammaZero", "Generic"]},
    "gamma": _NUM_OR_NULL,
    "theta1": _NUM_OR_NULL,
    "theta2": _NUM_OR_NULL,
    "a1_inf": _NUM,
    "q12_inf": _NUM,
    "pattern": _MATRIX,
    "class": {"enum": ["heterogamous", "panmictic", "homogamous"]},
    "t": _NUM_OR_NULL,
    "q12_t": _NUM_OR_NULL,
}, required=["case", "gamma", "theta1", "theta2", "a1_inf", "q12_inf", "pattern", "class"])

FLUCTUATIONS = _obj({
    "n": {"type": "integer", "minimum": 1},
    "t": _NUM,
    "replicates": {"type": "integer", "minimum": 1},
    "cov_empirical": _MATRIX_OR_NULL,
    "cov_limit": _MATRIX_OR_NULL,
    "rel_diff": _MATRIX_OR_NULL,
    "mean_empirical": {"type": "array", "items": _NUM_OR_NULL},
    "mean_se": {"type": "array", "items": _NUM_OR_NULL},
})

CONVERGE = _obj({
    "t_end": _NUM,
    "n_list": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    "errors": _MATRIX,
    "median": _VECTOR,
})

SCHEMAS = {
    "trajectory": TRAJECTORY,
    "ensemble": ENSEMBLE,
    "pattern": PATTERN,
    "classify": CLASSIFY,
    "fine-balance": FINE_BALANCE,
    "sym2x2": SYM2X2,
    "clt": FLUCTUATIONS,
    "converge": CONVERGE,
}


def validate(doc: dict, name: str) -> None:
    jsonschema.validate(doc, SCHEMAS[name])
