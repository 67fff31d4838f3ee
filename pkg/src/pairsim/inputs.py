"""Reading parameter files and applying command-line overrides.

A parameter file is a JSON object holding the model, either as
``{"pi": [[...]]}`` or as ``{"alpha": [...], "beta": [...], "p": [[...]]}``,
and optionally a population, either as counts ``{"n": N, "x": [...], "y": [...]}``
or as fractions ``{"x_frac": [...], "y_frac": [...]}``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ValidationError
from .model import (
    ModelParams,
    PopulationCounts,
    PopulationFractions,
    build_params,
    round_population,
)


def load_document(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("parameter file must hold a JSON object")
    return doc


def apply_overrides(doc: dict, overrides: list[str] | None) -> dict:
    """``key=value`` pairs; values are parsed as JSON where possible."""
    doc = dict(doc)
    for item in overrides or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ValidationError(f"override {item!r} is not of the form key=value")
        try:
            doc[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            doc[key.strip()] = raw
    return doc


def params_from_doc(doc: dict) -> ModelParams:
    try:
        if "pi" in doc:
            return ModelParams.from_pi(doc["pi"])
        if {"alpha", "beta", "p"} <= doc.keys():
            return build_params(doc["alpha"], doc["beta"], doc["p"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed parameters: {exc}") from exc
    raise ValidationError("parameters need either 'pi' or 'alpha', 'beta' and 'p'")


def fractions_from_doc(doc: dict) -> PopulationFractions:
    if "x_frac" in doc:
        return PopulationFractions(doc["x_frac"], doc.get("y_frac", doc["x_frac"]))
    if "x" in doc and "n" in doc:
        return counts_from_doc(doc).fractions
    raise ValidationError("population needs 'x_frac'/'y_frac' or counts 'n', 'x', 'y'")


def counts_from_doc(doc: dict, n: int | None = None) -> PopulationCounts:
    """Counts from the file, or the rounding of the fractions to ``n``."""
    if "x" in doc and "n" in doc and n is None:
        return PopulationCounts(int(doc["n"]), doc["x"], doc.get("y", doc["x"]))
    if n is None:
        raise ValidationError("a population size is needed (--n or 'n' in the file)")
    return round_population(fractions_from_doc(doc), int(n))
