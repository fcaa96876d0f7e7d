"""Termination-oracle evaluation: scoring, witness checking, precondition equivalence."""

import json

from . import _core
from ._core import (
    check_equivalence,
    classify,
    extract_answer,
    f1_per_class,
    pass_at_k,
    pass_at_k_exact,
    prompt_resource,
    prompt_resource_names,
    score,
    svcomp_score,
)

__all__ = [
    "check_equivalence",
    "check_witness",
    "classify",
    "emit_graphml",
    "extract_answer",
    "f1_per_class",
    "parse_prediction",
    "pass_at_k",
    "pass_at_k_exact",
    "prompt_resource",
    "prompt_resource_names",
    "score",
    "svcomp_score",
    "validate_schema",
]


def _dump(witness):
    return witness if isinstance(witness, str) else json.dumps(witness)


def parse_prediction(raw):
    """Verdict, witness dict (or None) and witness type errors of a model answer."""
    return json.loads(_core.parse_prediction(raw))


def validate_schema(witness, program_lines=None):
    return _core.validate_schema(_dump(witness), program_lines)


def check_witness(source, witness, domain_lo=-64, domain_hi=64):
    """(kind, description); kind is proven_infinite, bounded_evidence, infeasible, unknown or no_lasso."""
    return _core.check_witness(source, _dump(witness), domain_lo, domain_hi)


def emit_graphml(witness, programfile, source, architecture="32bit", creationtime=""):
    return _core.emit_graphml(_dump(witness), programfile, source, architecture, creationtime)
