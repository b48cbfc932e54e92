"""Provenance-aware authorization policies with belief, trust and due-to operators."""

from provauth.engine import (
    Closure, Conflict, DerivedFact, EngineConfig, ProofTree, RoundsExceeded,
    detect_conflicts, match_atom, saturate,
)
from provauth.model import (
    And, Atom, Believes, Const, Credential, Due, Implies, Not, PolicyBase, Rule,
    StatedProvenance, Trusts, TrustStatement, Var, apply_subst, free_vars,
    is_ground, modal_depth, normalize,
)
from provauth.parser import (
    Diagnostic, PolicyError, parse_formula, parse_policy, pretty, validate,
)
from provauth.provenance import (
    QueryResult, UnsupportedQueryShape, holds, holds_constrained,
    minimal_provenances, proof_to_json, replay,
)

__version__ = "0.1.0"

__all__ = [
    "And", "Atom", "Believes", "Closure", "Conflict", "Const", "Credential",
    "DerivedFact", "Diagnostic", "Due", "EngineConfig", "Implies", "Not",
    "PolicyBase", "PolicyError", "ProofTree", "QueryResult", "RoundsExceeded",
    "Rule", "StatedProvenance", "TrustStatement", "Trusts", "UnsupportedQueryShape",
    "Var", "apply_subst", "detect_conflicts", "free_vars", "holds",
    "holds_constrained", "is_ground", "match_atom", "minimal_provenances",
    "modal_depth", "normalize", "parse_formula", "parse_policy", "pretty",
    "proof_to_json", "replay", "saturate", "validate",
]
