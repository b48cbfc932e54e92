"""Query answering over a closure: truth, minimal provenances, provenance
constraints, proof export and proof replay."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

from provauth.engine import Closure, ProofTree
from provauth.model import (
    Believes, Due, Formula, Guarded, Not, PolicyBase, Rule, Trusts, apply_subst,
    is_ground, match,
)
from provauth.parser import format_agents, parse_formula, pretty

PROOF_VERSION = 1


class UnsupportedQueryShape(ValueError):
    pass


class ProofError(ValueError):
    pass


@dataclass(frozen=True)
class Answer:
    substitution: dict
    provenance: frozenset
    proof: ProofTree
    belief: Formula


@dataclass(frozen=True)
class QueryResult:
    query: Formula
    answers: Tuple[Answer, ...] = ()
    provenances: Tuple[frozenset, ...] = ()

    @property
    def holds(self) -> bool:
        return bool(self.answers)

    def to_dict(self) -> dict:
        return {
            "query": pretty(self.query),
            "holds": self.holds,
            "provenances": [sorted(p) for p in self.provenances],
            "answers": [
                {
                    "substitution": {k: v.name for k, v in sorted(a.substitution.items())},
                    "belief": pretty(a.belief),
                    "provenance": sorted(a.provenance),
                    "proof": proof_to_dict(a.proof),
                }
                for a in self.answers
            ],
        }


def minimize(sets: Iterable[frozenset]) -> Tuple[frozenset, ...]:
    """Drop every set that has a proper subset in the family; sorted output."""
    uniq = set(sets)
    keep = [s for s in uniq if not any(o < s for o in uniq)]
    return tuple(sorted(keep, key=lambda s: (len(s), sorted(s))))


def _query_parts(q: Formula):
    """-> (pattern to look up, positive, agent, guard or None)."""
    if isinstance(q, Believes):
        return q, True, q.agent, None
    if isinstance(q, Not) and isinstance(q.body, Believes):
        return q, False, q.body.agent, None
    if isinstance(q, Due) and isinstance(q.body, Believes):
        return q.body, True, q.body.agent, q.agents
    raise UnsupportedQueryShape(
        f"query must be 'A says ...', 'not A says ...' or 'due {{...}} A says ...': {pretty(q)}")


def _sort_key(a: Answer):
    return (pretty(a.belief), len(a.provenance), sorted(a.provenance))


def holds(closure: Closure, q: Formula) -> QueryResult:
    """Answer a belief, non-belief or due query, enumerating variable bindings."""
    pattern, positive, agent, guard = _query_parts(q)
    answers = []
    for belief, s in closure.entries(positive, agent):
        if guard is not None and not s.provenance <= guard:
            continue
        m = match(pattern, belief)
        if m is not None:
            answers.append(Answer(m, s.provenance, s.proof, belief))
    answers.sort(key=_sort_key)
    return QueryResult(q, tuple(answers), minimize(a.provenance for a in answers))


def minimal_provenances(closure: Closure, belief: Formula) -> Tuple[frozenset, ...]:
    return minimize(closure.provenances(belief))


def holds_constrained(closure: Closure, belief: Formula, must_exclude=frozenset(),
                      must_within: Optional[frozenset] = None) -> QueryResult:
    """Holds iff some derivation's provenance avoids ``must_exclude`` and, when
    ``must_within`` is given, stays inside it."""
    must_exclude = frozenset(must_exclude)
    base = holds(closure, belief)
    kept = tuple(a for a in base.answers
                 if not (a.provenance & must_exclude)
                 and (must_within is None or a.provenance <= frozenset(must_within)))
    return QueryResult(belief, kept, minimize(a.provenance for a in kept))


# ---------------------------------------------------------------------------
# Proof JSON
# ---------------------------------------------------------------------------


def proof_to_dict(t: ProofTree, root: bool = True) -> dict:
    d = {"v": PROOF_VERSION} if root else {}
    d["conclusion"] = pretty(t.conclusion)
    d["rule"] = t.rule
    if t.rule == "stated":
        d["statement"] = t.statement
    d["provenance"] = sorted(t.provenance)
    d["children"] = [proof_to_dict(c, root=False) for c in t.children]
    return d


def proof_to_json(t: ProofTree) -> str:
    return json.dumps(proof_to_dict(t), separators=(",", ":"))


def proof_from_dict(d: dict) -> ProofTree:
    if "v" in d and d["v"] != PROOF_VERSION:
        raise ProofError(f"unsupported proof version {d['v']!r}")
    return ProofTree(
        parse_formula(d["conclusion"]),
        d["rule"],
        frozenset(d["provenance"]),
        tuple(proof_from_dict(c) for c in d["children"]),
        d.get("statement"),
    )


def proof_from_json(text: str) -> ProofTree:
    return proof_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


def _fail(node: ProofTree, why: str):
    raise ProofError(f"{node.rule} node '{pretty(node.conclusion)}': {why}")


def replay(t: ProofTree, base: PolicyBase) -> Tuple[Formula, frozenset]:
    """Re-derive ``t`` bottom-up from its rule tags.

    Returns the recomputed (conclusion, provenance) and raises
    :class:`ProofError` on the first node that does not follow.
    """
    kids = [replay(c, base) for c in t.children]

    if t.rule == "stated":
        if t.children:
            _fail(t, "a stated leaf has children")
        if t.statement is None or not 0 <= t.statement < len(base.statements):
            _fail(t, f"no statement {t.statement!r}")
        pattern = base.statements[t.statement].formula()
        if not is_ground(t.conclusion) or match(pattern, t.conclusion) is None:
            _fail(t, f"not an instance of statement {t.statement}")
        got = (t.conclusion, frozenset())

    elif t.rule == "R1":
        if len(kids) != 1 or not isinstance(kids[0][0], Due) \
                or not isinstance(kids[0][0].body, Believes) \
                or t.children[0].rule != "stated":
            _fail(t, "expects one stated due-attributed belief")
        got = (kids[0][0].body, kids[0][0].agents)

    elif t.rule == "R2":
        if len(kids) != 2 or t.children[1].rule != "stated":
            _fail(t, "expects a fact and a stated trust statement")
        (fact, prov), (trust, _) = kids
        if not isinstance(trust, Trusts):
            _fail(t, "second child is not a trust statement")
        if fact != Believes(trust.trustee, trust.body):
            _fail(t, "fact does not match the trusted formula")
        got = (Believes(trust.truster, trust.body), prov | {trust.trustee})

    elif t.rule == "R3":
        if len(kids) != 1 or not isinstance(kids[0][0], Believes):
            _fail(t, "expects one belief")
        got = (Believes(kids[0][0].agent, kids[0][0]), kids[0][1])

    elif t.rule == "R4":
        fact = kids[0][0] if len(kids) == 1 else None
        if not (isinstance(fact, Not) and isinstance(fact.body, Believes)):
            _fail(t, "expects one explicit non-belief")
        got = (Believes(fact.body.agent, fact), kids[0][1])

    elif t.rule == "R5":
        if not kids or t.children[-1].rule != "stated":
            _fail(t, "last child must be the stated rule")
        st = base.statements[t.children[-1].statement]
        if not isinstance(st, Rule):
            _fail(t, "last child is not a rule")
        sub = match(st.formula(), kids[-1][0])
        body = kids[:-1]
        if len(body) != len(st.body):
            _fail(t, f"expects {len(st.body)} conditions, got {len(body)}")
        for atom, (fact, prov) in zip(st.body, body):
            want = apply_subst(Believes(atom.agent, atom.body), sub) \
                if isinstance(atom, Guarded) else apply_subst(atom.formula(), sub)
            if fact != want:
                _fail(t, f"condition '{pretty(want)}' proved as '{pretty(fact)}'")
            if isinstance(atom, Guarded) and not prov <= atom.agents:
                _fail(t, f"provenance {format_agents(prov)} escapes guard "
                         f"{format_agents(atom.agents)}")
        head = apply_subst(st.head.formula(), sub)
        got = (head, frozenset().union(*(p for _, p in body)))

    else:
        _fail(t, "unknown rule tag")

    if got != (t.conclusion, t.provenance):
        _fail(t, f"replay gives '{pretty(got[0])}' with {format_agents(got[1])}, "
                 f"node records {format_agents(t.provenance)}")
    return got
