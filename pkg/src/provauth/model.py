"""Immutable formula and statement model for provenance-aware policy bases.

Agents are plain strings and agent sets are ``frozenset`` of strings.  A
formula is a tree of frozen dataclasses; structural equality and hashing
come for free, which is what the engine relies on to deduplicate facts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Union

AgentSet = frozenset  # frozenset[str]


# ---------------------------------------------------------------------------
# Terms and formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Const, Var]


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: tuple = ()

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True, slots=True)
class Not:
    body: "Formula"


@dataclass(frozen=True, slots=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True, slots=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True, slots=True)
class Believes:
    """``agent says body`` (B_i)."""

    agent: str
    body: "Formula"


@dataclass(frozen=True, slots=True)
class Due:
    """``due {agents} body``.  A single-agent D_i is a singleton set."""

    agents: frozenset
    body: "Formula"

    def __post_init__(self):
        if not isinstance(self.agents, frozenset):
            object.__setattr__(self, "agents", frozenset(self.agents))


@dataclass(frozen=True, slots=True)
class Trusts:
    """``truster trusts trustee on body`` (T_trustee^truster)."""

    truster: str
    trustee: str
    body: "Formula"


Formula = Union[Atom, Not, And, Implies, Believes, Due, Trusts]
Substitution = Mapping[str, Const]

MODAL = (Believes, Due, Trusts)


def children(f: Formula) -> tuple:
    if isinstance(f, Atom):
        return ()
    if isinstance(f, (And, Implies)):
        return (f.left, f.right)
    return (f.body,)


def subformulas(f: Formula) -> Iterator[Formula]:
    """Pre-order walk over ``f`` and all of its subformulas."""
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(reversed(children(g)))


def modal_depth(f: Formula) -> int:
    if isinstance(f, Atom):
        return 0
    inner = max(modal_depth(c) for c in children(f))
    return inner + 1 if isinstance(f, MODAL) else inner


def free_vars(f: Formula) -> set:
    return {t.name for g in subformulas(f) if isinstance(g, Atom)
            for t in g.args if isinstance(t, Var)}


def is_ground(f: Formula) -> bool:
    return not free_vars(f)


def agents_of(f: Formula) -> set:
    """Every agent name mentioned anywhere in ``f``."""
    out = set()
    for g in subformulas(f):
        if isinstance(g, Believes):
            out.add(g.agent)
        elif isinstance(g, Due):
            out.update(g.agents)
        elif isinstance(g, Trusts):
            out.update((g.truster, g.trustee))
    return out


def atoms_of(f: Formula) -> Iterator[Atom]:
    return (g for g in subformulas(f) if isinstance(g, Atom))


def apply_subst(f: Formula, s: Substitution) -> Formula:
    if not s:
        return f
    if isinstance(f, Atom):
        if not any(isinstance(t, Var) and t.name in s for t in f.args):
            return f
        return Atom(f.predicate, tuple(
            s.get(t.name, t) if isinstance(t, Var) else t for t in f.args))
    if isinstance(f, Not):
        return Not(apply_subst(f.body, s))
    if isinstance(f, And):
        return And(apply_subst(f.left, s), apply_subst(f.right, s))
    if isinstance(f, Implies):
        return Implies(apply_subst(f.left, s), apply_subst(f.right, s))
    if isinstance(f, Believes):
        return Believes(f.agent, apply_subst(f.body, s))
    if isinstance(f, Due):
        return Due(f.agents, apply_subst(f.body, s))
    if isinstance(f, Trusts):
        return Trusts(f.truster, f.trustee, apply_subst(f.body, s))
    raise TypeError(f"not a formula: {f!r}")


def match(pattern: Formula, ground: Formula,
          s: Optional[Substitution] = None) -> Optional[dict]:
    """One-way match of ``pattern`` against the ground formula ``ground``.

    Returns the extension of ``s`` that makes ``pattern`` equal ``ground``,
    or ``None``.  Variables only occur in term positions, so agents and
    predicates must agree literally.
    """
    out = dict(s or {})
    stack = [(pattern, ground)]
    while stack:
        p, g = stack.pop()
        if type(p) is not type(g):
            return None
        if isinstance(p, Atom):
            if p.predicate != g.predicate or len(p.args) != len(g.args):
                return None
            for pt, gt in zip(p.args, g.args):
                if isinstance(pt, Var):
                    bound = out.get(pt.name)
                    if bound is None:
                        out[pt.name] = gt
                    elif bound != gt:
                        return None
                elif pt != gt:
                    return None
            continue
        if isinstance(p, Believes):
            if p.agent != g.agent:
                return None
        elif isinstance(p, Due):
            if p.agents != g.agents:
                return None
        elif isinstance(p, Trusts):
            if (p.truster, p.trustee) != (g.truster, g.trustee):
                return None
        stack.extend(zip(children(p), children(g)))
    return out


def conjuncts(f: Formula) -> list:
    """Flatten nested ``And`` nodes left to right."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def conjoin(parts: Iterable[Formula]) -> Formula:
    parts = list(parts)
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Belief:
    """Body or head atom ``agent says body`` (``positive``) or ``not agent says body``."""

    agent: str
    positive: bool
    body: Formula

    def formula(self) -> Formula:
        b = Believes(self.agent, self.body)
        return b if self.positive else Not(b)


@dataclass(frozen=True, slots=True)
class Guarded:
    """Body atom ``due {agents} agent says body``."""

    agents: frozenset
    agent: str
    body: Formula

    def formula(self) -> Formula:
        return Due(self.agents, Believes(self.agent, self.body))


BodyAtom = Union[Belief, Guarded]


@dataclass(frozen=True, slots=True)
class Credential:
    positive: bool
    agent: str
    body: Formula

    def formula(self) -> Formula:
        return Belief(self.agent, self.positive, self.body).formula()


@dataclass(frozen=True, slots=True)
class TrustStatement:
    truster: str
    trustee: str
    body: Formula

    def formula(self) -> Formula:
        return Trusts(self.truster, self.trustee, self.body)


@dataclass(frozen=True, slots=True)
class Rule:
    body: tuple
    head: Belief

    def formula(self) -> Formula:
        return Implies(conjoin(a.formula() for a in self.body), self.head.formula())

    def body_vars(self) -> set:
        out = set()
        for a in self.body:
            out |= free_vars(a.body)
        return out


@dataclass(frozen=True, slots=True)
class StatedProvenance:
    agents: frozenset
    agent: str
    body: Formula

    def formula(self) -> Formula:
        return Due(self.agents, Believes(self.agent, self.body))


Statement = Union[Credential, TrustStatement, Rule, StatedProvenance]


def denormalize(st: Statement) -> Formula:
    return st.formula()


@dataclass(frozen=True)
class PolicyBase:
    owner: str
    registry: frozenset
    statements: tuple = ()
    # (line, column) of each statement in its source text, when parsed
    positions: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "registry", frozenset(self.registry))
        object.__setattr__(self, "statements", tuple(self.statements))

    def position(self, index: int) -> tuple:
        if self.positions is None:
            return (None, None)
        return self.positions[index]

    def extended(self, *extra: Statement) -> "PolicyBase":
        return PolicyBase(self.owner, self.registry, self.statements + tuple(extra))


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


class NormalizeError(ValueError):
    code = "NotInFragment"

    def __init__(self, message: str, subterm: Optional[Formula] = None):
        super().__init__(message)
        self.subterm = subterm


class NotInFragment(NormalizeError):
    code = "NotInFragment"


class UnsafeRule(NormalizeError):
    code = "UnsafeRule"


class DepthExceeded(NormalizeError):
    code = "DepthExceeded"


def _show(f: Formula) -> str:
    from provauth.parser import pretty
    return pretty(f)


def _check_content(f: Formula) -> None:
    # trust may only appear as a whole top-level statement
    for g in subformulas(f):
        if isinstance(g, Trusts):
            raise NotInFragment(
                f"trust statement nested inside a formula: {_show(g)}", g)


def _check_depth(f: Formula, limit: Optional[int], what: Formula) -> None:
    if limit is not None and modal_depth(f) > limit:
        raise DepthExceeded(
            f"modal depth {modal_depth(f)} exceeds bound {limit}: {_show(what)}", what)


def _body_atom(f: Formula) -> BodyAtom:
    if isinstance(f, Believes):
        return Belief(f.agent, True, f.body)
    if isinstance(f, Not) and isinstance(f.body, Believes):
        return Belief(f.body.agent, False, f.body.body)
    if isinstance(f, Due) and isinstance(f.body, Believes):
        return Guarded(f.agents, f.body.agent, f.body.body)
    raise NotInFragment(
        f"rule condition must be a belief, a negated belief or a due-guarded belief: {_show(f)}", f)


def _is_literal(f: Formula) -> bool:
    return isinstance(f, Atom) or (isinstance(f, Not) and isinstance(f.body, Atom))


def normalize(f: Formula, owner: str, depth_bound: Optional[int] = None) -> Statement:
    """Classify a top-level policy formula as a statement.

    Raises a :class:`NormalizeError` subclass naming the offending subterm when
    ``f`` is outside the supported fragment.  ``depth_bound`` is only enforced
    when given.
    """
    inner = None if depth_bound is None else depth_bound - 1

    if isinstance(f, Implies):
        parts = conjuncts(f.left)
        body = tuple(_body_atom(p) for p in parts)
        for a in body:
            _check_content(a.body)
            _check_depth(a.formula(), depth_bound, a.formula())
        head = f.right
        who = head.body if isinstance(head, Not) else head
        if isinstance(who, Believes) and who.agent != owner:
            raise NotInFragment(
                f"rule conclusion is a belief of {who.agent}, not of the owner {owner}: "
                f"{_show(head)}", head)
        if not isinstance(head, Believes):
            raise NotInFragment(
                f"rule conclusion must be a belief of the owner {owner}: {_show(head)}", head)
        if head.agent != owner:
            raise NotInFragment(
                f"rule conclusion is a belief of {head.agent}, not of the owner {owner}: "
                f"{_show(head)}", head)
        if not _is_literal(head.body):
            raise NotInFragment(
                f"rule conclusion must be an atom or a negated atom: {_show(head.body)}", head.body)
        rule = Rule(body, Belief(owner, True, head.body))
        missing = free_vars(head) - rule.body_vars()
        if missing:
            raise UnsafeRule(
                f"variable(s) {', '.join(sorted(missing))} in conclusion do not occur in "
                f"the conditions: {_show(f)}", head)
        return rule

    if isinstance(f, Trusts):
        _check_content(f.body)
        _check_depth(f.body, inner, f)
        return TrustStatement(f.truster, f.trustee, f.body)

    if isinstance(f, Believes):
        _check_content(f.body)
        _check_depth(f.body, inner, f)
        return Credential(True, f.agent, f.body)

    if isinstance(f, Not) and isinstance(f.body, Believes):
        _check_content(f.body.body)
        _check_depth(f.body.body, inner, f)
        return Credential(False, f.body.agent, f.body.body)

    if isinstance(f, Due) and isinstance(f.body, Believes):
        if not f.agents:
            raise NotInFragment("due with an empty agent set", f)
        _check_content(f.body.body)
        _check_depth(f.body.body, inner, f)
        return StatedProvenance(f.agents, f.body.agent, f.body.body)

    raise NotInFragment(
        "statement must be a credential, a trust statement, a rule or a "
        f"due-attributed belief: {_show(f)}", f)
