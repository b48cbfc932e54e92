"""Forward-chaining saturation with minimal-provenance bookkeeping.

Facts are beliefs ``agent says psi`` or explicit non-beliefs ``not agent says psi``.
Each fact carries an antichain of provenance sets (the trustees its
derivations passed through), one proof tree per set.  Derivation rules:

    R1  stated credentials, with empty provenance; ``due {AE} i says psi`` with AE
    R2  trust lift: ``i trusts j on phi`` + (j says phi.s, P)  ->  (i says phi.s, P | {j})
    R3  positive introspection: (j says psi, P)  ->  (j says j says psi, P)
    R4  negative introspection: (not j says psi, P)  ->  (j says not j says psi, P)
    R5  rule firing, provenance is the union over the matched conditions

Conflicts (opposite beliefs of one agent) are reported, never exploded.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Tuple

from provauth.model import (
    Believes, Credential, Formula, Guarded, Not, PolicyBase, Rule,
    StatedProvenance, TrustStatement, apply_subst, is_ground, match, modal_depth,
)
from provauth.parser import PolicyError, errors, validate

EMPTY = frozenset()


@dataclass(frozen=True)
class EngineConfig:
    depth_bound: int = 3
    max_rounds: int = 10000

    def __post_init__(self):
        if self.depth_bound < 1:
            raise ValueError("depth_bound must be at least 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")


class RoundsExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ProofTree:
    conclusion: Formula
    rule: str  # "R1".."R5" or "stated"
    provenance: frozenset = EMPTY
    children: tuple = ()
    statement: Optional[int] = None

    def nodes(self) -> Iterator["ProofTree"]:
        yield self
        for c in self.children:
            yield from c.nodes()

    def height(self) -> int:
        return 1 + max((c.height() for c in self.children), default=0)


class Support(NamedTuple):
    provenance: frozenset
    proof: ProofTree


class DerivedFact(NamedTuple):
    belief: Formula
    provenance: frozenset
    proof: ProofTree


class Conflict(NamedTuple):
    agent: str
    formula: Formula
    kind: str  # "belief-conflict" | "assertion-conflict"


def fact_key(f: Formula) -> Tuple[bool, str]:
    """(positive, agent) index key of a stored belief formula."""
    if isinstance(f, Believes):
        return True, f.agent
    if isinstance(f, Not) and isinstance(f.body, Believes):
        return False, f.body.agent
    raise ValueError(f"not a belief fact: {f!r}")


class _Store:
    """Mutable fact store used during saturation."""

    def __init__(self):
        self.facts: Dict[Formula, List[Support]] = {}
        self.index: Dict[Tuple[bool, str], List[Formula]] = defaultdict(list)

    def add(self, belief: Formula, support: Support) -> bool:
        """Insert keeping the antichain minimal.  True if the store changed."""
        entries = self.facts.get(belief)
        if entries is None:
            self.facts[belief] = [support]
            self.index[fact_key(belief)].append(belief)
            return True
        p = support.provenance
        if any(e.provenance <= p for e in entries):
            return False
        entries[:] = [e for e in entries if not p <= e.provenance]
        entries.append(support)
        return True

    def entries(self, positive: bool, agent: str) -> Iterator[Tuple[Formula, Support]]:
        for belief in self.index.get((positive, agent), ()):
            for s in self.facts[belief]:
                yield belief, s


class Closure:
    """Saturated fact store.  Treat as immutable once returned by :func:`saturate`."""

    def __init__(self, base: PolicyBase, cfg: EngineConfig, store: _Store, rounds: int):
        self.base = base
        self.config = cfg
        self.rounds = rounds
        self._store = store
        self.conflicts: Tuple[Conflict, ...] = tuple(_conflicts(store))

    def __len__(self) -> int:
        return len(self._store.facts)

    def __contains__(self, belief: Formula) -> bool:
        return belief in self._store.facts

    def beliefs(self) -> List[Formula]:
        return list(self._store.facts)

    def supports(self, belief: Formula) -> Tuple[Support, ...]:
        return tuple(self._store.facts.get(belief, ()))

    def provenances(self, belief: Formula) -> List[frozenset]:
        return [s.provenance for s in self._store.facts.get(belief, ())]

    def facts(self) -> Iterator[DerivedFact]:
        for belief, entries in self._store.facts.items():
            for s in entries:
                yield DerivedFact(belief, s.provenance, s.proof)

    def entries(self, positive: bool, agent: str) -> Iterator[Tuple[Formula, Support]]:
        return self._store.entries(positive, agent)

    def as_dict(self) -> Dict[Formula, frozenset]:
        """belief -> set of minimal provenance sets (proofs dropped)."""
        return {b: frozenset(s.provenance for s in e) for b, e in self._store.facts.items()}


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


def _match_in(atom, sub, entries) -> Iterator[Tuple[dict, Support]]:
    if isinstance(atom, Guarded):
        pattern = Believes(atom.agent, atom.body)
        for belief, s in entries:
            if s.provenance <= atom.agents:
                m = match(pattern, belief, sub)
                if m is not None:
                    yield m, s
        return
    pattern = atom.formula()
    for belief, s in entries:
        m = match(pattern, belief, sub)
        if m is not None:
            yield m, s


def _atom_key(atom) -> Tuple[bool, str]:
    if isinstance(atom, Guarded):
        return True, atom.agent
    return atom.positive, atom.agent


def match_atom(atom, sub, closure: Closure) -> List[Tuple[dict, frozenset]]:
    """Match one rule condition against stored facts.

    Plain beliefs match regardless of provenance, negated beliefs only match
    explicitly stated non-beliefs, and guarded beliefs need their provenance
    to lie within the guard set.
    """
    positive, agent = _atom_key(atom)
    return [(m, s.provenance)
            for m, s in _match_in(atom, sub, closure.entries(positive, agent))]


# ---------------------------------------------------------------------------
# Derivation
# ---------------------------------------------------------------------------


def _leaf(pb: PolicyBase, index: int, sub=None) -> ProofTree:
    f = pb.statements[index].formula()
    return ProofTree(apply_subst(f, sub or {}), "stated", EMPTY, (), index)


def initial_facts(pb: PolicyBase, cfg: EngineConfig) -> Iterator[DerivedFact]:
    """R1 over every ground assertion of the base."""
    for i, st in enumerate(pb.statements):
        if isinstance(st, Credential):
            belief = st.formula()
            if is_ground(belief) and modal_depth(belief) <= cfg.depth_bound:
                yield DerivedFact(belief, EMPTY, _leaf(pb, i))
        elif isinstance(st, StatedProvenance):
            belief = Believes(st.agent, st.body)
            if is_ground(belief) and modal_depth(belief) <= cfg.depth_bound:
                yield DerivedFact(belief, st.agents,
                                  ProofTree(belief, "R1", st.agents, (_leaf(pb, i),)))


def _lift(pb, i, st: TrustStatement, belief, s: Support) -> Optional[DerivedFact]:
    m = match(Believes(st.trustee, st.body), belief)
    if m is None:
        return None
    lifted = Believes(st.truster, apply_subst(st.body, m))
    prov = s.provenance | {st.trustee}
    return DerivedFact(lifted, prov, ProofTree(lifted, "R2", prov, (s.proof, _leaf(pb, i, m))))


def _introspect(belief, s: Support) -> Optional[DerivedFact]:
    if isinstance(belief, Believes):
        out = Believes(belief.agent, belief)
        return DerivedFact(out, s.provenance, ProofTree(out, "R3", s.provenance, (s.proof,)))
    inner = belief.body
    out = Believes(inner.agent, belief)
    return DerivedFact(out, s.provenance, ProofTree(out, "R4", s.provenance, (s.proof,)))


def _fire(pb, i, rule: Rule, sources) -> Iterator[DerivedFact]:
    """All head instances of ``rule`` where condition k is drawn from ``sources[k]()``."""

    def go(k, sub, chosen):
        if k == len(rule.body):
            head = Believes(rule.head.agent, apply_subst(rule.head.body, sub))
            prov = frozenset().union(*(s.provenance for s in chosen))
            kids = tuple(s.proof for s in chosen) + (_leaf(pb, i, sub),)
            yield DerivedFact(head, prov, ProofTree(head, "R5", prov, kids))
            return
        for m, s in _match_in(rule.body[k], sub, sources[k]()):
            yield from go(k + 1, m, chosen + (s,))

    yield from go(0, {}, ())


def _consequences(pb: PolicyBase, store: _Store, delta: Optional[List[Tuple[Formula, Support]]],
                  cfg: EngineConfig) -> Iterator[DerivedFact]:
    """Everything one round derives.  With ``delta`` given, only derivations
    using at least one delta entry (semi-naive); otherwise the full round."""
    if delta is None:
        delta_by_key = None
        pool = [(b, s) for b, ents in store.facts.items() for s in ents]
    else:
        delta_by_key = defaultdict(list)
        for b, s in delta:
            delta_by_key[fact_key(b)].append((b, s))
        pool = delta

    for belief, s in pool:
        if modal_depth(belief) + 1 <= cfg.depth_bound:
            yield _introspect(belief, s)

    for i, st in enumerate(pb.statements):
        if isinstance(st, TrustStatement):
            for belief, s in pool:
                if fact_key(belief) == (True, st.trustee):
                    d = _lift(pb, i, st, belief, s)
                    if d is not None:
                        yield d
        elif isinstance(st, Rule):
            full = [lambda a=a: store.entries(*_atom_key(a)) for a in st.body]
            if delta_by_key is None:
                yield from _fire(pb, i, st, full)
                continue
            for pivot, a in enumerate(st.body):
                fresh = delta_by_key.get(_atom_key(a))
                if not fresh:
                    continue
                sources = list(full)
                sources[pivot] = lambda fresh=fresh: iter(fresh)
                yield from _fire(pb, i, st, sources)


def immediate_consequences(pb: PolicyBase, closure: Closure) -> List[DerivedFact]:
    """One naive round of R1-R5 over a closure; empty of news at a fixpoint."""
    cfg = closure.config
    out = list(initial_facts(pb, cfg))
    out.extend(d for d in _consequences(pb, closure._store, None, cfg)
               if modal_depth(d.belief) <= cfg.depth_bound)
    return out


def saturate(pb: PolicyBase, cfg: Optional[EngineConfig] = None) -> Closure:
    """Compute the least fixpoint of R1-R5 over ``pb``.

    Raises :class:`PolicyError` if the base fails validation and
    :class:`RoundsExceeded` if ``cfg.max_rounds`` rounds do not reach a fixpoint.
    """
    cfg = cfg or EngineConfig()
    errs = errors(validate(pb, cfg))
    if errs:
        raise PolicyError(errs)

    store = _Store()
    delta = []
    for d in initial_facts(pb, cfg):
        if store.add(d.belief, Support(d.provenance, d.proof)):
            delta.append((d.belief, Support(d.provenance, d.proof)))

    rounds = 0
    while delta:
        if rounds >= cfg.max_rounds:
            raise RoundsExceeded(f"no fixpoint after {cfg.max_rounds} rounds")
        rounds += 1
        derived = [d for d in _consequences(pb, store, delta, cfg)
                   if modal_depth(d.belief) <= cfg.depth_bound]
        delta = []
        for d in derived:
            s = Support(d.provenance, d.proof)
            if store.add(d.belief, s):
                delta.append((d.belief, s))
    return Closure(pb, cfg, store, rounds)


# ---------------------------------------------------------------------------
# Conflicts
# ---------------------------------------------------------------------------


def _comparable(xs: Iterable[Support], ys: Iterable[Support]) -> bool:
    ys = list(ys)
    return any(a.provenance <= b.provenance or b.provenance <= a.provenance
               for a in xs for b in ys)


def _conflicts(store: _Store) -> Iterator[Conflict]:
    # Opposite facts only clash when some provenance view contains both,
    # i.e. their provenance sets are comparable; disagreement between
    # unrelated trustees (disjoint chains) is a subjective split, not a clash.
    seen = set()
    for belief, entries in store.facts.items():
        if not isinstance(belief, Believes):
            continue
        for other, kind in ((Believes(belief.agent, Not(belief.body)), "belief-conflict"),
                            (Not(belief), "assertion-conflict")):
            rivals = store.facts.get(other)
            if rivals and _comparable(entries, rivals):
                c = Conflict(belief.agent, belief.body, kind)
                if c not in seen:
                    seen.add(c)
                    yield c


def detect_conflicts(closure: Closure) -> List[Conflict]:
    return list(closure.conflicts)
