"""Shared test helpers: policy fixtures, a random base generator and an
independent brute-force fixpoint oracle."""

from __future__ import annotations

import itertools
import random
from pathlib import Path

from provauth.model import (
    And, Atom, Believes, Const, Credential, Due, Guarded, Belief, Implies, Not, PolicyBase, Rule,
    StatedProvenance, Trusts, TrustStatement, Var, apply_subst, free_vars, modal_depth,
    subformulas,
)
from provauth.parser import errors, parse_policy, validate

POLICIES = Path(__file__).parent / "policies"


def policy_text(name: str) -> str:
    return (POLICIES / name).read_text(encoding="utf-8")


def load(name: str) -> PolicyBase:
    return parse_policy(policy_text(name))


# ---------------------------------------------------------------------------
# Random bases
# ---------------------------------------------------------------------------

CONSTS = ("a", "b")
# predicate -> arity; kept tiny so random statements actually interact
PREDS = {"p": 0, "q": 1}


def _literal(rng, consts, allow_vars=False, negate=0.2):
    pred = rng.choice(sorted(PREDS))
    args = []
    for _ in range(PREDS[pred]):
        if allow_vars and rng.random() < 0.5:
            args.append(Var(rng.choice("XY")))
        else:
            args.append(Const(rng.choice(consts)))
    a = Atom(pred, tuple(args))
    return Not(a) if rng.random() < negate else a


def _content(rng, agents, consts, max_depth, allow_vars=False):
    """A belief body of modal depth at most ``max_depth``."""
    roll = rng.random()
    if max_depth >= 1 and roll < 0.3:
        inner = Believes(rng.choice(agents), _content(rng, agents, consts, max_depth - 1, allow_vars))
        return Not(inner) if rng.random() < 0.5 else inner
    return _literal(rng, consts, allow_vars)


def _pick(rng, agents):
    # most statements involve the first three agents so chains connect
    return rng.choice(agents[:3]) if rng.random() < 0.8 else rng.choice(agents)


def random_statement(rng, owner, agents, consts, depth_bound=3):
    kind = rng.random()
    others = [a for a in agents if a != owner] or [owner]
    if kind < 0.3:
        j = _pick(rng, agents)
        body = _content(rng, agents[:3], consts, min(2, depth_bound - 1))
        return Credential(rng.random() > 0.25, j, body)
    if kind < 0.6:
        i = owner if rng.random() < 0.5 else _pick(rng, agents)
        j = _pick(rng, [a for a in agents if a != i] or agents)
        shape = rng.random()
        lit = _literal(rng, consts, allow_vars=True)
        if shape < 0.55 or depth_bound < 2:
            body = lit
        elif shape < 0.8:
            body = Not(Believes(j, lit))
        else:
            body = Believes(j, lit)
        return TrustStatement(i, j, body)
    if kind < 0.9:
        atoms = []
        for _ in range(rng.randint(1, 3)):
            agent = owner if rng.random() < 0.6 else _pick(rng, agents)
            body = _content(rng, agents[:3], consts, 1 if depth_bound >= 3 else 0, allow_vars=True)
            r = rng.random()
            if r < 0.45:
                agents_set = frozenset(rng.sample(others[:3], rng.randint(1, min(2, len(others[:3])))))
                atoms.append(Guarded(agents_set, agent, body))
            elif r < 0.8:
                atoms.append(Belief(agent, True, body))
            else:
                atoms.append(Belief(agent, False, body))
        bound = sorted(set().union(*(free_vars(a.body) for a in atoms)))
        head = _literal(rng, consts)
        if isinstance(head, Not):
            core = head.body
        else:
            core = head
        if core.args and bound and rng.random() < 0.7:
            core = Atom(core.predicate, (Var(rng.choice(bound)),))
        head = Not(core) if isinstance(head, Not) else core
        return Rule(tuple(atoms), Belief(owner, True, head))
    i = rng.choice(agents)
    agents_set = frozenset(rng.sample(others, rng.randint(1, min(2, len(others)))))
    return StatedProvenance(agents_set, i, _literal(rng, consts))


def _generalize(rng, lit):
    """Replace a constant argument by X half of the time."""
    core = lit.body if isinstance(lit, Not) else lit
    if core.args and rng.random() < 0.5:
        core = Atom(core.predicate, (Var("X"),))
    return Not(core) if isinstance(lit, Not) else core


def _theme(rng, owner, agents, consts, depth_bound):
    """A credential that some trust statement lifts and some rule consumes."""
    j = rng.choice([a for a in agents if a != owner])
    lit = _literal(rng, consts)
    out = []
    if depth_bound >= 3 and rng.random() < 0.3:
        # certificate-style: a non-belief lifted through negative introspection
        out.append(Credential(False, j, lit))
        content = Not(Believes(j, _generalize(rng, lit)))
    else:
        out.append(Credential(True, j, lit))
        content = _generalize(rng, lit)
    out.append(TrustStatement(owner, j, content))
    if rng.random() < 0.5:
        # a second, competing route through another trustee
        k = rng.choice(agents)
        if k not in (owner, j):
            out.append(TrustStatement(owner, k, content))
            out.append(Credential(True, k, lit) if not isinstance(content, Not)
                       else Credential(False, k, lit))
    guard = frozenset({j} | ({rng.choice(agents)} if rng.random() < 0.4 else set())) - {owner}
    cond = Guarded(guard or frozenset({j}), owner, content) if rng.random() < 0.7 \
        else Belief(owner, True, content)
    bound = sorted(free_vars(content))
    head = Atom("q", (Var(bound[0]),)) if bound else _literal(rng, consts, negate=0.0)
    if rng.random() < 0.3:
        head = Not(head)
    out.append(Rule((cond,), Belief(owner, True, head)))
    return out


def random_base(rng, max_agents=6, max_statements=10, n_consts=2, depth_bound=3) -> PolicyBase:
    n = rng.randint(2, max_agents)
    agents = [f"A{k}" for k in range(n)]
    consts = CONSTS[:n_consts]
    owner = agents[0]
    while True:
        size = rng.randint(1, max_statements)
        stmts = []
        if rng.random() < 0.6:
            stmts = _theme(rng, owner, agents, consts, depth_bound)[:size]
        while len(stmts) < size:
            stmts.append(random_statement(rng, owner, agents, consts, depth_bound))
        rng.shuffle(stmts)
        pb = PolicyBase(owner, frozenset(agents), tuple(stmts))
        if not errors(validate(pb, _cfg(depth_bound))):
            return pb


def _cfg(depth_bound):
    from provauth.engine import EngineConfig
    return EngineConfig(depth_bound=depth_bound)


def corpus(n, seed, **kw):
    rng = random.Random(seed)
    return [random_base(rng, **kw) for _ in range(n)]


# ---------------------------------------------------------------------------
# Naive oracle
# ---------------------------------------------------------------------------


def _constants(pb):
    out = set()
    for st in pb.statements:
        for g in subformulas(st.formula()):
            if isinstance(g, Atom):
                out.update(t for t in g.args if isinstance(t, Const))
    return sorted(out, key=lambda c: c.name)


def _groundings(variables, consts):
    variables = sorted(variables)
    for values in itertools.product(consts, repeat=len(variables)):
        yield dict(zip(variables, values))


def minimize_family(sets):
    sets = set(sets)
    return frozenset(s for s in sets if not any(o < s for o in sets))


def oracle_closure(pb: PolicyBase, depth_bound: int = 3) -> dict:
    """Naive fixpoint by full Herbrand instantiation, no pruning until the end.

    Returns ``belief -> frozenset of minimal provenance sets``.
    """
    consts = _constants(pb)
    empty = frozenset()
    facts = {}  # belief -> set of provenance sets (not minimized)

    def put(into, belief, prov):
        if modal_depth(belief) <= depth_bound:
            into.setdefault(belief, set()).add(frozenset(prov))

    while True:
        new = {b: set(ps) for b, ps in facts.items()}
        for st in pb.statements:
            if isinstance(st, Credential) and not free_vars(st.formula()):
                put(new, st.formula(), empty)
            elif isinstance(st, StatedProvenance) and not free_vars(st.formula()):
                put(new, Believes(st.agent, st.body), st.agents)

        for belief, provs in facts.items():
            for p in provs:
                if isinstance(belief, Believes):
                    put(new, Believes(belief.agent, belief), p)
                else:
                    put(new, Believes(belief.body.agent, belief), p)

        for st in pb.statements:
            if isinstance(st, TrustStatement):
                for s in _groundings(free_vars(st.body), consts):
                    body = apply_subst(st.body, s)
                    for p in facts.get(Believes(st.trustee, body), ()):
                        put(new, Believes(st.truster, body), p | {st.trustee})
            elif isinstance(st, Rule):
                for s in _groundings(st.body_vars(), consts):
                    options = []
                    for a in st.body:
                        if isinstance(a, Guarded):
                            found = [p for p in facts.get(Believes(a.agent, apply_subst(a.body, s)), ())
                                     if p <= a.agents]
                        else:
                            found = list(facts.get(apply_subst(a.formula(), s), ()))
                        options.append(found)
                    head = Believes(st.head.agent, apply_subst(st.head.body, s))
                    for combo in itertools.product(*options):
                        put(new, head, frozenset().union(*combo))

        if new == facts:
            return {b: minimize_family(ps) for b, ps in facts.items()}
        facts = new


def stated_negative_instances(pb: PolicyBase):
    return {st.formula() for st in pb.statements
            if isinstance(st, Credential) and not st.positive}


# ---------------------------------------------------------------------------
# Random formulas (plain RNG, for fixed-count corpora)
# ---------------------------------------------------------------------------

_FORMULA_AGENTS = ("Alice", "Bob", "SU", "LOCAL", "hr", "A1")
_LOWER = ("p", "q", "clerk", "goodPeer", "x_1", "_z", "dave", "board")
_UPPER = ("X", "Y", "Permit", "Who2")


def random_formula(rng, size=6):
    if size <= 1 or rng.random() < 0.2:
        pred = rng.choice(_LOWER + _UPPER)
        args = tuple(Var(rng.choice(_UPPER)) if rng.random() < 0.4 else Const(rng.choice(_LOWER))
                     for _ in range(rng.randint(0, 3)))
        return Atom(pred, args)
    k = rng.randrange(7)
    if k == 0:
        return Not(random_formula(rng, size - 1))
    if k in (1, 2):
        split = rng.randint(1, size - 1)
        cls = And if k == 1 else Implies
        return cls(random_formula(rng, split), random_formula(rng, size - split))
    if k == 3:
        return Due(frozenset(rng.sample(_FORMULA_AGENTS, rng.randint(1, 3))),
                   random_formula(rng, size - 1))
    if k == 4:
        return Trusts(rng.choice(_FORMULA_AGENTS), rng.choice(_FORMULA_AGENTS),
                      random_formula(rng, size - 1))
    return Believes(rng.choice(_FORMULA_AGENTS), random_formula(rng, size - 1))
