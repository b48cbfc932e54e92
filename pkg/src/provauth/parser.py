"""Surface syntax for policy bases: lexer, recursive-descent parser, pretty-printer
and whole-base validator.

Grammar::

    Policy   ::= Item*
    Item     ::= 'owner' Ident ';' | 'agent' Ident (',' Ident)* ';' | Formula ';'
    Formula  ::= Conj ('=>' Conj)?
    Conj     ::= Unary ('and' Unary)*
    Unary    ::= 'not' Unary | Modal | Atom | '(' Formula ')'
    Modal    ::= Ident 'says' Unary | Ident 'denies' Unary
               | Ident 'trusts' Ident 'on' Unary | 'due' '{' Ident (',' Ident)* '}' Unary
    Atom     ::= Ident '(' (Ident (',' Ident)*)? ')'

``#`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from typing import List, Optional

from provauth.model import (
    And, Atom, Believes, Const, Credential, Due, Formula, Implies,
    NormalizeError, Not, PolicyBase, StatedProvenance, Trusts, Var, agents_of,
    atoms_of, denormalize, is_ground, normalize, subformulas,
)

KEYWORDS = frozenset({"owner", "agent", "not", "and", "says", "denies", "trusts", "on", "due"})

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>=>)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(){},;])
""", re.VERBOSE)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: Optional[int] = None
    column: Optional[int] = None
    code: str = "syntax"

    def format(self, path: str = "<policy>") -> str:
        where = path if self.line is None else f"{path}:{self.line}:{self.column}"
        return f"{where}: {self.severity}: {self.message} [{self.code}]"


class PolicyError(ValueError):
    """Raised when a policy text or base has error diagnostics."""

    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = list(diagnostics)
        first = next((d for d in self.diagnostics if d.severity == "error"), None)
        super().__init__(first.format() if first else "invalid policy")


class FormulaSyntaxError(PolicyError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # ident, kw, arrow, punct, eof
    text: str
    line: int
    column: int


class _SyntaxError(Exception):
    def __init__(self, message, token):
        super().__init__(message)
        self.token = token


def tokenize(text: str) -> List[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise _SyntaxError(f"unexpected character {text[pos]!r}",
                               Token("error", text[pos], line, col))
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            word = m.group()
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
        elif kind in ("arrow", "punct"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset=1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind in ("kw", "punct", "arrow") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise _SyntaxError(f"expected {text!r}, found {_describe(self.tok)}", self.tok)
        return self.advance()

    def ident(self, what="identifier") -> Token:
        if self.tok.kind != "ident":
            raise _SyntaxError(f"expected {what}, found {_describe(self.tok)}", self.tok)
        return self.advance()

    def formula(self) -> Formula:
        left = self.conj()
        if self.at("=>"):
            self.advance()
            return Implies(left, self.conj())
        return left

    def conj(self) -> Formula:
        out = self.unary()
        while self.at("and"):
            self.advance()
            out = And(out, self.unary())
        return out

    def unary(self) -> Formula:
        tok = self.tok
        if self.at("not"):
            self.advance()
            return Not(self.unary())
        if self.at("due"):
            self.advance()
            agents = self.agent_set()
            return Due(agents, self.unary())
        if self.at("("):
            self.advance()
            inner = self.formula()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            nxt = self.peek()
            if nxt.kind == "punct" and nxt.text == "(":
                return self.atom()
            if nxt.kind == "kw" and nxt.text in ("says", "denies"):
                self.advance()
                self.advance()
                body = self.unary()
                return Believes(tok.text, body if nxt.text == "says" else Not(body))
            if nxt.kind == "kw" and nxt.text == "trusts":
                self.advance()
                self.advance()
                trustee = self.ident("agent name").text
                self.expect("on")
                return Trusts(tok.text, trustee, self.unary())
            raise _SyntaxError(
                f"expected '(', 'says', 'denies' or 'trusts' after {tok.text!r}, "
                f"found {_describe(nxt)}", nxt)
        raise _SyntaxError(f"expected a formula, found {_describe(tok)}", tok)

    def agent_set(self) -> frozenset:
        self.expect("{")
        names = [self.ident("agent name").text]
        while self.at(","):
            self.advance()
            names.append(self.ident("agent name").text)
        self.expect("}")
        return frozenset(names)

    def atom(self) -> Atom:
        pred = self.advance().text
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.term())
            while self.at(","):
                self.advance()
                args.append(self.term())
        self.expect(")")
        return Atom(pred, tuple(args))

    def term(self):
        name = self.ident("term").text
        return Var(name) if name[0].isupper() else Const(name)

    def skip_item(self) -> None:
        while self.tok.kind != "eof" and not self.at(";"):
            self.advance()
        self.advance()


def _diag_at(tok: Token, message: str, code="syntax", severity="error") -> Diagnostic:
    return Diagnostic(severity, message, tok.line, tok.column, code)


def parse_formula(text: str) -> Formula:
    """Parse a single formula, e.g. a query.  Raises :class:`FormulaSyntaxError`."""
    try:
        p = _Parser(tokenize(text))
        f = p.formula()
        if p.tok.kind != "eof":
            raise _SyntaxError(f"unexpected {_describe(p.tok)} after formula", p.tok)
        return f
    except _SyntaxError as e:
        raise FormulaSyntaxError([_diag_at(e.token, str(e))]) from None


def parse_policy(text: str, depth_bound: Optional[int] = None) -> PolicyBase:
    """Parse and normalize a whole policy base.

    Raises :class:`PolicyError` carrying every error diagnostic found; parsing
    resumes at the next ``;`` after a syntax error so several can be reported.
    """
    diags: List[Diagnostic] = []
    try:
        tokens = tokenize(text)
    except _SyntaxError as e:
        raise PolicyError([_diag_at(e.token, str(e))]) from None

    p = _Parser(tokens)
    owner: Optional[str] = None
    agents: dict = {}
    formulas = []  # (formula, first token)
    while p.tok.kind != "eof":
        start = p.tok
        try:
            if p.at("owner"):
                p.advance()
                name = p.ident("agent name").text
                p.expect(";")
                if owner is not None:
                    diags.append(_diag_at(start, f"duplicate owner declaration {name!r}",
                                          "DuplicateOwner"))
                else:
                    owner = name
            elif p.at("agent"):
                p.advance()
                names = [p.ident("agent name").text]
                while p.at(","):
                    p.advance()
                    names.append(p.ident("agent name").text)
                p.expect(";")
                for n in names:
                    agents.setdefault(n, start)
            else:
                f = p.formula()
                p.expect(";")
                formulas.append((f, start))
        except _SyntaxError as e:
            diags.append(_diag_at(e.token, str(e)))
            p.skip_item()

    if owner is None:
        first = tokens[0]
        diags.append(Diagnostic("error", "missing owner declaration",
                                1 if first.kind == "eof" else first.line,
                                1 if first.kind == "eof" else first.column, "MissingOwner"))
        raise PolicyError(diags)

    registry = set(agents) | {owner}
    statements, positions = [], []
    for f, start in formulas:
        unknown = agents_of(f) - registry
        if unknown:
            diags.append(_diag_at(start, f"undeclared agent(s): {', '.join(sorted(unknown))}",
                                  "UnknownAgent"))
            continue
        try:
            statements.append(normalize(f, owner, depth_bound))
            positions.append((start.line, start.column))
        except NormalizeError as e:
            diags.append(_diag_at(start, str(e), e.code))

    if any(d.severity == "error" for d in diags):
        raise PolicyError(diags)
    return PolicyBase(owner, frozenset(registry), tuple(statements), tuple(positions))


# ---------------------------------------------------------------------------
# Pretty printing
# ---------------------------------------------------------------------------


def _term(t) -> str:
    return t.name


def _unary(f: Formula) -> str:
    if isinstance(f, (And, Implies)):
        return f"({pretty(f)})"
    return pretty(f)


def _conj(f: Formula) -> str:
    if isinstance(f, Implies):
        return f"({pretty(f)})"
    return pretty(f)


def pretty(f: Formula) -> str:
    """Canonical rendering; ``parse_formula(pretty(f)) == f``."""
    if isinstance(f, Atom):
        return f"{f.predicate}({', '.join(_term(t) for t in f.args)})"
    if isinstance(f, Not):
        return f"not {_unary(f.body)}"
    if isinstance(f, And):
        return f"{_conj(f.left)} and {_unary(f.right)}"
    if isinstance(f, Implies):
        return f"{_conj(f.left)} => {_conj(f.right)}"
    if isinstance(f, Believes):
        return f"{f.agent} says {_unary(f.body)}"
    if isinstance(f, Trusts):
        return f"{f.truster} trusts {f.trustee} on {_unary(f.body)}"
    if isinstance(f, Due):
        return f"due {{{', '.join(sorted(f.agents))}}} {_unary(f.body)}"
    raise TypeError(f"not a formula: {f!r}")


def format_agents(agents) -> str:
    return "{" + ", ".join(sorted(agents)) + "}"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _has_inert_due(f: Formula) -> bool:
    return any(isinstance(g, Due) and not isinstance(g.body, Believes) for g in subformulas(f))


def validate(pb: PolicyBase, cfg=None) -> List[Diagnostic]:
    """Check a parsed base before saturation.  An empty error set means ready."""
    from provauth.engine import EngineConfig

    cfg = cfg or EngineConfig()
    out: List[Diagnostic] = []
    arities = defaultdict(dict)  # predicate -> arity -> first statement index

    def emit(i, severity, code, message):
        line, col = pb.position(i)
        out.append(Diagnostic(severity, message, line, col, code))

    if pb.owner not in pb.registry:
        out.append(Diagnostic("error", f"owner {pb.owner!r} is not a registered agent",
                              code="UnknownAgent"))

    for i, st in enumerate(pb.statements):
        f = denormalize(st)
        text = pretty(f)
        unknown = agents_of(f) - pb.registry
        if unknown:
            emit(i, "error", "UnknownAgent",
                 f"undeclared agent(s) {', '.join(sorted(unknown))} in: {text}")
        try:
            again = normalize(f, pb.owner, cfg.depth_bound)
            if again != st:
                emit(i, "error", "NotInFragment", f"statement does not normalize to itself: {text}")
        except NormalizeError as e:
            emit(i, "error", e.code, str(e))
        for a in atoms_of(f):
            arities[a.predicate].setdefault(a.arity, i)
        if _has_inert_due(f):
            emit(i, "warning", "InertDue",
                 f"'due' applied to a non-belief has no effect: {text}")
        if isinstance(st, (Credential, StatedProvenance)) and not is_ground(f):
            emit(i, "warning", "NonGroundFact",
                 f"assertion with variables never yields facts: {text}")

    for pred, seen in arities.items():
        if len(seen) > 1:
            later = sorted(seen.items(), key=lambda kv: kv[1])
            first_arity = later[0][0]
            for arity, i in later[1:]:
                emit(i, "error", "ArityMismatch",
                     f"predicate {pred!r} used with arity {arity} and {first_arity}")
    return out


def errors(diags: List[Diagnostic]) -> List[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


__all__ = [
    "Diagnostic", "FormulaSyntaxError", "PolicyError", "errors", "format_agents",
    "parse_formula", "parse_policy", "pretty", "tokenize", "validate",
]
