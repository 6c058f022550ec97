"""AST, vocabulary management, parsing and printing for programs and formulas.

Two concrete surface syntaxes live here:

* programs: ASP-like text, one rule per statement terminated by ".", head
  atoms separated by "|", ":-" before the body, "not" for default negation,
  "=" / "!=" in bodies.  Variables start with an uppercase letter (or "_",
  reserved for generated symbols), predicates/functions/constants start
  lowercase.

* formulas: keyword quantifiers "ALL" / "EX" / "SOME", connectives
  "~", "&", "v", "->", "<->", constants "true" / "false".  Bound lowercase
  names are individual variables, bound uppercase names are predicate
  variables; second-order symbols may declare an arity as in "EX P/2".
  A bound lowercase name with an explicit arity ("EX f/1") is a function
  variable.  Free lowercase names are constants of the vocabulary.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

from .errors import ParseError, VocabularyError

# ---------------------------------------------------------------------------
# Vocabulary


@dataclass(frozen=True)
class Vocabulary:
    """Predicate and function constants with their arities.

    Arity-0 functions are individual constants; arity-0 predicates are
    propositions.  Names must be unique across the two kinds.
    """

    predicates: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)

    def __post_init__(self):
        clash = set(self.predicates) & set(self.functions)
        if clash:
            raise VocabularyError(f"names used both as predicate and function: {sorted(clash)}")
        for name, ar in list(self.predicates.items()) + list(self.functions.items()):
            if ar < 0:
                raise VocabularyError(f"negative arity for {name}")

    def merged(self, other: "Vocabulary") -> "Vocabulary":
        preds = dict(self.predicates)
        funcs = dict(self.functions)
        for n, a in other.predicates.items():
            if preds.get(n, a) != a:
                raise VocabularyError(f"conflicting arities for predicate {n}")
            preds[n] = a
        for n, a in other.functions.items():
            if funcs.get(n, a) != a:
                raise VocabularyError(f"conflicting arities for function {n}")
            funcs[n] = a
        return Vocabulary(preds, funcs)

    def disjoint_from(self, other: "Vocabulary") -> bool:
        mine = set(self.predicates) | set(self.functions)
        theirs = set(other.predicates) | set(other.functions)
        return not (mine & theirs)

    def names(self) -> set:
        return set(self.predicates) | set(self.functions)

    def __eq__(self, other):
        return (
            isinstance(other, Vocabulary)
            and self.predicates == other.predicates
            and self.functions == other.functions
        )


# ---------------------------------------------------------------------------
# Terms and atoms


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class App:
    """Function application; arity 0 is an individual constant."""

    func: str
    args: tuple = ()


Term = Union[Var, App]


def const(name: str) -> App:
    return App(name, ())


@dataclass(frozen=True)
class PredAtom:
    pred: str
    args: tuple = ()


@dataclass(frozen=True)
class EqAtom:
    left: Term
    right: Term


Atom = Union[PredAtom, EqAtom]


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False


# ---------------------------------------------------------------------------
# Rules and programs


@dataclass(frozen=True)
class Rule:
    """body -> head; the head is a tuple of predicate atoms, empty for bottom."""

    head: tuple = ()
    body: tuple = ()

    def __post_init__(self):
        for atom in self.head:
            if not isinstance(atom, PredAtom):
                raise VocabularyError("rule heads must be predicate atoms, not equality")

    def variables(self) -> tuple:
        """Variables of the rule in first-occurrence order (body then head)."""
        seen = []

        def walk_term(t):
            if isinstance(t, Var):
                if t.name not in seen:
                    seen.append(t.name)
            else:
                for a in t.args:
                    walk_term(a)

        def walk_atom(a):
            if isinstance(a, PredAtom):
                for t in a.args:
                    walk_term(t)
            else:
                walk_term(a.left)
                walk_term(a.right)

        for lit in self.body:
            walk_atom(lit.atom)
        for atom in self.head:
            walk_atom(atom)
        return tuple(seen)


def _scan_rule_symbols(rule: Rule, preds: dict, funcs: dict):
    def term(t):
        if isinstance(t, Var):
            return
        if t.func in funcs and funcs[t.func] != len(t.args):
            raise VocabularyError(f"function {t.func} used with arities {funcs[t.func]} and {len(t.args)}")
        funcs[t.func] = len(t.args)
        for a in t.args:
            term(a)

    def atom(a):
        if isinstance(a, PredAtom):
            if a.pred in preds and preds[a.pred] != len(a.args):
                raise VocabularyError(f"predicate {a.pred} used with arities {preds[a.pred]} and {len(a.args)}")
            preds[a.pred] = len(a.args)
            for t in a.args:
                term(t)
        else:
            term(a.left)
            term(a.right)

    for lit in rule.body:
        atom(lit.atom)
    for h in rule.head:
        atom(h)


@dataclass(frozen=True)
class Program:
    rules: tuple = ()
    vocabulary: Vocabulary = None

    def __post_init__(self):
        preds, funcs = {}, {}
        for r in self.rules:
            _scan_rule_symbols(r, preds, funcs)
        inferred = Vocabulary(preds, funcs)
        if self.vocabulary is None:
            object.__setattr__(self, "vocabulary", inferred)
        else:
            # declared vocabulary must cover and agree with every use
            self.vocabulary.merged(inferred)
            for n, a in inferred.predicates.items():
                if self.vocabulary.predicates.get(n) != a:
                    raise VocabularyError(f"predicate {n}/{a} not declared by vocabulary")
            for n, a in inferred.functions.items():
                if self.vocabulary.functions.get(n) != a:
                    raise VocabularyError(f"function {n}/{a} not declared by vocabulary")

    @property
    def intensional(self) -> frozenset:
        return frozenset(a.pred for r in self.rules for a in r.head)

    @property
    def extensional(self) -> frozenset:
        return frozenset(self.vocabulary.predicates) - self.intensional

    @property
    def is_normal(self) -> bool:
        return all(len(r.head) <= 1 for r in self.rules)

    @property
    def is_plain(self) -> bool:
        intens = self.intensional
        return not any(
            lit.negated and isinstance(lit.atom, PredAtom) and lit.atom.pred in intens
            for r in self.rules
            for lit in r.body
        )


# ---------------------------------------------------------------------------
# Formulas


@dataclass(frozen=True)
class Not:
    sub: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple = ()


@dataclass(frozen=True)
class Or:
    args: tuple = ()


@dataclass(frozen=True)
class Imp:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ForallP:
    var: str
    arity: int
    body: "Formula"


@dataclass(frozen=True)
class ExistsP:
    var: str
    arity: int
    body: "Formula"


@dataclass(frozen=True)
class ForallF:
    var: str
    arity: int
    body: "Formula"


@dataclass(frozen=True)
class ExistsF:
    var: str
    arity: int
    body: "Formula"


Formula = Union[
    PredAtom, EqAtom, Not, And, Or, Imp, Iff,
    Forall, Exists, ForallP, ExistsP, ForallF, ExistsF,
]

TRUE = And(())
FALSE = Or(())


def conj(items: Iterable) -> Formula:
    items = tuple(items)
    if not items:
        return TRUE
    if len(items) == 1:
        return items[0]
    return And(items)


def disj(items: Iterable) -> Formula:
    items = tuple(items)
    if not items:
        return FALSE
    if len(items) == 1:
        return items[0]
    return Or(items)


def forall_many(names: Iterable[str], body: Formula) -> Formula:
    for n in reversed(tuple(names)):
        body = Forall(n, body)
    return body


def exists_many(names: Iterable[str], body: Formula) -> Formula:
    for n in reversed(tuple(names)):
        body = Exists(n, body)
    return body


_SO_QUANTS = (ForallP, ExistsP, ForallF, ExistsF)


def walk_formula(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, Not):
        yield from walk_formula(f.sub)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from walk_formula(a)
    elif isinstance(f, (Imp, Iff)):
        yield from walk_formula(f.left)
        yield from walk_formula(f.right)
    elif isinstance(f, (Forall, Exists) + _SO_QUANTS):
        yield from walk_formula(f.body)


def _walk_binding(f, bound_ind, bound_pred, bound_fun, on_atom, on_term):
    """Walk with binding environments; callbacks receive current bound sets."""
    if isinstance(f, PredAtom):
        on_atom(f, bound_ind, bound_pred, bound_fun)
        for t in f.args:
            _walk_term_binding(t, bound_ind, bound_pred, bound_fun, on_term)
    elif isinstance(f, EqAtom):
        _walk_term_binding(f.left, bound_ind, bound_pred, bound_fun, on_term)
        _walk_term_binding(f.right, bound_ind, bound_pred, bound_fun, on_term)
    elif isinstance(f, Not):
        _walk_binding(f.sub, bound_ind, bound_pred, bound_fun, on_atom, on_term)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            _walk_binding(a, bound_ind, bound_pred, bound_fun, on_atom, on_term)
    elif isinstance(f, (Imp, Iff)):
        _walk_binding(f.left, bound_ind, bound_pred, bound_fun, on_atom, on_term)
        _walk_binding(f.right, bound_ind, bound_pred, bound_fun, on_atom, on_term)
    elif isinstance(f, (Forall, Exists)):
        _walk_binding(f.body, bound_ind | {f.var}, bound_pred, bound_fun, on_atom, on_term)
    elif isinstance(f, (ForallP, ExistsP)):
        _walk_binding(f.body, bound_ind, {**bound_pred, f.var: f.arity}, bound_fun, on_atom, on_term)
    elif isinstance(f, (ForallF, ExistsF)):
        _walk_binding(f.body, bound_ind, bound_pred, {**bound_fun, f.var: f.arity}, on_atom, on_term)
    else:
        raise TypeError(f"not a formula node: {f!r}")


def _walk_term_binding(t, bound_ind, bound_pred, bound_fun, on_term):
    on_term(t, bound_ind, bound_pred, bound_fun)
    if isinstance(t, App):
        for a in t.args:
            _walk_term_binding(a, bound_ind, bound_pred, bound_fun, on_term)


def free_individual_variables(f: Formula) -> frozenset:
    free = set()

    def on_term(t, bi, bp, bf):
        if isinstance(t, Var) and t.name not in bi:
            free.add(t.name)

    _walk_binding(f, frozenset(), {}, {}, lambda *a: None, on_term)
    return frozenset(free)


def formula_vocabulary(f: Formula) -> Vocabulary:
    """Constants of the formula: predicate/function names not bound by a quantifier."""
    preds, funcs = {}, {}

    def record(table, name, arity, kind):
        if table.get(name, arity) != arity:
            raise VocabularyError(f"{kind} {name} used with arities {table[name]} and {arity}")
        table[name] = arity

    def on_atom(a, bi, bp, bf):
        if a.pred in bp:
            if bp[a.pred] != len(a.args):
                raise VocabularyError(
                    f"predicate variable {a.pred} bound with arity {bp[a.pred]} used with {len(a.args)}")
        else:
            record(preds, a.pred, len(a.args), "predicate")

    def on_term(t, bi, bp, bf):
        if isinstance(t, App):
            if t.func in bf:
                if bf[t.func] != len(t.args):
                    raise VocabularyError(
                        f"function variable {t.func} bound with arity {bf[t.func]} used with {len(t.args)}")
            else:
                record(funcs, t.func, len(t.args), "function")

    _walk_binding(f, frozenset(), {}, {}, on_atom, on_term)
    return Vocabulary(preds, funcs)


def is_closed_sentence(f: Formula) -> bool:
    return not free_individual_variables(f)


class FreshNamer:
    """Deterministic fresh-name factory; "_" prefix is reserved for it."""

    def __init__(self, taken: Iterable[str] = ()):
        self.taken = set(taken)

    def fresh(self, base: str) -> str:
        name = base
        n = 1
        while name in self.taken:
            name = f"{base}{n}"
            n += 1
        self.taken.add(name)
        return name


# ---------------------------------------------------------------------------
# Tokenizer (shared by the two parsers)

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+|[%\#][^\n]*)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<num>\d+)
    | (?P<op>:-|<->|->|!=|[().,|=&~/])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # ident | num | op | eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    toks = []
    pos, line, linestart = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - linestart + 1)
        if m.lastgroup != "ws":
            toks.append(Token(m.lastgroup, m.group(), line, m.start() - linestart + 1))
        else:
            nl = m.group().count("\n")
            if nl:
                line += nl
                linestart = m.start() + m.group().rindex("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, len(text) - linestart + 1))
    return toks


class _TokenStream:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text or t.kind == "eof":
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return t

    def error(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)


def _is_variable_name(name: str) -> bool:
    return name[0].isupper() or name[0] == "_"


# ---------------------------------------------------------------------------
# Program parser


class _ProgramParser:
    def __init__(self, text: str):
        self.ts = _TokenStream(text)
        self.preds = {}
        self.funcs = {}

    def parse(self) -> Program:
        rules = []
        while self.ts.peek().kind != "eof":
            rules.append(self.rule())
        return Program(tuple(rules))

    def rule(self) -> Rule:
        head = []
        if self.ts.peek().text != ":-":
            head.append(self.head_atom())
            while self.ts.peek().text == "|":
                self.ts.next()
                head.append(self.head_atom())
        body = []
        if self.ts.peek().text == ":-":
            self.ts.next()
            body.append(self.literal())
            while self.ts.peek().text == ",":
                self.ts.next()
                body.append(self.literal())
        self.ts.expect(".")
        return Rule(tuple(head), tuple(body))

    def head_atom(self) -> PredAtom:
        t = self.ts.peek()
        if t.kind != "ident":
            self.ts.error("expected a head atom")
        if _is_variable_name(t.text):
            self.ts.error("rule head must be a predicate atom")
        name, args = self.name_and_args()
        if self.ts.peek().text in ("=", "!="):
            raise ParseError("equality atom not allowed in rule head", t.line, t.col)
        self.record_pred(name, len(args), t)
        return PredAtom(name, args)

    def literal(self) -> Literal:
        negated = False
        if self.ts.peek().text == "not" and self.ts.peek().kind == "ident":
            self.ts.next()
            negated = True
        t = self.ts.peek()
        if t.kind != "ident":
            self.ts.error("expected a body literal")
        if _is_variable_name(t.text):
            left = self.term()
            atom, neg2 = self.finish_equality(left, t)
        else:
            name, args = self.name_and_args()
            if self.ts.peek().text in ("=", "!="):
                self.record_func(name, len(args), t)
                atom, neg2 = self.finish_equality(App(name, args), t)
            else:
                self.record_pred(name, len(args), t)
                atom, neg2 = PredAtom(name, args), False
        if neg2 and negated:
            raise ParseError("'not' cannot be applied to '!='", t.line, t.col)
        return Literal(atom, negated or neg2)

    def finish_equality(self, left: Term, t: Token):
        op = self.ts.next()
        if op.text not in ("=", "!="):
            raise ParseError("expected '=' or '!=' after term", op.line, op.col)
        right = self.term()
        return EqAtom(left, right), op.text == "!="

    def name_and_args(self):
        name = self.ts.next().text
        args = []
        if self.ts.peek().text == "(":
            self.ts.next()
            args.append(self.term())
            while self.ts.peek().text == ",":
                self.ts.next()
                args.append(self.term())
            self.ts.expect(")")
        return name, tuple(args)

    def term(self) -> Term:
        t = self.ts.peek()
        if t.kind != "ident":
            self.ts.error("expected a term")
        if _is_variable_name(t.text):
            self.ts.next()
            return Var(t.text)
        name, args = self.name_and_args()
        self.record_func(name, len(args), t)
        return App(name, args)

    def record_pred(self, name, arity, tok):
        if name in self.funcs:
            raise ParseError(f"{name} used both as predicate and function", tok.line, tok.col)
        if self.preds.setdefault(name, arity) != arity:
            raise ParseError(
                f"predicate {name} used with arities {self.preds[name]} and {arity}", tok.line, tok.col)

    def record_func(self, name, arity, tok):
        if name in self.preds:
            raise ParseError(f"{name} used both as predicate and function", tok.line, tok.col)
        if self.funcs.setdefault(name, arity) != arity:
            raise ParseError(
                f"function {name} used with arities {self.funcs[name]} and {arity}", tok.line, tok.col)


def parse_program(text: str) -> Program:
    return _ProgramParser(text).parse()


def parse_rule(text: str) -> Rule:
    prog = parse_program(text)
    if len(prog.rules) != 1:
        raise ParseError("expected exactly one rule")
    return prog.rules[0]


# ---------------------------------------------------------------------------
# Program printer


def term_to_text(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if not t.args:
        return t.func
    return f"{t.func}({', '.join(term_to_text(a) for a in t.args)})"


def atom_to_text(a: Atom) -> str:
    if isinstance(a, PredAtom):
        if not a.args:
            return a.pred
        return f"{a.pred}({', '.join(term_to_text(t) for t in a.args)})"
    return f"{term_to_text(a.left)} = {term_to_text(a.right)}"


def literal_to_text(lit: Literal) -> str:
    if isinstance(lit.atom, EqAtom) and lit.negated:
        return f"{term_to_text(lit.atom.left)} != {term_to_text(lit.atom.right)}"
    text = atom_to_text(lit.atom)
    return f"not {text}" if lit.negated else text

def rule_to_text(r: Rule) -> str:
    head = " | ".join(atom_to_text(a) for a in r.head)
    body = ", ".join(literal_to_text(l) for l in r.body)
    if not r.body:
        return f"{head}."
    if not r.head:
        return f":- {body}."
    return f"{head} :- {body}."


def unparse_program(p: Program) -> str:
    return "\n".join(rule_to_text(r) for r in p.rules) + ("\n" if p.rules else "")


# ---------------------------------------------------------------------------
# Formula parser

_FORMULA_KEYWORDS = {"ALL", "EX", "SOME"}


class _FormulaParser:
    def __init__(self, text: str):
        self.ts = _TokenStream(text)

    def parse(self) -> Formula:
        f = self.formula([], set(), {}, {})
        t = self.ts.peek()
        if t.kind != "eof":
            self.ts.error(f"unexpected trailing input {t.text!r}")
        return _infer_so_arities(f)

    # precedence: <-> (1)  -> (2)  v (3)  & (4)  ~/quant/atom (5)
    def formula(self, stack, bi, bp, bf) -> Formula:
        return self.iff(bi, bp, bf)

    def iff(self, bi, bp, bf) -> Formula:
        left = self.imp(bi, bp, bf)
        while self.ts.peek().text == "<->":
            self.ts.next()
            right = self.imp(bi, bp, bf)
            left = Iff(left, right)
        return left

    def imp(self, bi, bp, bf) -> Formula:
        left = self.disjunction(bi, bp, bf)
        if self.ts.peek().text == "->":
            self.ts.next()
            return Imp(left, self.imp(bi, bp, bf))
        return left

    def disjunction(self, bi, bp, bf) -> Formula:
        parts = [self.conjunction(bi, bp, bf)]
        while self.ts.peek().kind == "ident" and self.ts.peek().text == "v":
            self.ts.next()
            parts.append(self.conjunction(bi, bp, bf))
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conjunction(self, bi, bp, bf) -> Formula:
        parts = [self.unary(bi, bp, bf)]
        while self.ts.peek().text == "&":
            self.ts.next()
            parts.append(self.unary(bi, bp, bf))
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self, bi, bp, bf) -> Formula:
        t = self.ts.peek()
        if t.text == "~":
            self.ts.next()
            return Not(self.unary(bi, bp, bf))
        if t.kind == "ident" and t.text in _FORMULA_KEYWORDS:
            return self.quantified(bi, bp, bf)
        return self.atom(bi, bp, bf)

    def quantified(self, bi, bp, bf) -> Formula:
        q = self.ts.next()
        name_tok = self.ts.next()
        if name_tok.kind != "ident" or name_tok.text in _FORMULA_KEYWORDS:
            raise ParseError("expected a quantified variable name", name_tok.line, name_tok.col)
        name = name_tok.text
        arity = None
        if self.ts.peek().text == "/":
            self.ts.next()
            num = self.ts.next()
            if num.kind != "num":
                raise ParseError("expected an arity after '/'", num.line, num.col)
            arity = int(num.text)
        self.ts.expect(".")
        universal = q.text == "ALL"
        if name[0].isupper():
            body = self.formula(None, bi, {**bp, name: arity}, bf)
            node = ForallP if universal else ExistsP
            return node(name, -1 if arity is None else arity, body)
        if arity is not None:
            body = self.formula(None, bi, bp, {**bf, name: arity})
            node = ForallF if universal else ExistsF
            return node(name, arity, body)
        body = self.formula(None, bi | {name}, bp, bf)
        return (Forall if universal else Exists)(name, body)

    def atom(self, bi, bp, bf) -> Formula:
        t = self.ts.peek()
        if t.text == "(":
            self.ts.next()
            f = self.formula(None, bi, bp, bf)
            self.ts.expect(")")
            return f
        if t.kind != "ident":
            self.ts.error(f"expected an atom, found {t.text or 'end of input'!r}")
        if t.text in ("true", "false") and self.ts.toks[self.ts.i + 1].text != "(":
            self.ts.next()
            return TRUE if t.text == "true" else FALSE
        name, args = self.name_and_args(bi, bp, bf)
        if self.ts.peek().text in ("=", "!="):
            op = self.ts.next()
            left = self.to_term(name, args, bi, bp, bf, t)
            right = self.term(bi, bp, bf)
            eq = EqAtom(left, right)
            return Not(eq) if op.text == "!=" else eq
        if name[0].isupper() and name not in bp:
            raise ParseError(f"unbound second-order variable {name}", t.line, t.col)
        if name in bi or name in bf:
            raise ParseError(f"{name} is not a predicate here", t.line, t.col)
        return PredAtom(name, args)

    def to_term(self, name, args, bi, bp, bf, tok) -> Term:
        if name in bi:
            if args:
                raise ParseError(f"individual variable {name} cannot take arguments", tok.line, tok.col)
            return Var(name)
        if name[0].isupper():
            raise ParseError(f"predicate variable {name} used as a term", tok.line, tok.col)
        return App(name, args)

    def name_and_args(self, bi, bp, bf):
        name = self.ts.next().text
        args = []
        if self.ts.peek().text == "(":
            self.ts.next()
            args.append(self.term(bi, bp, bf))
            while self.ts.peek().text == ",":
                self.ts.next()
                args.append(self.term(bi, bp, bf))
            self.ts.expect(")")
        return name, tuple(args)

    def term(self, bi, bp, bf) -> Term:
        t = self.ts.peek()
        if t.kind != "ident" or t.text in _FORMULA_KEYWORDS:
            self.ts.error("expected a term")
        name, args = self.name_and_args(bi, bp, bf)
        return self.to_term(name, args, bi, bp, bf, t)


def _infer_so_arities(f: Formula) -> Formula:
    """Fill in arities for SO predicate binders declared without one."""
    if isinstance(f, (ForallP, ExistsP)) and f.arity < 0:
        body = _infer_so_arities(f.body)
        arity = _find_pred_arity(body, f.var)
        return type(f)(f.var, 0 if arity is None else arity, body)
    if isinstance(f, Not):
        return Not(_infer_so_arities(f.sub))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_infer_so_arities(a) for a in f.args))
    if isinstance(f, (Imp, Iff)):
        return type(f)(_infer_so_arities(f.left), _infer_so_arities(f.right))
    if isinstance(f, (Forall, Exists)):
        return type(f)(f.var, _infer_so_arities(f.body))
    if isinstance(f, _SO_QUANTS):
        return type(f)(f.var, f.arity, _infer_so_arities(f.body))
    return f


def _find_pred_arity(f: Formula, name: str) -> Optional[int]:
    for node in walk_formula(f):
        if isinstance(node, _SO_QUANTS) and node.var == name:
            return None  # shadowed below; do not look further on this branch
        if isinstance(node, PredAtom) and node.pred == name:
            return len(node.args)
    return None


def parse_formula(text: str) -> Formula:
    f = _FormulaParser(text).parse()
    formula_vocabulary(f)  # arity-consistency validation
    return f


# ---------------------------------------------------------------------------
# Formula printer

_PREC_IFF, _PREC_IMP, _PREC_OR, _PREC_AND, _PREC_UNARY = 1, 2, 3, 4, 5


def formula_to_text(f: Formula) -> str:
    return _fmt(f, 0)


def _fmt(f: Formula, need: int) -> str:
    if isinstance(f, And) and not f.args:
        return "true"
    if isinstance(f, Or) and not f.args:
        return "false"
    if isinstance(f, PredAtom):
        return atom_to_text(f)
    if isinstance(f, EqAtom):
        return atom_to_text(f)
    if isinstance(f, Not):
        if isinstance(f.sub, EqAtom):
            return f"{term_to_text(f.sub.left)} != {term_to_text(f.sub.right)}"
        return _wrap(f"~ {_fmt(f.sub, _PREC_UNARY)}", _PREC_UNARY, need)
    if isinstance(f, And):
        return _wrap(" & ".join(_fmt(a, _PREC_AND + 1) for a in f.args), _PREC_AND, need)
    if isinstance(f, Or):
        return _wrap(" v ".join(_fmt(a, _PREC_OR + 1) for a in f.args), _PREC_OR, need)
    if isinstance(f, Imp):
        return _wrap(f"{_fmt(f.left, _PREC_IMP + 1)} -> {_fmt(f.right, _PREC_IMP)}", _PREC_IMP, need)
    if isinstance(f, Iff):
        return _wrap(f"{_fmt(f.left, _PREC_IFF)} <-> {_fmt(f.right, _PREC_IFF + 1)}", _PREC_IFF, need)
    if isinstance(f, Forall):
        return _wrap(f"ALL {f.var} . {_fmt(f.body, 0)}", 0, need)
    if isinstance(f, Exists):
        return _wrap(f"SOME {f.var} . {_fmt(f.body, 0)}", 0, need)
    if isinstance(f, ForallP):
        return _wrap(f"ALL {f.var}/{f.arity} . {_fmt(f.body, 0)}", 0, need)
    if isinstance(f, ExistsP):
        return _wrap(f"EX {f.var}/{f.arity} . {_fmt(f.body, 0)}", 0, need)
    if isinstance(f, ForallF):
        return _wrap(f"ALL {f.var}/{f.arity} . {_fmt(f.body, 0)}", 0, need)
    if isinstance(f, ExistsF):
        return _wrap(f"EX {f.var}/{f.arity} . {_fmt(f.body, 0)}", 0, need)
    raise TypeError(f"not a formula node: {f!r}")


def _wrap(text: str, prec: int, need: int) -> str:
    return f"({text})" if prec < need else text


unparse_formula = formula_to_text


# ---------------------------------------------------------------------------
# Prefix classification


@dataclass(frozen=True)
class PrefixReport:
    """Second-order/first-order prefix shape of a sentence.

    so_blocks: tuple of ('E'|'A', vars) with vars a tuple of
    (name, 'pred'|'fun', arity); consecutive same-quantifier binders merged.
    fo_prefix: string over {'A','E'} for the first-order quantifier prefix.
    matrix_quantifier_free: whether anything quantified remains below.
    """

    so_blocks: tuple
    fo_prefix: str
    matrix_quantifier_free: bool

    @property
    def has_function_variables(self) -> bool:
        return any(kind == "fun" for _, vs in self.so_blocks for _, kind, _ in vs)

    @property
    def max_so_arity(self) -> int:
        arities = [a for _, vs in self.so_blocks for _, _, a in vs]
        return max(arities, default=0)

    def _fo_forall_exists(self) -> bool:
        return re.fullmatch(r"A*E*", self.fo_prefix) is not None

    @property
    def sigma11_forall(self) -> Optional[int]:
        """k such that the sentence is in Sigma^1_{1,k}[A*]; None if not a member."""
        shapes = ((), ("E",))
        if tuple(q for q, _ in self.so_blocks) not in shapes:
            return None
        if self.has_function_variables or not self.matrix_quantifier_free:
            return None
        if re.fullmatch(r"A*", self.fo_prefix) is None:
            return None
        return self.max_so_arity

    @property
    def sigma2_forall_n_exists(self) -> Optional[int]:
        """n such that the sentence is in Sigma^1_{2,n}[A^n E*]; None if not."""
        shapes = ((), ("E",), ("A",), ("E", "A"))
        if tuple(q for q, _ in self.so_blocks) not in shapes:
            return None
        if self.has_function_variables or not self.matrix_quantifier_free:
            return None
        if not self._fo_forall_exists():
            return None
        return max(self.max_so_arity, self.fo_prefix.count("A"))

    @property
    def sigma12_forall_exists(self) -> bool:
        """Membership in Sigma^1_2[A* E*]."""
        shapes = ((), ("E",), ("A",), ("E", "A"))
        if tuple(q for q, _ in self.so_blocks) not in shapes:
            return False
        if self.has_function_variables or not self.matrix_quantifier_free:
            return False
        return self._fo_forall_exists()

    @property
    def is_first_order(self) -> bool:
        return not self.so_blocks


def classify_prefix(f: Formula) -> PrefixReport:
    blocks = []
    while isinstance(f, _SO_QUANTS):
        q = "A" if isinstance(f, (ForallP, ForallF)) else "E"
        kind = "pred" if isinstance(f, (ForallP, ExistsP)) else "fun"
        if blocks and blocks[-1][0] == q:
            blocks[-1] = (q, blocks[-1][1] + ((f.var, kind, f.arity),))
        else:
            blocks.append((q, ((f.var, kind, f.arity),)))
        f = f.body
    fo = []
    while isinstance(f, (Forall, Exists)):
        fo.append("A" if isinstance(f, Forall) else "E")
        f = f.body
    qf = all(
        not isinstance(n, (Forall, Exists) + _SO_QUANTS) for n in walk_formula(f)
    )
    return PrefixReport(tuple(blocks), "".join(fo), qf)


# ---------------------------------------------------------------------------
# SM transformation


def _formula_var_name(progvar: str) -> str:
    if progvar.startswith("_"):
        return progvar
    return "_" + progvar.lower()


def term_to_formula_term(t: Term) -> Term:
    if isinstance(t, Var):
        return Var(_formula_var_name(t.name))
    return App(t.func, tuple(term_to_formula_term(a) for a in t.args))


def _atom_to_formula(a: Atom, star: dict) -> Formula:
    if isinstance(a, PredAtom):
        name = star.get(a.pred, a.pred)
        return PredAtom(name, tuple(term_to_formula_term(t) for t in a.args))
    return EqAtom(term_to_formula_term(a.left), term_to_formula_term(a.right))


def rule_to_formula(r: Rule, star: Optional[dict] = None) -> Formula:
    """Universal closure of a rule; `star` renames positive intensional atoms."""
    star = star or {}
    body = []
    for lit in r.body:
        if lit.negated:
            # default negation: the starred copy keeps the original predicate
            body.append(Not(_atom_to_formula(lit.atom, {})))
        else:
            body.append(_atom_to_formula(lit.atom, star))
    head = [_atom_to_formula(a, star) for a in r.head]
    core = Imp(conj(body), disj(head)) if body else disj(head)
    return forall_many([_formula_var_name(v) for v in r.variables()], core)


def build_sm_sentence(p: Program) -> Formula:
    """The second-order stable-model sentence of a program.

    Returns phi & ALL tau* (tau* < tau -> ~phi*), where tau is the set of
    intensional predicates and phi* stars their positive occurrences.
    """
    tau = sorted(p.intensional)
    namer = FreshNamer(p.vocabulary.names())
    star = {P: namer.fresh(P[0].upper() + P[1:] + "_star") for P in tau}

    phi = conj([rule_to_formula(r) for r in p.rules])
    phi_star = conj([rule_to_formula(r, star) for r in p.rules])

    def subset(frm: str, to: str, k: int) -> Formula:
        xs = [f"_x{i}" for i in range(k)]
        args = tuple(Var(x) for x in xs)
        return forall_many(xs, Imp(PredAtom(frm, args), PredAtom(to, args)))

    arity = p.vocabulary.predicates
    less = conj(
        [subset(star[P], P, arity[P]) for P in tau]
        + [Not(conj([subset(P, star[P], arity[P]) for P in tau]))]
    )
    minimality = Imp(less, Not(phi_star))
    for P in reversed(tau):
        minimality = ForallP(star[P], p.vocabulary.predicates[P], minimality)
    return And((phi, minimality))
