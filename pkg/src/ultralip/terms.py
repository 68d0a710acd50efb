"""The semialgebraic term and condition language.

Terms are finite trees over rational constants, variables, field
operations, integer powers, ``normval`` (which sends t to the rational
|t| embedded back into Q_p) and registered builtins.  Conditions compare
norms, test ord congruences and coset membership, and combine with the
usual connectives.  Everything evaluates exactly at rational points, so
every predicate is decidable.

The grammar (parsed by a hand-rolled recursive descent with positions):

    term  := sum ;  sum := prod (("+"|"-") prod)*
    prod  := unary (("*"|"/") unary)* ;  unary := "-" unary | atom ("^" int)?
    atom  := rational | ident | "normval(" term ")" | builtin "(" args ")"
           | "(" term ")"
    cond  := disj ;  disj := conj ("||" conj)* ;  conj := lit ("&&" lit)*
    lit   := "|" term "|" ("<"|"<="|"=") "|" term "|"
           | term "in" rational "*" "Q(" int "," int ")"
           | "ord(" term ")" "%" int "=" int | "!" lit | "true" | "(" cond ")"
    rational := int ("/" int)?
    piecewise := "piecewise" "(" ident ("," ident)* ")"
                 "{" cond "->" term (";" cond "->" term)* "}"
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Union

from .qp_core import CosetSpec, PadicScalar, PrimeContext, in_coset

__all__ = [
    "Term",
    "Variable",
    "RationalConst",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "IntPow",
    "NormVal",
    "BuiltinCall",
    "Condition",
    "NormCmp",
    "OrdCongruence",
    "CosetMember",
    "And",
    "Or",
    "Not",
    "TrueCond",
    "PiecewiseFunction",
    "BuiltinSpec",
    "register_builtin",
    "builtin_spec",
    "parse",
    "parse_term",
    "parse_condition",
    "parse_piecewise",
    "format_term",
    "format_condition",
    "format_piecewise",
    "evaluate",
    "evaluate_piecewise",
    "eval_condition",
    "differentiate",
    "free_variables",
    "TermError",
    "ParseError",
    "EvaluationError",
    "UnboundVariableError",
    "DivisionByZero",
    "BuiltinDomainError",
    "UnknownDerivativeError",
    "PieceOverlapError",
    "PieceDomainError",
]

SourcePos = tuple  # (line, col)

_RESERVED = {"in", "normval", "ord", "true", "piecewise", "Q"}


# ---------------------------------------------------------------------------
# errors


class TermError(Exception):
    pass


class ParseError(TermError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col


class EvaluationError(TermError):
    pass


class UnboundVariableError(EvaluationError):
    pass


class DivisionByZero(EvaluationError):
    """Division by an exactly-zero subterm; carries the offending node."""

    def __init__(self, subterm: "Term"):
        super().__init__(f"division by zero in subterm {format_term(subterm)!r}")
        self.subterm = subterm


class BuiltinDomainError(EvaluationError):
    pass


class UnknownDerivativeError(TermError):
    pass


class PieceOverlapError(EvaluationError):
    pass


class PieceDomainError(EvaluationError):
    pass


# ---------------------------------------------------------------------------
# AST


class Term:
    """Base class for term nodes; subclasses are frozen dataclasses."""

    def __str__(self) -> str:
        return format_term(self)


class Condition:
    """Base class for condition nodes."""

    def __str__(self) -> str:
        return format_condition(self)


def _posfield():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Variable(Term):
    name: str
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class RationalConst(Term):
    value: Fraction
    pos: Optional[SourcePos] = _posfield()

    def __post_init__(self) -> None:
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Add(Term):
    left: Term
    right: Term
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class Sub(Term):
    left: Term
    right: Term
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class Mul(Term):
    left: Term
    right: Term
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class Div(Term):
    left: Term
    right: Term
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class IntPow(Term):
    base: Term
    exponent: int
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class NormVal(Term):
    """|t| as an element of Q_p: the rational p^(-ord t), defined on t != 0."""

    arg: Term
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class BuiltinCall(Term):
    name: str
    args: tuple
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class NormCmp(Condition):
    lhs: Term
    op: str  # "<", "<=", "="
    rhs: Term
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class OrdCongruence(Condition):
    term: Term
    modulus: int
    residue: int
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class CosetMember(Condition):
    """term in lam*Q(m,n); lam is a rational literal bound to p at evaluation."""

    term: Term
    lam: Fraction
    m: int
    n: int
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class And(Condition):
    left: Condition
    right: Condition
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class Or(Condition):
    left: Condition
    right: Condition
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class Not(Condition):
    inner: Condition
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class TrueCond(Condition):
    pos: Optional[SourcePos] = _posfield()


@dataclass(frozen=True)
class PiecewiseFunction:
    """A function defined by disjoint (condition, term) pieces.

    Disjointness is not decidable symbolically in this fragment; it is
    checked empirically wherever the function is evaluated, and more than
    one matching piece is an error.
    """

    variables: tuple
    pieces: tuple  # of (Condition, Term)


# ---------------------------------------------------------------------------
# builtin registry


@dataclass(frozen=True)
class BuiltinSpec:
    """A named builtin: evaluator, domain note, and derivative rule.

    derivative is "zero" for locally constant builtins, a callable taking
    the argument terms and returning a Term, or None when no derivative is
    declared (differentiation then fails with UnknownDerivativeError).
    """

    name: str
    arity: int
    evaluate: Callable
    derivative: Union[str, Callable, None]
    domain_note: str = ""


_BUILTINS: dict = {}


def register_builtin(spec: BuiltinSpec) -> None:
    _BUILTINS[spec.name] = spec


def builtin_spec(name: str) -> BuiltinSpec:
    return _BUILTINS[name]


def known_builtins() -> tuple:
    return tuple(sorted(_BUILTINS))


# ---------------------------------------------------------------------------
# tokenizer


@dataclass(frozen=True)
class _Token:
    kind: str  # "int", "ident", "op", "eof"
    text: str
    line: int
    col: int


_TWO_CHAR = ("||", "&&", "<=", "->")
_ONE_CHAR = set("+-*/^()|<>=!%,;{}[]")


def _tokenize(source: str) -> list:
    tokens = []
    line, col, i = 1, 1, 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        two = source[i : i + 2]
        if two in _TWO_CHAR:
            tokens.append(_Token("op", two, line, col))
            i += 2
            col += 2
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(_Token("int", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in _ONE_CHAR:
            tokens.append(_Token("op", ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    # -- plumbing ---------------------------------------------------

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.text == text and tok.kind in ("op", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if not self.at(text):
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.next()

    def fail(self, message: str):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)

    def pos(self) -> SourcePos:
        tok = self.peek()
        return (tok.line, tok.col)

    def expect_eof(self) -> None:
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)

    # -- terms --------------------------------------------------------

    def term(self) -> Term:
        node = self.prod()
        while self.at("+") or self.at("-"):
            pos = self.pos()
            op = self.next().text
            right = self.prod()
            node = Add(node, right, pos=pos) if op == "+" else Sub(node, right, pos=pos)
        return node

    def prod(self) -> Term:
        node = self.unary()
        while self.at("*") or self.at("/"):
            pos = self.pos()
            op = self.next().text
            right = self.unary()
            node = Mul(node, right, pos=pos) if op == "*" else Div(node, right, pos=pos)
        return node

    def unary(self) -> Term:
        if self.at("-"):
            pos = self.pos()
            self.next()
            inner = self.unary()
            if isinstance(inner, RationalConst):
                return RationalConst(-inner.value, pos=pos)
            return Mul(RationalConst(Fraction(-1), pos=pos), inner, pos=pos)
        node = self.atom()
        if self.at("^"):
            pos = self.pos()
            self.next()
            node = IntPow(node, self.signed_int(parens_ok=True), pos=pos)
        return node

    def signed_int(self, parens_ok: bool = False) -> int:
        if parens_ok and self.accept("("):
            k = self.signed_int()
            self.expect(")")
            return k
        sign = -1 if self.accept("-") else 1
        tok = self.peek()
        if tok.kind != "int":
            self.fail("expected an integer")
        self.next()
        return sign * int(tok.text)

    def rational(self) -> Fraction:
        sign = -1 if self.accept("-") else 1
        tok = self.peek()
        if tok.kind != "int":
            self.fail("expected a rational literal")
        self.next()
        num = int(tok.text)
        if self.peek().text == "/" and self.peek(1).kind == "int":
            self.next()
            den = int(self.next().text)
            return Fraction(sign * num, den)
        return Fraction(sign * num)

    def atom(self) -> Term:
        tok = self.peek()
        pos = (tok.line, tok.col)
        if tok.kind == "int":
            return RationalConst(self.rational(), pos=pos)
        if self.accept("("):
            node = self.term()
            self.expect(")")
            return node
        if tok.kind == "ident":
            name = tok.text
            if name == "normval":
                self.next()
                self.expect("(")
                arg = self.term()
                self.expect(")")
                return NormVal(arg, pos=pos)
            if self.peek(1).text == "(" and name not in _RESERVED:
                if name not in _BUILTINS:
                    raise ParseError(f"unknown builtin {name!r}", tok.line, tok.col)
                self.next()
                self.expect("(")
                args = [self.term()]
                while self.accept(","):
                    args.append(self.term())
                self.expect(")")
                spec = _BUILTINS[name]
                if len(args) != spec.arity:
                    raise ParseError(
                        f"builtin {name!r} takes {spec.arity} argument(s), got {len(args)}",
                        tok.line,
                        tok.col,
                    )
                return BuiltinCall(name, tuple(args), pos=pos)
            if name in _RESERVED:
                self.fail(f"reserved word {name!r} cannot start a term")
            self.next()
            return Variable(name, pos=pos)
        self.fail("expected a term")

    # -- conditions ----------------------------------------------------

    def cond(self) -> Condition:
        node = self.conj()
        while self.at("||"):
            pos = self.pos()
            self.next()
            node = Or(node, self.conj(), pos=pos)
        return node

    def conj(self) -> Condition:
        node = self.lit()
        while self.at("&&"):
            pos = self.pos()
            self.next()
            node = And(node, self.lit(), pos=pos)
        return node

    def lit(self) -> Condition:
        tok = self.peek()
        pos = (tok.line, tok.col)
        if self.accept("!"):
            return Not(self.lit(), pos=pos)
        if tok.kind == "ident" and tok.text == "true":
            self.next()
            return TrueCond(pos=pos)
        if self.accept("|"):
            lhs = self.term()
            self.expect("|")
            op_tok = self.peek()
            if op_tok.text not in ("<", "<=", "="):
                self.fail("expected one of '<', '<=', '=' between norms")
            self.next()
            self.expect("|")
            rhs = self.term()
            self.expect("|")
            return NormCmp(lhs, op_tok.text, rhs, pos=pos)
        if tok.kind == "ident" and tok.text == "ord" and self.peek(1).text == "(":
            self.next()
            self.expect("(")
            inner = self.term()
            self.expect(")")
            self.expect("%")
            mod_tok = self.peek()
            if mod_tok.kind != "int":
                self.fail("expected a modulus")
            modulus = int(self.next().text)
            if modulus < 1:
                raise ParseError("ord congruence modulus must be >= 1", mod_tok.line, mod_tok.col)
            self.expect("=")
            residue = self.signed_int()
            return OrdCongruence(inner, modulus, residue % modulus, pos=pos)
        if self.at("("):
            snapshot = self.i
            try:
                self.next()
                inner_cond = self.cond()
                self.expect(")")
                return inner_cond
            except ParseError:
                self.i = snapshot
        # membership literal: term "in" rational "*" "Q(" m "," n ")"
        subject = self.term()
        self.expect("in")
        lam = self.rational()
        self.expect("*")
        self.expect("Q")
        self.expect("(")
        m = self.signed_int()
        self.expect(",")
        n = self.signed_int()
        self.expect(")")
        if m < 1 or n < 1:
            raise ParseError("coset depths m, n must be >= 1", tok.line, tok.col)
        return CosetMember(subject, lam, m, n, pos=pos)

    # -- piecewise -------------------------------------------------------

    def piecewise(self) -> PiecewiseFunction:
        self.expect("piecewise")
        self.expect("(")
        names = [self._var_name()]
        while self.accept(","):
            names.append(self._var_name())
        self.expect(")")
        self.expect("{")
        pieces = [self._piece(names)]
        while self.accept(";"):
            pieces.append(self._piece(names))
        self.expect("}")
        return PiecewiseFunction(tuple(names), tuple(pieces))

    def _var_name(self) -> str:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in _RESERVED:
            self.fail("expected a variable name")
        self.next()
        return tok.text

    def _piece(self, names) -> tuple:
        tok = self.peek()
        condition = self.cond()
        self.expect("->")
        body = self.term()
        for node, what in ((condition, "condition"), (body, "term")):
            stray = [v for v in free_variables(node) if v not in names]
            if stray:
                raise ParseError(
                    f"unbound variable {stray[0]!r} in piece {what}", tok.line, tok.col
                )
        return (condition, body)


def parse_term(source: str) -> Term:
    parser = _Parser(source)
    node = parser.term()
    parser.expect_eof()
    return node


def parse_condition(source: str) -> Condition:
    parser = _Parser(source)
    node = parser.cond()
    parser.expect_eof()
    return node


def parse_piecewise(source: str) -> PiecewiseFunction:
    parser = _Parser(source)
    node = parser.piecewise()
    parser.expect_eof()
    return node


def parse(source: str):
    """Parse a term, a condition, or a piecewise function, whichever fits.

    Terms are tried first; on failure the condition reading is tried and
    the error of whichever attempt got further is reported.
    """
    probe = _Parser(source)
    if probe.peek().text == "piecewise":
        return parse_piecewise(source)
    try:
        return parse_term(source)
    except ParseError as term_err:
        term_progress = _progress(source, as_condition=False)
        try:
            return parse_condition(source)
        except ParseError as cond_err:
            cond_progress = _progress(source, as_condition=True)
            raise cond_err if cond_progress >= term_progress else term_err


def _progress(source: str, as_condition: bool) -> int:
    parser = _Parser(source)
    try:
        parser.cond() if as_condition else parser.term()
    except ParseError:
        pass
    return parser.i


# ---------------------------------------------------------------------------
# formatting (round-trips through the parser)

_PREC_SUM, _PREC_PROD, _PREC_UNARY, _PREC_POW = 1, 2, 3, 4


def _fmt(t: Term, parent: int) -> str:
    if isinstance(t, RationalConst):
        text = str(t.value)
        need = parent > _PREC_UNARY and t.value < 0
        return f"({text})" if need else text
    if isinstance(t, Variable):
        return t.name
    if isinstance(t, NormVal):
        return f"normval({_fmt(t.arg, 0)})"
    if isinstance(t, BuiltinCall):
        inner = ",".join(_fmt(a, 0) for a in t.args)
        return f"{t.name}({inner})"
    if isinstance(t, IntPow):
        base = _fmt(t.base, _PREC_POW + 1)
        text = f"{base}^{t.exponent}"
        return f"({text})" if parent > _PREC_POW else text
    if isinstance(t, (Add, Sub)):
        op = "+" if isinstance(t, Add) else "-"
        text = f"{_fmt(t.left, _PREC_SUM)}{op}{_fmt(t.right, _PREC_SUM + 1)}"
        return f"({text})" if parent > _PREC_SUM else text
    if isinstance(t, (Mul, Div)):
        op = "*" if isinstance(t, Mul) else "/"
        text = f"{_fmt(t.left, _PREC_PROD)}{op}{_fmt(t.right, _PREC_PROD + 1)}"
        return f"({text})" if parent > _PREC_PROD else text
    raise TypeError(f"not a term node: {t!r}")


def format_term(t: Term) -> str:
    return _fmt(t, 0)


def format_condition(c: Condition) -> str:
    if isinstance(c, TrueCond):
        return "true"
    if isinstance(c, NormCmp):
        return f"|{_fmt(c.lhs, 0)}| {c.op} |{_fmt(c.rhs, 0)}|"
    if isinstance(c, OrdCongruence):
        return f"ord({_fmt(c.term, 0)}) % {c.modulus} = {c.residue}"
    if isinstance(c, CosetMember):
        return f"{_fmt(c.term, _PREC_PROD + 1)} in {c.lam}*Q({c.m},{c.n})"
    if isinstance(c, Not):
        inner = format_condition(c.inner)
        if isinstance(c.inner, (And, Or)):
            inner = f"({inner})"
        return f"!{inner}"
    if isinstance(c, And):
        parts = []
        for side in (c.left, c.right):
            text = format_condition(side)
            parts.append(f"({text})" if isinstance(side, Or) else text)
        return " && ".join(parts)
    if isinstance(c, Or):
        return f"{format_condition(c.left)} || {format_condition(c.right)}"
    raise TypeError(f"not a condition node: {c!r}")


def format_piecewise(pf: PiecewiseFunction) -> str:
    head = ",".join(pf.variables)
    body = " ; ".join(
        f"{format_condition(cond)} -> {format_term(body)}" for cond, body in pf.pieces
    )
    return f"piecewise({head}) {{ {body} }}"


# ---------------------------------------------------------------------------
# free variables


def free_variables(node) -> tuple:
    """Variable names in first-occurrence order."""
    seen: list = []

    def walk(x):
        if isinstance(x, Variable):
            if x.name not in seen:
                seen.append(x.name)
        elif isinstance(x, (Add, Sub, Mul, Div)):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, IntPow):
            walk(x.base)
        elif isinstance(x, NormVal):
            walk(x.arg)
        elif isinstance(x, BuiltinCall):
            for a in x.args:
                walk(a)
        elif isinstance(x, NormCmp):
            walk(x.lhs)
            walk(x.rhs)
        elif isinstance(x, (OrdCongruence, CosetMember)):
            walk(x.term)
        elif isinstance(x, (And, Or)):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, Not):
            walk(x.inner)
        elif isinstance(x, PiecewiseFunction):
            for cond, body in x.pieces:
                walk(cond)
                walk(body)
        elif isinstance(x, (RationalConst, TrueCond)):
            pass
        else:
            raise TypeError(f"not an AST node: {x!r}")

    walk(node)
    return tuple(seen)


# ---------------------------------------------------------------------------
# evaluation


def _infer_context(point: Mapping, ctx: Optional[PrimeContext]) -> PrimeContext:
    for v in point.values():
        if ctx is not None and v.context != ctx:
            raise EvaluationError("point values disagree with the supplied context")
        ctx = v.context
    if ctx is None:
        raise EvaluationError("no prime context available (empty point, no ctx)")
    return ctx


def evaluate(t: Term, point: Mapping, ctx: Optional[PrimeContext] = None) -> PadicScalar:
    """Exact evaluation of a term at a rational point.

    point maps variable names to PadicScalar values sharing one context.
    """
    ctx = _infer_context(point, ctx)
    return _eval(t, point, ctx)


def _eval(t: Term, point: Mapping, ctx: PrimeContext) -> PadicScalar:
    if isinstance(t, RationalConst):
        return PadicScalar(t.value, ctx)
    if isinstance(t, Variable):
        try:
            return point[t.name]
        except KeyError:
            raise UnboundVariableError(f"unbound variable {t.name!r}") from None
    if isinstance(t, Add):
        return _eval(t.left, point, ctx) + _eval(t.right, point, ctx)
    if isinstance(t, Sub):
        return _eval(t.left, point, ctx) - _eval(t.right, point, ctx)
    if isinstance(t, Mul):
        return _eval(t.left, point, ctx) * _eval(t.right, point, ctx)
    if isinstance(t, Div):
        denom = _eval(t.right, point, ctx)
        if denom.is_zero:
            raise DivisionByZero(t.right)
        return _eval(t.left, point, ctx) / denom
    if isinstance(t, IntPow):
        base = _eval(t.base, point, ctx)
        if base.is_zero and t.exponent < 0:
            raise DivisionByZero(t)
        return base**t.exponent
    if isinstance(t, NormVal):
        arg = _eval(t.arg, point, ctx)
        if arg.is_zero:
            raise BuiltinDomainError("normval is declared on nonzero arguments")
        return PadicScalar(ctx.power(-arg.ord().value), ctx)
    if isinstance(t, BuiltinCall):
        spec = _BUILTINS.get(t.name)
        if spec is None:
            raise EvaluationError(f"unknown builtin {t.name!r}")
        args = tuple(_eval(a, point, ctx) for a in t.args)
        return spec.evaluate(ctx, args)
    raise TypeError(f"not a term node: {t!r}")


def eval_condition(c: Condition, point: Mapping, ctx: Optional[PrimeContext] = None) -> bool:
    """Exact truth value of a condition at a rational point."""
    ctx = _infer_context(point, ctx)
    return _eval_cond(c, point, ctx)


def _norm_exponents_cmp(a: "int | None", b: "int | None", op: str) -> bool:
    # None is the zero flag: |0| = 0 is strictly below every p^e.
    if op == "=":
        return a == b
    if op == "<":
        if a is None:
            return b is not None
        return b is not None and a < b
    if op == "<=":
        return a == b or _norm_exponents_cmp(a, b, "<")
    raise ValueError(f"unknown norm comparison {op!r}")


def _eval_cond(c: Condition, point: Mapping, ctx: PrimeContext) -> bool:
    if isinstance(c, TrueCond):
        return True
    if isinstance(c, NormCmp):
        lhs = _eval(c.lhs, point, ctx).norm_exponent()
        rhs = _eval(c.rhs, point, ctx).norm_exponent()
        return _norm_exponents_cmp(lhs, rhs, c.op)
    if isinstance(c, OrdCongruence):
        v = _eval(c.term, point, ctx).ord()
        return v.is_finite and v.value % c.modulus == c.residue
    if isinstance(c, CosetMember):
        x = _eval(c.term, point, ctx)
        lam = PadicScalar(c.lam, ctx)
        return in_coset(x, CosetSpec(lam, c.m, c.n))
    if isinstance(c, And):
        return _eval_cond(c.left, point, ctx) and _eval_cond(c.right, point, ctx)
    if isinstance(c, Or):
        return _eval_cond(c.left, point, ctx) or _eval_cond(c.right, point, ctx)
    if isinstance(c, Not):
        return not _eval_cond(c.inner, point, ctx)
    raise TypeError(f"not a condition node: {c!r}")


def evaluate_piecewise(
    pf: PiecewiseFunction, point: Mapping, ctx: Optional[PrimeContext] = None
) -> PadicScalar:
    """Evaluate a piecewise function; exactly one piece condition may hold."""
    ctx = _infer_context(point, ctx)
    matches = [body for cond, body in pf.pieces if _eval_cond(cond, point, ctx)]
    if not matches:
        raise PieceDomainError(f"no piece covers the point {_point_str(point)}")
    if len(matches) > 1:
        raise PieceOverlapError(f"pieces overlap at the point {_point_str(point)}")
    return _eval(matches[0], point, ctx)


def _point_str(point: Mapping) -> str:
    return "{" + ", ".join(f"{k}={v}" for k, v in sorted(point.items())) + "}"


# ---------------------------------------------------------------------------
# symbolic differentiation

_ZERO = RationalConst(Fraction(0))
_ONE = RationalConst(Fraction(1))


def _is_const(t: Term, value: int) -> bool:
    return isinstance(t, RationalConst) and t.value == value


def _add(a: Term, b: Term) -> Term:
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    return Add(a, b)


def _sub(a: Term, b: Term) -> Term:
    if _is_const(b, 0):
        return a
    if _is_const(a, 0) and isinstance(b, RationalConst):
        return RationalConst(-b.value)
    return Sub(a, b)


def _mul(a: Term, b: Term) -> Term:
    if _is_const(a, 0) or _is_const(b, 0):
        return _ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    return Mul(a, b)


def differentiate(t: Term, var: str) -> Term:
    """Symbolic derivative with respect to var.

    normval differentiates to zero (it is locally constant away from 0);
    builtins use their registered derivative rule and raise
    UnknownDerivativeError when none is declared.
    """
    if isinstance(t, RationalConst):
        return _ZERO
    if isinstance(t, Variable):
        return _ONE if t.name == var else _ZERO
    if isinstance(t, Add):
        return _add(differentiate(t.left, var), differentiate(t.right, var))
    if isinstance(t, Sub):
        return _sub(differentiate(t.left, var), differentiate(t.right, var))
    if isinstance(t, Mul):
        return _add(
            _mul(differentiate(t.left, var), t.right),
            _mul(t.left, differentiate(t.right, var)),
        )
    if isinstance(t, Div):
        num = _sub(
            _mul(differentiate(t.left, var), t.right),
            _mul(t.left, differentiate(t.right, var)),
        )
        return Div(num, IntPow(t.right, 2))
    if isinstance(t, IntPow):
        if t.exponent == 0:
            return _ZERO
        inner = differentiate(t.base, var)
        scaled = _mul(RationalConst(Fraction(t.exponent)), IntPow(t.base, t.exponent - 1))
        return _mul(scaled, inner)
    if isinstance(t, NormVal):
        return _ZERO
    if isinstance(t, BuiltinCall):
        spec = _BUILTINS.get(t.name)
        if spec is None or spec.derivative is None:
            raise UnknownDerivativeError(f"builtin {t.name!r} has no declared derivative")
        if spec.derivative == "zero":
            return _ZERO
        outer = spec.derivative(t.args)
        # registered rule gives d/d(arg); chain through the single argument
        if spec.arity == 1:
            return _mul(outer, differentiate(t.args[0], var))
        return outer
    raise TypeError(f"not a term node: {t!r}")
