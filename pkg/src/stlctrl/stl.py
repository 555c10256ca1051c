"""Discrete-time STL: abstract syntax, parser, horizon, robustness, witnesses.

Formulas are kept in positive normal form: the parser pushes every
negation down to the predicates, so the tree only contains predicates,
And/Or, and the bounded temporal operators F/G/U/R.
"""

import math
from dataclasses import dataclass, field

from .autodiff import Var

INF = math.inf


class HorizonError(ValueError):
    """Trace too short for the formula's temporal scope."""


# -- predicate functions -----------------------------------------------------

@dataclass(frozen=True)
class Affine:
    """h(s) = sum_i c[i]*s[i] + d over state coordinates."""

    c: tuple
    d: float

    def eval(self, state):
        v = self.d
        for i, ci in enumerate(self.c):
            if ci != 0.0:
                v = v + ci * state[i]
        return v

    def negated(self):
        return Affine(tuple(-ci for ci in self.c), -self.d)

    def describe(self):
        terms = []
        for i, ci in enumerate(self.c):
            if ci != 0.0:
                terms.append(f"{ci:+g}*x{i}")
        lhs = " ".join(terms) if terms else "0"
        return f"{lhs} {self.d:+g}"


@dataclass(frozen=True)
class Named:
    """Registered scalar function of the state, differentiable if given Vars."""

    name: str
    fn: object
    negation: object = None  # another Named, or None

    def eval(self, state):
        return self.fn(state)

    def negated(self):
        if self.negation is None:
            raise UnsupportedNegation(
                f"named predicate {self.name!r} has no registered negation")
        return self.negation

    def describe(self):
        return f"pred({self.name})"


class UnsupportedNegation(ValueError):
    pass


# -- formula nodes -----------------------------------------------------------

@dataclass(frozen=True)
class Pred:
    h: object          # Affine or Named
    strict: bool = True  # h(s) > 0 vs h(s) >= 0; robustness is h(s) either way


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


def _check_bounds(a, b):
    if not (isinstance(a, int) and isinstance(b, int)):
        raise ValueError("temporal bounds must be integers")
    if a < 0 or a > b:
        raise ValueError(f"invalid interval [{a},{b}]")


@dataclass(frozen=True)
class Eventually:
    a: int
    b: int
    child: object

    def __post_init__(self):
        _check_bounds(self.a, self.b)


@dataclass(frozen=True)
class Always:
    a: int
    b: int
    child: object

    def __post_init__(self):
        _check_bounds(self.a, self.b)


@dataclass(frozen=True)
class Until:
    a: int
    b: int
    left: object
    right: object

    def __post_init__(self):
        _check_bounds(self.a, self.b)


@dataclass(frozen=True)
class Release:
    a: int
    b: int
    left: object
    right: object

    def __post_init__(self):
        _check_bounds(self.a, self.b)


# -- traces ------------------------------------------------------------------

class Trace:
    """State sequence s_0..s_K; each state is an indexable vector."""

    __slots__ = ("states", "dim", "K")

    def __init__(self, states):
        self.states = [tuple(s) for s in states]
        if not self.states:
            raise ValueError("trace must contain at least one state")
        self.dim = len(self.states[0])
        for s in self.states:
            if len(s) != self.dim:
                raise ValueError("trace states have inconsistent dimension")
        self.K = len(self.states) - 1


@dataclass(frozen=True)
class CriticalWitness:
    time: int
    predicate: Pred
    value: float


# -- structural queries -------------------------------------------------------

def horizon(f):
    """Last time-step needed to evaluate f at time 0."""
    if isinstance(f, Pred):
        return 0
    if isinstance(f, (And, Or)):
        return max(horizon(c) for c in f.children)
    if isinstance(f, (Eventually, Always)):
        return f.b + horizon(f.child)
    if isinstance(f, (Until, Release)):
        return f.b + max(horizon(f.left), horizon(f.right))
    raise TypeError(f"not a formula node: {f!r}")


def aggregation_shape(f):
    """(max nesting depth, max fan-in) of min/max aggregations in the
    expanded Table-style evaluation of f; predicates have depth 0."""
    if isinstance(f, Pred):
        return 0, 1
    if isinstance(f, (And, Or)):
        ds, ws = zip(*(aggregation_shape(c) for c in f.children))
        return 1 + max(ds), max(len(f.children), *ws)
    if isinstance(f, (Eventually, Always)):
        d, w = aggregation_shape(f.child)
        return 1 + d, max(f.b - f.a + 1, w)
    if isinstance(f, (Until, Release)):
        dl, wl = aggregation_shape(f.left)
        dr, wr = aggregation_shape(f.right)
        # outer aggregation over k', inner over {right@k'} u {left@k''<k'}
        return 2 + max(dl, dr), max(f.b - f.a + 1, f.b + 1, wl, wr)
    raise TypeError(f"not a formula node: {f!r}")


def _check_fits(f, tr, k):
    if k + horizon(f) > tr.K:
        raise HorizonError(
            f"formula horizon {horizon(f)} at time {k} exceeds trace length K={tr.K}")


# -- quantitative semantics ---------------------------------------------------

def robustness(f, tr, k=0):
    """Exact robustness of f over tr at time k (min/max recursion)."""
    _check_fits(f, tr, k)
    return _rho(f, tr, k, {})


def _rho(f, tr, k, memo):
    key = (id(f), k)
    got = memo.get(key)
    if got is not None:
        return got
    if isinstance(f, Pred):
        v = f.h.eval(tr.states[k])
    elif isinstance(f, And):
        v = min(_rho(c, tr, k, memo) for c in f.children)
    elif isinstance(f, Or):
        v = max(_rho(c, tr, k, memo) for c in f.children)
    elif isinstance(f, Always):
        v = min(_rho(f.child, tr, kk, memo) for kk in range(k + f.a, k + f.b + 1))
    elif isinstance(f, Eventually):
        v = max(_rho(f.child, tr, kk, memo) for kk in range(k + f.a, k + f.b + 1))
    elif isinstance(f, Until):
        v = -INF
        for kp in range(k + f.a, k + f.b + 1):
            inner = _rho(f.right, tr, kp, memo)
            for kpp in range(k, kp):
                inner = min(inner, _rho(f.left, tr, kpp, memo))
            v = max(v, inner)
    elif isinstance(f, Release):
        v = INF
        for kp in range(k + f.a, k + f.b + 1):
            inner = _rho(f.right, tr, kp, memo)
            for kpp in range(k, kp):
                inner = max(inner, _rho(f.left, tr, kpp, memo))
            v = min(v, inner)
    else:
        raise TypeError(f"not a formula node: {f!r}")
    memo[key] = v
    return v


# -- Boolean semantics ---------------------------------------------------------

def satisfies(f, tr, k=0):
    _check_fits(f, tr, k)
    return _sat(f, tr, k, {})


def _sat(f, tr, k, memo):
    key = (id(f), k)
    got = memo.get(key)
    if got is not None:
        return got
    if isinstance(f, Pred):
        v = f.h.eval(tr.states[k])
        out = v > 0.0 if f.strict else v >= 0.0
    elif isinstance(f, And):
        out = all(_sat(c, tr, k, memo) for c in f.children)
    elif isinstance(f, Or):
        out = any(_sat(c, tr, k, memo) for c in f.children)
    elif isinstance(f, Always):
        out = all(_sat(f.child, tr, kk, memo) for kk in range(k + f.a, k + f.b + 1))
    elif isinstance(f, Eventually):
        out = any(_sat(f.child, tr, kk, memo) for kk in range(k + f.a, k + f.b + 1))
    elif isinstance(f, Until):
        out = False
        for kp in range(k + f.a, k + f.b + 1):
            if _sat(f.right, tr, kp, memo) and all(
                    _sat(f.left, tr, kpp, memo) for kpp in range(k, kp)):
                out = True
                break
    elif isinstance(f, Release):
        out = True
        for kp in range(k + f.a, k + f.b + 1):
            if not (_sat(f.right, tr, kp, memo) or any(
                    _sat(f.left, tr, kpp, memo) for kpp in range(k, kp))):
                out = False
                break
    else:
        raise TypeError(f"not a formula node: {f!r}")
    memo[key] = out
    return out


# -- critical witness -----------------------------------------------------------

def critical(f, tr, k=0):
    """Predicate instance (k*, h*) whose value equals robustness(f, tr, k).

    Ties in the min/max recursion break toward the smaller time-step,
    then the left operand, so witnesses are deterministic.
    """
    _check_fits(f, tr, k)
    value, kstar, pred = _crit(f, tr, k, {})
    return CriticalWitness(time=kstar, predicate=pred, value=value)


def _crit(f, tr, k, memo):
    key = (id(f), k)
    got = memo.get(key)
    if got is not None:
        return got
    if isinstance(f, Pred):
        out = (f.h.eval(tr.states[k]), k, f)
    elif isinstance(f, (And, Or)):
        take_min = isinstance(f, And)
        out = None
        for c in f.children:
            cand = _crit(c, tr, k, memo)
            out = cand if out is None else _pick(out, cand, take_min)
    elif isinstance(f, (Always, Eventually)):
        take_min = isinstance(f, Always)
        out = None
        for kk in range(k + f.a, k + f.b + 1):
            cand = _crit(f.child, tr, kk, memo)
            out = cand if out is None else _pick(out, cand, take_min)
    elif isinstance(f, (Until, Release)):
        is_until = isinstance(f, Until)
        out = None
        for kp in range(k + f.a, k + f.b + 1):
            # inner candidates in time order: left at k..kp-1, then right at kp
            inner = None
            for kpp in range(k, kp):
                cand = _crit(f.left, tr, kpp, memo)
                inner = cand if inner is None else _pick(inner, cand, is_until)
            cand = _crit(f.right, tr, kp, memo)
            inner = cand if inner is None else _pick(inner, cand, is_until)
            out = inner if out is None else _pick(out, inner, not is_until)
    else:
        raise TypeError(f"not a formula node: {f!r}")
    memo[key] = out
    return out


def _pick(best, cand, take_min):
    # keep the incumbent on ties: candidates arrive in (time, left-first) order
    if take_min:
        return cand if cand[0] < best[0] else best
    return cand if cand[0] > best[0] else best


# -- parser ---------------------------------------------------------------------

class ParseError(ValueError):
    def __init__(self, message, line, col):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


_OPERATORS = {"F": Eventually, "G": Always, "U": Until, "R": Release}


class _Lexer:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def _linecol(self, pos):
        line = self.text.count("\n", 0, pos) + 1
        last = self.text.rfind("\n", 0, pos)
        return line, pos - last

    def error(self, message, pos=None):
        line, col = self._linecol(self.pos if pos is None else pos)
        raise ParseError(message, line, col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, token):
        self.skip_ws()
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def expect(self, token):
        if not self.eat(token):
            self.error(f"expected {token!r}")

    def number(self):
        self.skip_ws()
        start = self.pos
        t = self.text
        if self.pos < len(t) and t[self.pos] in "+-":
            self.pos += 1
        digits = False
        while self.pos < len(t) and t[self.pos].isdigit():
            self.pos += 1
            digits = True
        if self.pos < len(t) and t[self.pos] == ".":
            self.pos += 1
            while self.pos < len(t) and t[self.pos].isdigit():
                self.pos += 1
                digits = True
        if self.pos < len(t) and t[self.pos] in "eE" and digits:
            mark = self.pos
            self.pos += 1
            if self.pos < len(t) and t[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(t) and t[self.pos].isdigit():
                while self.pos < len(t) and t[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark
        if not digits:
            self.error("expected a number", start)
        return float(t[start:self.pos])

    def integer(self):
        v = self.number()
        if not v.is_integer():
            self.error("expected an integer time bound")
        return int(v)

    def ident(self):
        self.skip_ws()
        start = self.pos
        t = self.text
        while self.pos < len(t) and (t[self.pos].isalnum() or t[self.pos] == "_"):
            self.pos += 1
        if self.pos == start:
            self.error("expected an identifier")
        return t[start:self.pos]


def parse(text, named=None):
    """Parse the formula DSL into a positive-normal-form Formula.

    Predicates: `x0 > 1.5`, `2*x0 - x3 >= 0`, `pred(name)` with `named`
    a dict of Named predicates.  Connectives: `&&`, `||`, `!`,
    `F[a,b](...)`, `G[a,b](...)`, `U[a,b](lhs, rhs)`, `R[a,b](lhs, rhs)`.
    Negations are pushed onto the predicates while parsing.
    """
    lx = _Lexer(text)
    f = _parse_or(lx, named or {})
    lx.skip_ws()
    if lx.pos != len(lx.text):
        lx.error("unexpected trailing input")
    return f


def _parse_or(lx, named):
    children = [_parse_and(lx, named)]
    while lx.eat("||"):
        children.append(_parse_and(lx, named))
    return children[0] if len(children) == 1 else Or(tuple(children))


def _parse_and(lx, named):
    children = [_parse_unary(lx, named)]
    while lx.eat("&&"):
        children.append(_parse_unary(lx, named))
    return children[0] if len(children) == 1 else And(tuple(children))


def _parse_unary(lx, named):
    if lx.eat("!"):
        return negate(_parse_unary(lx, named))
    c = lx.peek()
    if c and c in "FGUR":
        mark = lx.pos
        op = lx.text[lx.pos]
        lx.pos += 1
        if lx.peek() != "[":
            lx.pos = mark  # an identifier like `F...`? fall through to predicate
        else:
            lx.expect("[")
            a = lx.integer()
            lx.expect(",")
            b = lx.integer()
            lx.expect("]")
            lx.expect("(")
            if op in "FG":
                child = _parse_or(lx, named)
                lx.expect(")")
                try:
                    return _OPERATORS[op](a, b, child)
                except ValueError as e:
                    lx.error(str(e))
            left = _parse_or(lx, named)
            lx.expect(",")
            right = _parse_or(lx, named)
            lx.expect(")")
            try:
                return _OPERATORS[op](a, b, left, right)
            except ValueError as e:
                lx.error(str(e))
    if lx.eat("("):
        f = _parse_or(lx, named)
        lx.expect(")")
        return f
    return _parse_predicate(lx, named)


def _parse_predicate(lx, named):
    lx.skip_ws()
    if lx.text.startswith("pred", lx.pos):
        mark = lx.pos
        lx.pos += 4
        if lx.eat("("):
            name = lx.ident()
            lx.expect(")")
            p = named.get(name)
            if p is None:
                lx.error(f"unknown named predicate {name!r}", mark)
            return Pred(h=p, strict=True)
        lx.pos = mark
    coeffs = {}
    const = 0.0
    sign = 1.0
    first = True
    while True:
        lx.skip_ws()
        c = lx.peek()
        coef = sign
        if c in "+-" or c == "." or c.isdigit():
            coef = sign * lx.number()
            if not lx.eat("*"):
                const += coef
                coef = None
        if coef is not None:
            lx.skip_ws()
            if lx.peek() != "x":
                if first:
                    lx.error("expected a predicate term like `x0` or `2*x0`")
                lx.error("expected a state variable like `x0` after `*`")
            lx.pos += 1
            idx = lx.integer()
            if idx < 0:
                lx.error("state index must be non-negative")
            coeffs[idx] = coeffs.get(idx, 0.0) + coef
        first = False
        lx.skip_ws()
        nxt = lx.peek()
        if nxt == "+":
            lx.pos += 1
            sign = 1.0
        elif nxt == "-":
            lx.pos += 1
            sign = -1.0
        else:
            break
    for cmp_tok in (">=", "<=", ">", "<"):
        if lx.eat(cmp_tok):
            rhs = lx.number()
            break
    else:
        lx.error("expected a comparison (>, >=, <, <=)")
    dim = max(coeffs) + 1 if coeffs else 1
    c = [coeffs.get(i, 0.0) for i in range(dim)]
    d = const - rhs
    if cmp_tok in ("<", "<="):
        c = [-ci for ci in c]
        d = -d
    h = Affine(tuple(c), d)
    return Pred(h=h, strict=cmp_tok in (">", "<"))


def negate(f):
    """Negation in positive normal form (pushed down to the predicates)."""
    if isinstance(f, Pred):
        return Pred(h=f.h.negated(), strict=not f.strict)
    if isinstance(f, And):
        return Or(tuple(negate(c) for c in f.children))
    if isinstance(f, Or):
        return And(tuple(negate(c) for c in f.children))
    if isinstance(f, Always):
        return Eventually(f.a, f.b, negate(f.child))
    if isinstance(f, Eventually):
        return Always(f.a, f.b, negate(f.child))
    if isinstance(f, Until):
        return Release(f.a, f.b, negate(f.left), negate(f.right))
    if isinstance(f, Release):
        return Until(f.a, f.b, negate(f.left), negate(f.right))
    raise TypeError(f"not a formula node: {f!r}")
