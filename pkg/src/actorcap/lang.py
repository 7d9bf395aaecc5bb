"""Extended regular expressions over a finite alphabet of message types.

Languages over message types describe which message sequences may be sent
through an actor reference.  Everything else in the package reduces to the
operations here: nullability, Brzozowski derivatives, the shuffle product
(all interleavings of two languages), intersection, emptiness, inclusion and
equivalence.

Expressions are immutable and kept in a canonical form by the smart
constructors (`alt`, `cat`, `shuffle`, `conj`, `star`): unions are flattened,
sorted and deduplicated, unit and annihilator laws are applied, and the
commutative operators have sorted operands.  Canonical forms matter because
inclusion is decided by exploring pairs of derivatives and only terminates
when the set of derivatives is finite modulo these identities.

All operations are pure; the memo tables behind them are append-only caches
keyed by immutable values, so concurrent callers never observe shared
mutable state.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

DEFAULT_STATE_BUDGET = 100_000
STATE_BUDGET_ENV = "ACTORCAP_STATE_BUDGET"


class StateBudgetExceeded(Exception):
    """The derivative-pair closure outgrew the configured state budget."""


class LangParseError(ValueError):
    """A textual language expression failed to parse."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at column {pos + 1})")
        self.pos = pos


@dataclass(frozen=True, order=True)
class MsgType:
    """An alphabet symbol: the interned name of a declared message type."""

    name: str

    def __repr__(self) -> str:
        return f"<{self.name}>"


Word = tuple[MsgType, ...]

UNIT_MSG = MsgType("Unit")


class LangExpr:
    """Base class for language expressions."""

    __slots__ = ()

    def __str__(self) -> str:
        return lang_to_text(self)


@dataclass(frozen=True, repr=False)
class Empty(LangExpr):
    def __repr__(self) -> str:
        return "Empty"


@dataclass(frozen=True, repr=False)
class Eps(LangExpr):
    def __repr__(self) -> str:
        return "Eps"


@dataclass(frozen=True, repr=False)
class Sym(LangExpr):
    sym: MsgType

    def __repr__(self) -> str:
        return f"Sym({self.sym.name})"


@dataclass(frozen=True, repr=False)
class Cat(LangExpr):
    left: LangExpr
    right: LangExpr

    def __repr__(self) -> str:
        return f"Cat({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Alt(LangExpr):
    left: LangExpr
    right: LangExpr

    def __repr__(self) -> str:
        return f"Alt({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Star(LangExpr):
    inner: LangExpr

    def __repr__(self) -> str:
        return f"Star({self.inner!r})"


@dataclass(frozen=True, repr=False)
class Shuffle(LangExpr):
    left: LangExpr
    right: LangExpr

    def __repr__(self) -> str:
        return f"Shuffle({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class And(LangExpr):
    left: LangExpr
    right: LangExpr

    def __repr__(self) -> str:
        return f"And({self.left!r}, {self.right!r})"


EMPTY = Empty()
EPS = Eps()


def sym(name: str | MsgType) -> Sym:
    if isinstance(name, MsgType):
        return Sym(name)
    return Sym(MsgType(name))


@lru_cache(maxsize=None)
def _key(e: LangExpr):
    """Total structural order used to sort operands of commutative nodes."""
    match e:
        case Empty():
            return (0,)
        case Eps():
            return (1,)
        case Sym(s):
            return (2, s.name)
        case Star(i):
            return (3, _key(i))
        case Cat(l, r):
            return (4, _key(l), _key(r))
        case Shuffle(l, r):
            return (5, _key(l), _key(r))
        case And(l, r):
            return (6, _key(l), _key(r))
        case Alt(l, r):
            return (7, _key(l), _key(r))
    raise TypeError(f"not a language expression: {e!r}")


def _chain(cls, e: LangExpr) -> list[LangExpr]:
    items: list[LangExpr] = []
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, cls):
            stack.append(x.right)
            stack.append(x.left)
        else:
            items.append(x)
    return items


def _fold_right(cls, items: list[LangExpr]) -> LangExpr:
    acc = items[-1]
    for x in reversed(items[:-1]):
        acc = cls(x, acc)
    return acc


def alt(a: LangExpr, b: LangExpr) -> LangExpr:
    items = {x for x in _chain(Alt, a) + _chain(Alt, b) if x != EMPTY}
    if not items:
        return EMPTY
    ordered = sorted(items, key=_key)
    return _fold_right(Alt, ordered)


def alt_all(items) -> LangExpr:
    acc: LangExpr = EMPTY
    for x in items:
        acc = alt(acc, x)
    return acc


def cat(a: LangExpr, b: LangExpr) -> LangExpr:
    items = [x for x in _chain(Cat, a) + _chain(Cat, b) if x != EPS]
    if any(x == EMPTY for x in items):
        return EMPTY
    if not items:
        return EPS
    return _fold_right(Cat, items)


def shuffle(a: LangExpr, b: LangExpr) -> LangExpr:
    items = [x for x in _chain(Shuffle, a) + _chain(Shuffle, b) if x != EPS]
    if any(x == EMPTY for x in items):
        return EMPTY
    if not items:
        return EPS
    # Commutative and associative, so a sorted chain is canonical.  No
    # deduplication: L # L is genuinely larger than L.
    return _fold_right(Shuffle, sorted(items, key=_key))


def conj(a: LangExpr, b: LangExpr) -> LangExpr:
    items = {x for x in _chain(And, a) + _chain(And, b)}
    if EMPTY in items:
        return EMPTY
    if EPS in items:
        return EPS if all(nullable(x) for x in items) else EMPTY
    if not items:
        return EMPTY
    ordered = sorted(items, key=_key)
    if len(ordered) == 1:
        return ordered[0]
    return _fold_right(And, ordered)


def star(a: LangExpr) -> LangExpr:
    if a == EMPTY or a == EPS:
        return EPS
    if isinstance(a, Star):
        return a
    return Star(a)


def normalize(l: LangExpr) -> LangExpr:
    """Rebuild bottom-up through the smart constructors.

    Idempotent and denotation-preserving; expressions produced by this
    module are already normal, so this is mainly for externally built trees.
    """
    match l:
        case Empty() | Eps() | Sym(_):
            return l
        case Cat(a, b):
            return cat(normalize(a), normalize(b))
        case Alt(a, b):
            return alt(normalize(a), normalize(b))
        case Star(a):
            return star(normalize(a))
        case Shuffle(a, b):
            return shuffle(normalize(a), normalize(b))
        case And(a, b):
            return conj(normalize(a), normalize(b))
    raise TypeError(f"not a language expression: {l!r}")


@lru_cache(maxsize=None)
def nullable(l: LangExpr) -> bool:
    """True iff the empty word belongs to the language."""
    match l:
        case Empty():
            return False
        case Eps():
            return True
        case Sym(_):
            return False
        case Cat(a, b):
            return nullable(a) and nullable(b)
        case Alt(a, b):
            return nullable(a) or nullable(b)
        case Star(_):
            return True
        case Shuffle(a, b):
            return nullable(a) and nullable(b)
        case And(a, b):
            return nullable(a) and nullable(b)
    raise TypeError(f"not a language expression: {l!r}")


@lru_cache(maxsize=None)
def symbols(l: LangExpr) -> frozenset[MsgType]:
    match l:
        case Empty() | Eps():
            return frozenset()
        case Sym(s):
            return frozenset({s})
        case Star(a):
            return symbols(a)
        case Cat(a, b) | Alt(a, b) | Shuffle(a, b) | And(a, b):
            return symbols(a) | symbols(b)
    raise TypeError(f"not a language expression: {l!r}")


@lru_cache(maxsize=None)
def derivative(s: MsgType, l: LangExpr) -> LangExpr:
    """The language of completions: words w with s.w in the language."""
    match l:
        case Empty() | Eps():
            return EMPTY
        case Sym(t):
            return EPS if t == s else EMPTY
        case Cat(a, b):
            d = cat(derivative(s, a), b)
            if nullable(a):
                d = alt(d, derivative(s, b))
            return d
        case Alt(a, b):
            return alt(derivative(s, a), derivative(s, b))
        case Star(a):
            return cat(derivative(s, a), l)
        case Shuffle(a, b):
            return alt(shuffle(derivative(s, a), b), shuffle(a, derivative(s, b)))
        case And(a, b):
            return conj(derivative(s, a), derivative(s, b))
    raise TypeError(f"not a language expression: {l!r}")


def word_derivative(w, l: LangExpr) -> LangExpr:
    """Left fold of `derivative`, so (ww')-derivatives chain as expected."""
    acc = normalize(l)
    for s in w:
        acc = derivative(s, acc)
    return acc


def member(w, l: LangExpr) -> bool:
    return nullable(word_derivative(w, l))


def _interleavings(u: Word, v: Word):
    if not u:
        yield v
        return
    if not v:
        yield u
        return
    for rest in _interleavings(u[1:], v):
        yield (u[0],) + rest
    for rest in _interleavings(u, v[1:]):
        yield (v[0],) + rest


def _by_length(words, limit: int):
    buckets: dict[int, list[Word]] = {}
    for w in words:
        if len(w) <= limit:
            buckets.setdefault(len(w), []).append(w)
    return buckets


@lru_cache(maxsize=None)
def _words_upto(e: LangExpr, k: int) -> frozenset[Word]:
    # Bottom-up denotational evaluation of the length-bounded word set.
    # Deliberately free of derivatives and nullability: this is the
    # independent oracle the derivative engine is tested against.
    match e:
        case Empty():
            return frozenset()
        case Eps():
            return frozenset({()})
        case Sym(s):
            return frozenset({(s,)}) if k >= 1 else frozenset()
        case Alt(a, b):
            return _words_upto(a, k) | _words_upto(b, k)
        case And(a, b):
            return _words_upto(a, k) & _words_upto(b, k)
        case Cat(a, b):
            right = _by_length(_words_upto(b, k), k)
            out = set()
            for u in _words_upto(a, k):
                for j in range(k - len(u) + 1):
                    for v in right.get(j, ()):
                        out.add(u + v)
            return frozenset(out)
        case Star(a):
            pieces = [w for w in _words_upto(a, k) if w]
            out = {()}
            frontier = [()]
            while frontier:
                fresh = []
                for v in frontier:
                    for u in pieces:
                        if len(u) + len(v) <= k:
                            w = v + u
                            if w not in out:
                                out.add(w)
                                fresh.append(w)
                frontier = fresh
            return frozenset(out)
        case Shuffle(a, b):
            right = _by_length(_words_upto(b, k), k)
            out = set()
            for u in _words_upto(a, k):
                for j in range(k - len(u) + 1):
                    for v in right.get(j, ()):
                        out.update(_interleavings(u, v))
            return frozenset(out)
    raise TypeError(f"not a language expression: {e!r}")


def enumerate_words(l: LangExpr, max_len: int, alphabet=None) -> set[Word]:
    """All words of the language up to `max_len`.

    Computed by a denotational evaluator over length-bounded word sets,
    independently of the derivative engine, so the result can serve as an
    oracle for `member`, `includes` and `equiv`.  The optional alphabet is
    accepted for interface symmetry; words of a language can only use the
    symbols that occur in it.
    """
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    del alphabet
    return set(_words_upto(l, max_len))


@lru_cache(maxsize=None)
def partial_derivatives(s: MsgType, e: LangExpr) -> frozenset[LangExpr]:
    """Partial derivatives: a set of terms whose union is `derivative(s, e)`.

    Keeping the union as a set of alternation-free-at-the-top terms keeps
    state spaces small where full derivatives would aggregate exponentially
    many distinct unions.
    """
    match e:
        case Empty() | Eps():
            return frozenset()
        case Sym(t):
            return frozenset({EPS}) if t == s else frozenset()
        case Alt(a, b):
            return partial_derivatives(s, a) | partial_derivatives(s, b)
        case Cat(a, b):
            out = {cat(da, b) for da in partial_derivatives(s, a)}
            if nullable(a):
                out |= partial_derivatives(s, b)
            return frozenset(out) - {EMPTY}
        case Star(a):
            return frozenset(
                {cat(da, e) for da in partial_derivatives(s, a)}
            ) - {EMPTY}
        case Shuffle(a, b):
            out = {shuffle(da, b) for da in partial_derivatives(s, a)}
            out |= {shuffle(a, db) for db in partial_derivatives(s, b)}
            return frozenset(out) - {EMPTY}
        case And(a, b):
            return frozenset(
                conj(da, db)
                for da in partial_derivatives(s, a)
                for db in partial_derivatives(s, b)
            ) - {EMPTY}
    raise TypeError(f"not a language expression: {e!r}")


def _terms(e: LangExpr) -> frozenset[LangExpr]:
    return frozenset(_chain(Alt, e)) - {EMPTY}


def is_empty(l: LangExpr) -> bool:
    """True iff the language denotes no words.

    Decided by searching the partial-derivative closure for a nullable
    term; plain syntactic checks are not enough once intersection is in the
    mix.
    """
    stack = list(_terms(normalize(l)))
    seen: set[LangExpr] = set()
    while stack:
        t = stack.pop()
        if t in seen:
            continue
        if nullable(t):
            return False
        seen.add(t)
        for s in symbols(t):
            stack.extend(partial_derivatives(s, t))
    return True


def _state_budget(budget: int | None) -> int:
    if budget is not None:
        return budget
    env = os.environ.get(STATE_BUDGET_ENV)
    if env:
        return int(env)
    return DEFAULT_STATE_BUDGET


def includes(sub: LangExpr, sup: LangExpr, budget: int | None = None) -> bool:
    """Decide language inclusion by derivative-pair coinduction.

    States pair one partial-derivative term of the left language with the
    set of terms the right language has reached; a pair is a counterexample
    witness when the left term is nullable and no right term is.  Pairs
    whose left term literally occurs on the right hold reflexively.  The
    memoized hypothesis set is per call, so concurrent callers share
    nothing.  Raises StateBudgetExceeded when the pair closure outgrows the
    budget (default 10**5 pairs, overridable via ACTORCAP_STATE_BUDGET).
    """
    cap = _state_budget(budget)
    right0 = _terms(normalize(sup))
    seen: set[tuple[LangExpr, frozenset[LangExpr]]] = set()
    stack = [(t, right0) for t in _terms(normalize(sub))]
    while stack:
        t, rights = stack.pop()
        if t in rights or (t, rights) in seen:
            continue
        if nullable(t) and not any(nullable(r) for r in rights):
            return False
        seen.add((t, rights))
        if len(seen) > cap:
            raise StateBudgetExceeded(
                f"inclusion check exceeded {cap} derivative pairs"
            )
        for s in symbols(t):
            succ_l = partial_derivatives(s, t)
            if not succ_l:
                continue
            succ_r = frozenset().union(
                *(partial_derivatives(s, r) for r in rights)
            ) if rights else frozenset()
            for t2 in succ_l:
                stack.append((t2, succ_r))
    return True


def equiv(l1: LangExpr, l2: LangExpr, budget: int | None = None) -> bool:
    return includes(l1, l2, budget) and includes(l2, l1, budget)


# ---------------------------------------------------------------------------
# Textual syntax: 0, eps, <Name>, ".", "|", "#", "&", postfix "*", parens.
# Precedence: * > . > # > & > |.


def lang_to_text(e: LangExpr) -> str:
    return _print(e, 0)


_LEVEL = {Alt: 1, And: 2, Shuffle: 3, Cat: 4}


def _print(e: LangExpr, ctx: int) -> str:
    match e:
        case Empty():
            return "0"
        case Eps():
            return "eps"
        case Sym(s):
            return f"<{s.name}>"
        case Star(i):
            return _print(i, 5) + "*"
        case Alt(a, b):
            lvl, op = 1, "|"
        case And(a, b):
            lvl, op = 2, "&"
        case Shuffle(a, b):
            lvl, op = 3, "#"
        case Cat(a, b):
            lvl, op = 4, "."
        case _:
            raise TypeError(f"not a language expression: {e!r}")
    # Chains are right-nested in canonical form; keep them flat in print.
    body = f"{_print(a, lvl + 1)}{op}{_print(b, lvl)}"
    return f"({body})" if ctx > lvl else body


class _LangCursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def expect(self, ch: str):
        if not self.take(ch):
            raise LangParseError(f"expected {ch!r}", self.pos)


def parse_lang(text: str, alphabet=None) -> LangExpr:
    """Parse the textual language syntax.

    When `alphabet` is given, symbols outside it are rejected.
    """
    cur = _LangCursor(text)
    e = _parse_alt(cur, alphabet)
    cur.skip_ws()
    if cur.pos != len(text):
        raise LangParseError("trailing input", cur.pos)
    return e


def _parse_alt(cur, alphabet) -> LangExpr:
    e = _parse_and(cur, alphabet)
    while cur.take("|"):
        e = alt(e, _parse_and(cur, alphabet))
    return e


def _parse_and(cur, alphabet) -> LangExpr:
    e = _parse_shuffle(cur, alphabet)
    while cur.take("&"):
        e = conj(e, _parse_shuffle(cur, alphabet))
    return e


def _parse_shuffle(cur, alphabet) -> LangExpr:
    e = _parse_cat(cur, alphabet)
    while cur.take("#"):
        e = shuffle(e, _parse_cat(cur, alphabet))
    return e


def _parse_cat(cur, alphabet) -> LangExpr:
    e = _parse_post(cur, alphabet)
    while cur.take("."):
        e = cat(e, _parse_post(cur, alphabet))
    return e


def _parse_post(cur, alphabet) -> LangExpr:
    e = _parse_atom(cur, alphabet)
    while cur.take("*"):
        e = star(e)
    return e


def _parse_atom(cur, alphabet) -> LangExpr:
    ch = cur.peek()
    if ch == "0":
        cur.pos += 1
        return EMPTY
    if ch == "(":
        cur.pos += 1
        e = _parse_alt(cur, alphabet)
        cur.expect(")")
        return e
    if ch == "<":
        cur.pos += 1
        start = cur.pos
        while cur.pos < len(cur.text) and (
            cur.text[cur.pos].isalnum() or cur.text[cur.pos] == "_"
        ):
            cur.pos += 1
        name = cur.text[start : cur.pos]
        if not name:
            raise LangParseError("expected a symbol name", cur.pos)
        cur.expect(">")
        m = MsgType(name)
        if alphabet is not None and m not in alphabet:
            raise LangParseError(f"undeclared symbol <{name}>", start)
        return Sym(m)
    if cur.text.startswith("eps", cur.pos):
        after = cur.pos + 3
        if after >= len(cur.text) or not (
            cur.text[after].isalnum() or cur.text[after] == "_"
        ):
            cur.pos = after
            return EPS
    raise LangParseError("expected a language atom", cur.pos)
