"""Runtime values.

All values are immutable except the protocol tag on an actor reference,
which the monitor rewrites as sends consume it.  Tags are instrumentation
only and never influence evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lang import LangExpr, lang_to_text
from .syntax import Beh, Case, Fun


class Value:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Value):
    value: int


@dataclass(frozen=True)
class BoolV(Value):
    value: bool


@dataclass(frozen=True)
class UnitV(Value):
    pass


UNIT_V = UnitV()


@dataclass(frozen=True)
class PairV(Value):
    first: Value
    second: Value


@dataclass(frozen=True)
class Closure(Value):
    fun: Fun
    env: dict[str, Value] = field(compare=False)


@dataclass(frozen=True)
class BehValue(Value):
    annot: LangExpr
    cases: tuple[Case, ...]
    env: dict[str, Value] = field(compare=False)
    node: Beh | None = field(compare=False, default=None)

    def case_for(self, label) -> Case | None:
        for c in self.cases:
            if c.label == label:
                return c
        return None


@dataclass(eq=False)
class RefValue(Value):
    """Reference to an actor, tagged with its remaining protocol."""

    target: int
    tag: LangExpr

    def __repr__(self) -> str:
        return f"RefValue({self.target}, {lang_to_text(self.tag)})"


def copy_value(v: Value, memo: dict[int, Value]) -> Value:
    """Deep copy that clones mutable tags but shares AST nodes.

    The memo preserves aliasing: a reference reachable twice stays one
    object in the copy, so exploration branches agree with the original on
    which capabilities are distinct.
    """
    got = memo.get(id(v))
    if got is not None:
        return got
    match v:
        case Num() | BoolV() | UnitV():
            return v
        case PairV(a, b):
            out = PairV(copy_value(a, memo), copy_value(b, memo))
        case Closure(fun, env):
            out = Closure(fun, {k: copy_value(x, memo) for k, x in env.items()})
        case BehValue(annot, cases, env, node):
            out = BehValue(
                annot, cases, {k: copy_value(x, memo) for k, x in env.items()}, node
            )
        case RefValue(target, tag):
            out = RefValue(target, tag)
        case _:
            raise TypeError(f"not a value: {v!r}")
    memo[id(v)] = out
    return out


def iter_refs(roots, seen_ids: set[int] | None = None):
    """Yield each reachable RefValue once (deduplicated by identity)."""
    if seen_ids is None:
        seen_ids = set()
    stack = list(roots)
    while stack:
        v = stack.pop()
        if id(v) in seen_ids:
            continue
        seen_ids.add(id(v))
        match v:
            case RefValue():
                yield v
            case PairV(a, b):
                stack.append(a)
                stack.append(b)
            case Closure(_, env) | BehValue(_, _, env, _):
                stack.extend(env.values())
            case _:
                pass
