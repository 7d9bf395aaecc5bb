"""Dynamic capability monitoring.

Every actor reference carries a protocol tag.  The monitor checks three
disciplines on concrete executions, mirroring what the checker guarantees
statically:

* per-send permission: a send must be the derivative of the reference's
  remaining tag, which then shrinks accordingly;
* per-turn conservation: the capabilities an actor holds toward a target,
  after a handler turn, shuffled with those it transferred inside outgoing
  messages, must equal the derivative of what it held before the turn by
  the messages it sent there (plus, toward itself, the self-capabilities it
  created during the turn);
* global consistency between turns: for every actor, the shuffle of all
  live tags targeting it must stay within what its installed behaviour
  still promises after any delivery order of the in-flight messages that
  respects per-sender queue order.

Violations never affect execution; they are reported as trace events.
Checked programs raise none of them, and programs run with checking
disabled typically trip one before (or instead of) getting stuck.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import lang as lng
from .lang import EPS, LangExpr, MsgType, lang_to_text
from .values import Value, iter_refs


SEND_NOT_PERMITTED = "SendNotPermitted"
GLOBAL_INVARIANT_BROKEN = "GlobalInvariantBroken"
EFFECT_EXCEEDED = "EffectExceeded"


@dataclass(frozen=True)
class Violation:
    kind: str
    actor: int | None
    detail: str

    def __str__(self) -> str:
        where = f" actor={self.actor}" if self.actor is not None else ""
        return f"{self.kind}{where}: {self.detail}"


@dataclass
class CapSummary:
    """Live capability tags grouped by target actor.

    One entry per live tag; the combined permission toward a target is the
    shuffle of its entries (capabilities held by different parties may be
    used in any interleaving).
    """

    entries: dict[int, list[LangExpr]] = field(default_factory=dict)

    def add(self, target: int, tag: LangExpr):
        self.entries.setdefault(target, []).append(tag)

    def combined(self, target: int) -> LangExpr:
        acc: LangExpr = EPS
        for tag in self.entries.get(target, ()):
            acc = lng.shuffle(acc, tag)
        return acc

    def targets(self):
        return self.entries.keys()


def summarize(roots, seen_ids: set[int] | None = None) -> CapSummary:
    """Walk values and collect every live tag, one entry per reference."""
    summary = CapSummary()
    for ref in iter_refs(roots, seen_ids):
        summary.add(ref.target, ref.tag)
    return summary


def check_send_tag(tag: LangExpr, msg: MsgType) -> LangExpr | Violation:
    """Residual tag after sending `msg`, or a violation if not permitted."""
    residual = lng.derivative(msg, tag)
    if lng.is_empty(residual):
        return Violation(
            SEND_NOT_PERMITTED,
            None,
            f"tag {lang_to_text(tag)} does not permit sending <{msg.name}>",
        )
    return residual


def split_tag(
    tag: LangExpr, l1: LangExpr, l2: LangExpr
) -> tuple[LangExpr, LangExpr] | Violation:
    """Divide a tag in two; the halves may not jointly exceed the whole."""
    combined = lng.shuffle(l1, l2)
    if not lng.includes(combined, tag):
        return Violation(
            GLOBAL_INVARIANT_BROKEN,
            None,
            f"split {lang_to_text(l1)} / {lang_to_text(l2)} escapes tag "
            f"{lang_to_text(tag)}",
        )
    return l1, l2


def effect_conformance(
    handler_static_effect: LangExpr, observed: LangExpr
) -> Violation | None:
    """Observed self-capability creation must be covered by the static effect."""
    if lng.includes(observed, handler_static_effect):
        return None
    return Violation(
        EFFECT_EXCEEDED,
        None,
        f"observed effect {lang_to_text(observed)} exceeds static effect "
        f"{lang_to_text(handler_static_effect)}",
    )


def fifo_merges(seqs: list[tuple[MsgType, ...]], cap: int = 20_000):
    """All interleavings of the per-sender sequences, preserving each order."""
    seqs = [s for s in seqs if s]
    out: list[tuple[MsgType, ...]] = []

    def go(prefix: list[MsgType], rest: list[tuple[MsgType, ...]]):
        if len(out) > cap:
            raise lng.StateBudgetExceeded(
                f"too many queue interleavings (> {cap})"
            )
        if not any(rest):
            out.append(tuple(prefix))
            return
        for i, s in enumerate(rest):
            if s:
                prefix.append(s[0])
                go(prefix, rest[:i] + [s[1:]] + rest[i + 1 :])
                prefix.pop()

    go([], seqs)
    return out


def global_invariant(config) -> list[Violation]:
    """Check global consistency at a quiescent point (between deliveries).

    For every actor, every FIFO-consistent interleaving of the messages in
    flight to it must leave a residual of its behaviour's protocol that
    covers the shuffle of all live tags targeting it.
    """
    roots: list[Value] = []
    for behv in config.store.values():
        roots.extend(behv.env.values())
    for q in config.queues.values():
        roots.extend(v for v, _ in q)
    summary = summarize(roots)

    violations: list[Violation] = []
    for actor, behv in sorted(config.store.items()):
        # An installed behaviour must have a case for every message its
        # annotation admits first, or a permitted send arrives unhandled.
        for s in sorted(lng.symbols(behv.annot)):
            if behv.case_for(s) is None and not lng.is_empty(
                lng.derivative(s, behv.annot)
            ):
                violations.append(
                    Violation(
                        GLOBAL_INVARIANT_BROKEN,
                        actor,
                        f"installed behaviour promises "
                        f"{lang_to_text(behv.annot)} but has no case for "
                        f"<{s.name}>",
                    )
                )
                break
        combined = summary.combined(actor)
        inbound = [
            tuple(m for _, m in q)
            for (_, dst), q in sorted(config.queues.items())
            if dst == actor and q
        ]
        for w in fifo_merges(inbound):
            residual = lng.word_derivative(w, behv.annot)
            if not lng.includes(combined, residual):
                word = "".join(m.name for m in w) or "eps"
                violations.append(
                    Violation(
                        GLOBAL_INVARIANT_BROKEN,
                        actor,
                        f"live tags {lang_to_text(combined)} escape "
                        f"{lang_to_text(residual)} (behaviour "
                        f"{lang_to_text(behv.annot)} after in-flight "
                        f"{word!r})",
                    )
                )
                break  # at most one report per actor per check
    return violations


def conservation(
    acting: int,
    pre: CapSummary,
    sent: dict[int, list[MsgType]],
    observed: LangExpr,
    post: CapSummary,
    transferred: CapSummary,
    pre_existing: set[int],
) -> list[Violation]:
    """Per-turn capability conservation.

    Only actors that existed before the turn participate: capabilities to a
    freshly spawned actor are created from nothing by the spawn itself.
    """
    targets = (
        set(pre.targets())
        | set(post.targets())
        | set(transferred.targets())
        | set(sent.keys())
        | {acting}  # its observed effect counts even with no tags anywhere
    ) & pre_existing
    violations: list[Violation] = []
    for target in sorted(targets):
        left = lng.shuffle(post.combined(target), transferred.combined(target))
        right = lng.word_derivative(sent.get(target, ()), pre.combined(target))
        if target == acting:
            right = lng.shuffle(right, observed)
        if not lng.equiv(left, right):
            violations.append(
                Violation(
                    GLOBAL_INVARIANT_BROKEN,
                    target,
                    "capability conservation failed: retained "
                    f"{lang_to_text(post.combined(target))} with transferred "
                    f"{lang_to_text(transferred.combined(target))} differs "
                    f"from expected {lang_to_text(right)}",
                )
            )
    return violations
