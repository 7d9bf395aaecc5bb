"""Deterministic actor runtime.

Actors execute one message at a time.  Local evaluation of a handler is
big-step, call-by-value, left-to-right and bounded by a step budget, so a
diverging handler is observable rather than a hang.  Delivery pops the head
of one per-sender-per-receiver queue; outgoing messages are appended to the
global queues per destination in send order, so message order between any
pair of actors is preserved while deliveries from different senders may
interleave arbitrarily.

A run with a fixed seed is a pure function of the initial configuration:
the scheduler draws uniformly among enabled deliveries from a seeded PRNG,
and traces replay byte for byte.  `explore` enumerates every delivery order
up to a depth bound instead, classifying each schedule's outcome.

Stuckness is a first-class outcome: a delivery whose head message has no
matching case in the target's installed behaviour reports
Stuck(UnhandledMessage), the defect the checker rules out statically.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from . import monitor as mon
from . import lang as lng
from .lang import EPS, LangExpr, MsgType, UNIT_MSG, lang_to_text
from .syntax import (
    ActorRefT,
    App,
    Beh,
    BinOp,
    BoolLit,
    Expr,
    Fun,
    If,
    Let,
    NatLit,
    Not,
    Pair,
    Path,
    ProdT,
    Program,
    SelfCap,
    Send,
    Spawn,
    Split,
    UnitLit,
    Var,
    free_vars,
)
from .values import (
    BehValue,
    BoolV,
    Closure,
    Num,
    PairV,
    RefValue,
    UNIT_V,
    Value,
    copy_value,
)

DEFAULT_LOCAL_STEPS = 100_000
DEFAULT_MAX_DELIVERIES = 1_000
DEFAULT_EXPLORE_DEPTH = 8
DEFAULT_SCHEDULE_CAP = 1_000_000


class BudgetExhausted(Exception):
    """A handler ran past its local step budget (models divergence)."""


class DynamicTypeError(Exception):
    """A runtime shape error; only reachable when checking was bypassed."""


class RootEvaluationDiverged(Exception):
    """The root expression did not settle into a behaviour within budget."""


class ScheduleBudgetExceeded(Exception):
    """Exploration would enumerate more schedules than the configured cap."""


# ---------------------------------------------------------------------------
# Traces


@dataclass
class TraceEvent:
    step: int
    kind: str  # deliver | send | spawn | selfcap | violation
    src: int | None = None
    dst: int | None = None
    msg: str | None = None
    lang: str | None = None
    violation: str | None = None
    detail: str | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "step": self.step,
            "kind": self.kind,
            "src": self.src,
            "dst": self.dst,
            "msg": self.msg,
            "lang": self.lang,
        }
        if self.kind == "violation":
            obj["violation"] = self.violation
            obj["detail"] = self.detail
        return obj

    def to_text(self) -> str:
        parts = [f"[{self.step}] {self.kind}"]
        if self.src is not None or self.dst is not None:
            parts.append(f"{self.src}->{self.dst}")
        if self.msg is not None:
            parts.append(f"<{self.msg}>")
        if self.lang is not None:
            parts.append(f"lang={self.lang}")
        if self.violation is not None:
            parts.append(f"{self.violation}: {self.detail}")
        return " ".join(parts)


@dataclass
class Trace:
    seed: int | None = None
    events: list[TraceEvent] = field(default_factory=list)
    outcome: str | None = None

    def emit(self, kind: str, **kw) -> TraceEvent:
        ev = TraceEvent(step=len(self.events), kind=kind, **kw)
        self.events.append(ev)
        return ev

    def violations(self) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == "violation"]

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(e.to_json_obj(), separators=(",", ":")) for e in self.events
        ]
        lines.append(json.dumps({"outcome": self.outcome}, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [e.to_text() for e in self.events]
        lines.append(f"outcome: {self.outcome}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Stuck:
    kind: str  # UnhandledMessage | HandlerDiverged | NonBehaviourResult | DynamicTypeError
    detail: str = ""


# ---------------------------------------------------------------------------
# Configurations


@dataclass
class Config:
    store: dict[int, BehValue] = field(default_factory=dict)
    queues: dict[tuple[int, int], list[tuple[Value, MsgType]]] = field(
        default_factory=dict
    )
    next_id: int = 0
    step_count: int = 0

    def copy(self) -> "Config":
        memo: dict[int, Value] = {}
        store = {a: copy_value(b, memo) for a, b in self.store.items()}
        queues = {
            k: [(copy_value(v, memo), m) for v, m in q]
            for k, q in self.queues.items()
        }
        return Config(store, queues, self.next_id, self.step_count)


# ---------------------------------------------------------------------------
# Local evaluation


class _Eval:
    """One actor's turn: big-step evaluation with instrumentation."""

    def __init__(self, config: Config, self_id: int, trace: Trace,
                 monitor: bool, budget: int):
        self.config = config
        self.self_id = self_id
        self.trace = trace
        self.monitor = monitor
        self.budget = budget
        self.steps = 0
        self.outq: list[tuple[Value, MsgType, int]] = []
        self.spawned: dict[int, BehValue] = {}
        self.observed: LangExpr = EPS

    def _violation(self, v: mon.Violation, actor: int | None = None):
        self.trace.emit(
            "violation",
            src=self.self_id,
            dst=actor if actor is not None else v.actor,
            violation=v.kind,
            detail=v.detail,
        )

    def _capture(self, env: dict[str, Value], names) -> dict[str, Value]:
        return {k: env[k] for k in sorted(names) if k in env}

    def _path_value(self, env: dict[str, Value], path: Path) -> Value:
        try:
            v = env[path.base]
        except KeyError:
            raise DynamicTypeError(f"unbound variable {path.base!r}") from None
        for sel in path.sels:
            if not isinstance(v, PairV):
                raise DynamicTypeError(f"path {path} selects into a non-pair")
            v = v.first if sel == 1 else v.second
        return v

    def _split_value(self, v: Value, t1, t2) -> tuple[Value, Value]:
        if isinstance(v, RefValue):
            l1 = t1.lang if isinstance(t1, ActorRefT) else v.tag
            l2 = t2.lang if isinstance(t2, ActorRefT) else v.tag
            if self.monitor:
                res = mon.split_tag(v.tag, l1, l2)
                if isinstance(res, mon.Violation):
                    self._violation(res, actor=v.target)
            return RefValue(v.target, l1), RefValue(v.target, l2)
        if isinstance(v, PairV) and isinstance(t1, ProdT) and isinstance(t2, ProdT):
            a1, a2 = self._split_value(v.first, t1.first, t2.first)
            b1, b2 = self._split_value(v.second, t1.second, t2.second)
            return PairV(a1, b1), PairV(a2, b2)
        return v, v

    def eval(self, env: dict[str, Value], e: Expr) -> Value:
        self.steps += 1
        if self.steps > self.budget:
            raise BudgetExhausted(f"step budget of {self.budget} exhausted")
        match e:
            case NatLit(v):
                return Num(v)
            case BoolLit(v):
                return BoolV(v)
            case UnitLit():
                return UNIT_V
            case Var(path):
                return self._path_value(env, path)
            case Pair(a, b):
                return PairV(self.eval(env, a), self.eval(env, b))
            case Not(x):
                v = self.eval(env, x)
                if not isinstance(v, BoolV):
                    raise DynamicTypeError("! applied to a non-boolean")
                return BoolV(not v.value)
            case BinOp(op, a, b):
                return self._binop(op, self.eval(env, a), self.eval(env, b))
            case If(c, t, f):
                cv = self.eval(env, c)
                if not isinstance(cv, BoolV):
                    raise DynamicTypeError("if condition is not a boolean")
                return self.eval(env, t if cv.value else f)
            case Fun():
                captured = self._capture(
                    env, free_vars(e.body) - {e.self_name, e.param}
                )
                return Closure(e, captured)
            case App(f, a):
                fv = self.eval(env, f)
                if not isinstance(fv, Closure):
                    raise DynamicTypeError("application of a non-function")
                av = self.eval(env, a)
                call_env = dict(fv.env)
                call_env[fv.fun.self_name] = fv
                call_env[fv.fun.param] = av
                return self.eval(call_env, fv.fun.body)
            case SelfCap(l):
                self.observed = lng.shuffle(self.observed, l)
                self.trace.emit(
                    "selfcap", src=self.self_id, dst=self.self_id,
                    lang=lang_to_text(l),
                )
                return RefValue(self.self_id, l)
            case Beh():
                return BehValue(
                    e.annot, e.cases, self._capture(env, free_vars(e)), e
                )
            case Spawn(init, inner):
                bv = self.eval(env, inner)
                if not isinstance(bv, BehValue):
                    raise DynamicTypeError("spawn of a non-behaviour")
                child = self.config.next_id
                self.config.next_id += 1
                self.spawned[child] = bv
                tag = init if init is not None else bv.annot
                self.trace.emit(
                    "spawn", src=self.self_id, dst=child, lang=lang_to_text(tag)
                )
                return RefValue(child, tag)
            case Send(msg, target, payload):
                tv = self._path_value(env, target)
                if not isinstance(tv, RefValue):
                    raise DynamicTypeError(f"send target {target} is not a reference")
                pv = self.eval(env, payload)
                if self.monitor:
                    res = mon.check_send_tag(tv.tag, msg)
                    if isinstance(res, mon.Violation):
                        self._violation(res, actor=tv.target)
                    # The tag always tracks the derivative, so after k sends
                    # it equals the word derivative of the birth tag.
                    tv.tag = lng.derivative(msg, tv.tag)
                self.outq.append((pv, msg, tv.target))
                self.trace.emit(
                    "send", src=self.self_id, dst=tv.target, msg=msg.name
                )
                return UNIT_V
            case Split(path, n1, t1, n2, t2, body):
                v = self._path_value(env, path)
                v1, v2 = self._split_value(v, t1, t2)
                inner_env = dict(env)
                inner_env[n1] = v1
                inner_env[n2] = v2
                return self.eval(inner_env, body)
            case Let(name, value, body):
                bound = self.eval(env, value)
                inner_env = dict(env)
                inner_env[name] = bound
                return self.eval(inner_env, body)
        raise DynamicTypeError(f"unhandled expression form {type(e).__name__}")

    def _binop(self, op: str, a: Value, b: Value) -> Value:
        if op in ("&&", "||"):
            if not (isinstance(a, BoolV) and isinstance(b, BoolV)):
                raise DynamicTypeError(f"{op} applied to non-booleans")
            if op == "&&":
                return BoolV(a.value and b.value)
            return BoolV(a.value or b.value)
        if not (isinstance(a, Num) and isinstance(b, Num)):
            raise DynamicTypeError(f"{op} applied to non-numbers")
        x, y = a.value, b.value
        if op == "+":
            return Num(x + y)
        if op == "-":
            return Num(max(0, x - y))  # naturals: truncated subtraction
        if op == "*":
            return Num(x * y)
        if op == "/":
            return Num(x // y if y else 0)  # total: n/0 = 0
        raise DynamicTypeError(f"unknown operator {op}")


def local_eval(
    self_id: int,
    bindings: dict[str, Value],
    e: Expr,
    budget: int = DEFAULT_LOCAL_STEPS,
    *,
    config: Config | None = None,
    monitor: bool = True,
    trace: Trace | None = None,
):
    """Evaluate one expression as actor `self_id`.

    Returns (value, out-queue, spawned actors, observed effect).  The
    observed effect is the shuffle of the self-capability annotations
    evaluated, in order.
    """
    config = config if config is not None else Config(next_id=self_id + 1)
    trace = trace if trace is not None else Trace()
    ev = _Eval(config, self_id, trace, monitor, budget)
    value = ev.eval(dict(bindings), e)
    return value, ev.outq, ev.spawned, ev.observed


# ---------------------------------------------------------------------------
# Global stepping


def init_config(
    program: Program,
    *,
    typed=None,
    monitor: bool = True,
    trace: Trace | None = None,
    local_budget: int = DEFAULT_LOCAL_STEPS,
) -> Config:
    """Evaluate the root expression as actor 0 and seed the unit message."""
    trace = trace if trace is not None else Trace()
    config = Config(next_id=1)
    trace.emit("send", src=0, dst=0, msg=UNIT_MSG.name)
    config.queues[(0, 0)] = [(UNIT_V, UNIT_MSG)]
    ev = _Eval(config, 0, trace, monitor, local_budget)
    try:
        root_val = ev.eval({}, program.root)
    except BudgetExhausted as ex:
        raise RootEvaluationDiverged(str(ex)) from None
    if not isinstance(root_val, BehValue):
        raise DynamicTypeError("root expression did not evaluate to a behaviour")
    config.store[0] = root_val
    config.store.update(ev.spawned)
    for value, m, target in ev.outq:
        config.queues.setdefault((0, target), []).append((value, m))
    if monitor:
        if typed is not None:
            static_eff = typed.info[id(program.root)].effect
            viol = mon.effect_conformance(static_eff, ev.observed)
            if viol is not None:
                trace.emit(
                    "violation", src=0, dst=0,
                    violation=viol.kind, detail=viol.detail,
                )
        for viol in mon.global_invariant(config):
            trace.emit(
                "violation", src=None, dst=viol.actor,
                violation=viol.kind, detail=viol.detail,
            )
    return config


def enabled_deliveries(config: Config) -> list[tuple[int, int, MsgType]]:
    """Nonempty queues with their head message, in (receiver, sender) order.

    Heads without a matching case are included, so stuckness is observable.
    """
    out = [
        (src, dst, q[0][1])
        for (src, dst), q in config.queues.items()
        if q
    ]
    out.sort(key=lambda t: (t[1], t[0]))
    return out


def deliver(
    config: Config,
    choice: tuple[int, int],
    *,
    typed=None,
    monitor: bool = True,
    trace: Trace | None = None,
    local_budget: int = DEFAULT_LOCAL_STEPS,
) -> Config | Stuck:
    """Deliver the head message of the chosen queue, in place.

    Runs the matching handler to a new behaviour, installs it, merges
    spawned actors and appends the turn's outgoing messages per destination.
    Returns the (mutated) config, or a Stuck outcome that leaves the config
    unchanged beyond the popped message.
    """
    trace = trace if trace is not None else Trace()
    src, dst = choice
    q = config.queues.get((src, dst))
    if not q:
        raise ValueError(f"no pending message on queue {choice}")
    payload, msg = q.pop(0)
    if not q:
        del config.queues[(src, dst)]
    behv = config.store[dst]
    trace.emit("deliver", src=src, dst=dst, msg=msg.name)
    case = behv.case_for(msg)
    if case is None:
        return Stuck(
            "UnhandledMessage",
            f"actor {dst} has no case for <{msg.name}>",
        )
    pre_existing = set(config.store.keys())
    pre = mon.summarize(list(behv.env.values()) + [payload]) if monitor else None

    env = dict(behv.env)
    env[case.binder] = payload
    ev = _Eval(config, dst, trace, monitor, local_budget)
    try:
        result = ev.eval(env, case.body)
    except BudgetExhausted:
        return Stuck("HandlerDiverged", f"actor {dst} exceeded {local_budget} steps")
    except DynamicTypeError as ex:
        return Stuck("DynamicTypeError", str(ex))
    if not isinstance(result, BehValue):
        return Stuck("NonBehaviourResult", f"actor {dst} returned a non-behaviour")

    config.store[dst] = result
    config.store.update(ev.spawned)
    for value, m, target in ev.outq:
        config.queues.setdefault((dst, target), []).append((value, m))
    config.step_count += 1

    if monitor:
        if typed is not None and behv.node is not None:
            static_eff = typed.static_case_effect(behv.node, msg)
            if static_eff is not None:
                viol = mon.effect_conformance(static_eff, ev.observed)
                if viol is not None:
                    trace.emit(
                        "violation", src=dst, dst=dst,
                        violation=viol.kind, detail=viol.detail,
                    )
        post_roots: list[Value] = list(result.env.values())
        for child in ev.spawned.values():
            post_roots.extend(child.env.values())
        post = mon.summarize(post_roots)
        transferred = mon.summarize([value for value, _, _ in ev.outq])
        sent: dict[int, list[MsgType]] = {}
        for _, m, target in ev.outq:
            sent.setdefault(target, []).append(m)
        for viol in mon.conservation(
            dst, pre, sent, ev.observed, post, transferred, pre_existing
        ):
            trace.emit(
                "violation", src=dst, dst=viol.actor,
                violation=viol.kind, detail=viol.detail,
            )
        for viol in mon.global_invariant(config):
            trace.emit(
                "violation", src=None, dst=viol.actor,
                violation=viol.kind, detail=viol.detail,
            )
    return config


def run(
    config: Config,
    *,
    typed=None,
    seed: int = 0,
    max_deliveries: int = DEFAULT_MAX_DELIVERIES,
    monitor: bool = True,
    strict: bool = False,
    trace: Trace | None = None,
    local_budget: int = DEFAULT_LOCAL_STEPS,
) -> tuple[Trace, str]:
    """Drive deliveries with a seeded scheduler until rest, stuckness or budget.

    Identical (config, seed, budget) inputs produce identical traces.  The
    config is consumed (mutated).  With `strict`, the first violation halts
    the run.
    """
    trace = trace if trace is not None else Trace(seed=seed)
    rng = random.Random(seed)
    outcome = "budget"
    for _ in range(max_deliveries):
        if strict and trace.violations():
            outcome = f"violation:{trace.violations()[0].violation}"
            break
        enabled = enabled_deliveries(config)
        if not enabled:
            outcome = "quiescent"
            break
        src, dst, _ = enabled[rng.randrange(len(enabled))]
        res = deliver(
            config, (src, dst), typed=typed, monitor=monitor,
            trace=trace, local_budget=local_budget,
        )
        if isinstance(res, Stuck):
            outcome = f"stuck:{res.kind}"
            break
    else:
        if strict and trace.violations():
            outcome = f"violation:{trace.violations()[0].violation}"
    if outcome == "budget":
        enabled = enabled_deliveries(config)
        if not enabled:
            outcome = "quiescent"
    trace.outcome = outcome
    return trace, outcome


@dataclass
class ExplorationReport:
    outcomes: dict[str, int] = field(default_factory=dict)
    witnesses: dict[str, Trace] = field(default_factory=dict)
    schedules: int = 0
    violation_kinds: set[str] = field(default_factory=set)
    violation_witness: Trace | None = None

    @property
    def any_stuck(self) -> bool:
        return any(k.startswith("stuck:") for k in self.outcomes)

    @property
    def any_violation(self) -> bool:
        return bool(self.violation_kinds)


def explore(
    config: Config,
    *,
    typed=None,
    max_depth: int = DEFAULT_EXPLORE_DEPTH,
    monitor: bool = True,
    local_budget: int = DEFAULT_LOCAL_STEPS,
    schedule_cap: int = DEFAULT_SCHEDULE_CAP,
    base_trace: Trace | None = None,
) -> ExplorationReport:
    """Depth-first enumeration of every delivery order up to `max_depth`.

    Branches run on independent config copies (monitor tags included), so
    outcome classes merge associatively and the report is order-independent.
    One witness trace is kept per outcome class.
    """
    report = ExplorationReport()
    base_events = list(base_trace.events) if base_trace is not None else []

    def record(label: str, events: list[TraceEvent]):
        report.schedules += 1
        if report.schedules > schedule_cap:
            raise ScheduleBudgetExceeded(
                f"more than {schedule_cap} schedules at depth {max_depth}"
            )
        report.outcomes[label] = report.outcomes.get(label, 0) + 1
        witness = Trace(events=events, outcome=label)
        if label not in report.witnesses:
            report.witnesses[label] = witness
        viol_kinds = {e.violation for e in events if e.kind == "violation"}
        if viol_kinds:
            report.violation_kinds.update(viol_kinds)
            if report.violation_witness is None:
                report.violation_witness = witness

    def go(cfg: Config, events: list[TraceEvent], depth: int):
        enabled = enabled_deliveries(cfg)
        if not enabled:
            record("quiescent", events)
            return
        if depth >= max_depth:
            record("depth", events)
            return
        for src, dst, _ in enabled:
            branch = cfg.copy()
            tr = Trace(events=list(events))
            res = deliver(
                branch, (src, dst), typed=typed, monitor=monitor,
                trace=tr, local_budget=local_budget,
            )
            if isinstance(res, Stuck):
                record(f"stuck:{res.kind}", tr.events)
            else:
                go(branch, tr.events, depth + 1)

    go(config, base_events, 0)
    return report
