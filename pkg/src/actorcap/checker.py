"""Flow-sensitive type-and-effect checking.

Judgments thread a value-semantic environment through every expression:
checking returns the expression's type, the environment after it runs, and
its effect (a language over-approximating the self-capabilities it
creates).  Sequentially evaluated subexpressions have their effects shuffled
together; the two arms of a conditional are joined with union, and their
output environments are intersected.

Sending through a reference replaces its protocol with the derivative by the
sent message type.  Duplicating a reference requires an explicit `split`
whose two annotations must shuffle back inside the original protocol, so the
combined use of both halves, in any interleaving, stays within what the
target actor promised to handle.

Variable use is consuming: each binding justifies one use, and `split` is
how a value legitimately becomes two.  Leftover bindings at scope exit are
discarded silently (affine weakening); pass `warn_dropped` to surface them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import lang as lng
from .lang import EPS, LangExpr, MsgType, UNIT_MSG, lang_to_text
from .syntax import (
    ActorRefT,
    App,
    Beh,
    BehT,
    BinOp,
    BOOL,
    BoolLit,
    BoolT,
    Case,
    Expr,
    Fun,
    FunT,
    If,
    Let,
    Loc,
    NAT,
    NatLit,
    NatT,
    Not,
    Pair,
    Path,
    ProdT,
    Program,
    SelfCap,
    Send,
    Spawn,
    Split,
    TypeExpr,
    UNIT,
    UnitLit,
    UnitT,
    Var,
    free_vars,
    type_to_text,
)


class ErrorCode(enum.Enum):
    UnboundVariable = "UnboundVariable"
    TypeMismatch = "TypeMismatch"
    SplitNotJustified = "SplitNotJustified"
    EmptyResidual = "EmptyResidual"
    NonSplittableCapture = "NonSplittableCapture"
    BehaviourConformance = "BehaviourConformance"
    DuplicateCaseLabel = "DuplicateCaseLabel"
    SpawnCapabilityTooLarge = "SpawnCapabilityTooLarge"
    RootMissingUnitCase = "RootMissingUnitCase"
    JoinFailure = "JoinFailure"


class TypeCheckError(Exception):
    def __init__(
        self,
        code: ErrorCode,
        loc: Loc,
        detail: str,
        required_language: LangExpr | None = None,
        declared_language: LangExpr | None = None,
    ):
        self.code = code
        self.loc = loc
        self.detail = detail
        self.required_language = required_language
        self.declared_language = declared_language
        super().__init__(self.render())

    def render(self) -> str:
        msg = f"{self.code.value} @ {self.loc} - {self.detail}"
        if self.required_language is not None and self.declared_language is not None:
            msg += (
                f" [required: {lang_to_text(self.required_language)}"
                f" vs declared: {lang_to_text(self.declared_language)}]"
            )
        return msg

    def to_json_obj(self) -> dict:
        obj = {
            "code": self.code.value,
            "span": {"line": self.loc.line, "col": self.loc.col},
            "detail": self.detail,
        }
        if self.required_language is not None:
            obj["required_language"] = lang_to_text(self.required_language)
        if self.declared_language is not None:
            obj["declared_language"] = lang_to_text(self.declared_language)
        return obj


class TypeEnv:
    """Map from variable names to types with value semantics.

    Every operation returns a fresh environment; judgments never mutate the
    environment they were given.
    """

    __slots__ = ("_map",)

    def __init__(self, bindings=None):
        self._map: dict[str, TypeExpr] = dict(bindings) if bindings else {}

    @staticmethod
    def empty() -> "TypeEnv":
        return TypeEnv()

    def lookup(self, name: str) -> TypeExpr | None:
        return self._map.get(name)

    def bind(self, name: str, t: TypeExpr) -> "TypeEnv":
        out = TypeEnv(self._map)
        out._map[name] = t
        return out

    def remove(self, name: str) -> "TypeEnv":
        out = TypeEnv(self._map)
        out._map.pop(name, None)
        return out

    def names(self):
        return self._map.keys()

    def items(self):
        return self._map.items()

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other) -> bool:
        return isinstance(other, TypeEnv) and self._map == other._map

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {type_to_text(v)}" for k, v in self._map.items())
        return "{" + inner + "}"


@dataclass(frozen=True)
class DroppedBinding:
    loc: Loc
    name: str
    type_text: str


@dataclass
class NodeInfo:
    type: TypeExpr
    env_out: TypeEnv
    effect: LangExpr


@dataclass
class TypedProgram:
    """A checked program plus the facts the runtime monitor needs."""

    program: Program
    root_type: TypeExpr
    info: dict[int, NodeInfo] = field(default_factory=dict)
    case_effects: dict[int, dict[MsgType, LangExpr]] = field(default_factory=dict)
    warnings: list[DroppedBinding] = field(default_factory=list)

    def static_case_effect(self, beh_node: Beh, label: MsgType) -> LangExpr | None:
        table = self.case_effects.get(id(beh_node))
        if table is None:
            return None
        return table.get(label)


def types_equal(t1: TypeExpr, t2: TypeExpr) -> bool:
    """Structural equality with embedded languages compared by equivalence."""
    match (t1, t2):
        case (BoolT(), BoolT()) | (NatT(), NatT()) | (UnitT(), UnitT()):
            return True
        case (ProdT(a1, b1), ProdT(a2, b2)):
            return types_equal(a1, a2) and types_equal(b1, b2)
        case (FunT(p1, l1, r1), FunT(p2, l2, r2)):
            return (
                types_equal(p1, p2)
                and lng.equiv(l1, l2)
                and types_equal(r1, r2)
            )
        case (ActorRefT(l1), ActorRefT(l2)) | (BehT(l1), BehT(l2)):
            return lng.equiv(l1, l2)
    return False


def self_splittable(t: TypeExpr) -> bool:
    """Whether a value of this type may be duplicated without change."""
    match t:
        case BoolT() | NatT() | UnitT() | FunT():
            return True
        case ProdT(a, b):
            return self_splittable(a) and self_splittable(b)
        case ActorRefT(l):
            return lng.includes(lng.shuffle(l, l), l)
        case BehT(_):
            return False
    return False


def split_judgment(t: TypeExpr, t1: TypeExpr, t2: TypeExpr, loc: Loc) -> None:
    """Check t < t1 * t2: the two halves may not jointly exceed the whole."""
    match t:
        case ActorRefT(l):
            if not (isinstance(t1, ActorRefT) and isinstance(t2, ActorRefT)):
                raise TypeCheckError(
                    ErrorCode.TypeMismatch, loc,
                    f"cannot split {type_to_text(t)} into "
                    f"{type_to_text(t1)} and {type_to_text(t2)}",
                )
            combined = lng.shuffle(t1.lang, t2.lang)
            if not lng.includes(combined, l):
                raise TypeCheckError(
                    ErrorCode.SplitNotJustified, loc,
                    "the shuffle of the two halves escapes the original protocol",
                    required_language=combined,
                    declared_language=l,
                )
            return
        case BoolT() | NatT() | UnitT() | FunT():
            if types_equal(t, t1) and types_equal(t, t2):
                return
            raise TypeCheckError(
                ErrorCode.SplitNotJustified, loc,
                f"{type_to_text(t)} splits only into two copies of itself",
            )
        case ProdT(a, b):
            if not (isinstance(t1, ProdT) and isinstance(t2, ProdT)):
                raise TypeCheckError(
                    ErrorCode.TypeMismatch, loc,
                    f"cannot split {type_to_text(t)} into non-product types",
                )
            split_judgment(a, t1.first, t2.first, loc)
            split_judgment(b, t1.second, t2.second, loc)
            return
        case BehT(_):
            raise TypeCheckError(
                ErrorCode.SplitNotJustified, loc, "behaviours are not splittable"
            )
    raise TypeCheckError(
        ErrorCode.TypeMismatch, loc, f"unsplittable type {type_to_text(t)}"
    )


def env_join(env_t: TypeEnv, env_f: TypeEnv, loc: Loc = None) -> TypeEnv:
    """Join the two branch environments of a conditional.

    Bindings present on only one side are dropped.  Reference bindings join
    at the intersection of their protocols; anything else must agree up to
    language equivalence.
    """
    loc = loc or Loc(0, 0)
    out = TypeEnv.empty()
    for name, ta in env_t.items():
        tb = env_f.lookup(name)
        if tb is None:
            continue
        if isinstance(ta, ActorRefT) and isinstance(tb, ActorRefT):
            out = out.bind(name, ActorRefT(lng.conj(ta.lang, tb.lang)))
        elif types_equal(ta, tb):
            out = out.bind(name, ta)
        else:
            raise TypeCheckError(
                ErrorCode.JoinFailure, loc,
                f"variable {name!r} has incompatible types after the branches: "
                f"{type_to_text(ta)} vs {type_to_text(tb)}",
            )
    return out


class Checker:
    def __init__(self, program: Program, warn_dropped: bool = False):
        self.program = program
        self.typed = TypedProgram(program, UNIT)
        self.warn_dropped = warn_dropped

    # -- paths

    def _lookup_path(self, env: TypeEnv, path: Path, loc: Loc) -> TypeExpr:
        t = env.lookup(path.base)
        if t is None:
            raise TypeCheckError(
                ErrorCode.UnboundVariable, loc, f"unbound variable {path.base!r}"
            )
        for sel in path.sels:
            if not isinstance(t, ProdT):
                raise TypeCheckError(
                    ErrorCode.TypeMismatch, loc,
                    f"path {path} selects into non-product {type_to_text(t)}",
                )
            t = t.first if sel == 1 else t.second
        return t

    def apply_send_path(
        self, env: TypeEnv, path: Path, msg: MsgType, loc: Loc = None
    ) -> tuple[LangExpr, TypeEnv]:
        """Consume one permitted send of `msg` through the reference at `path`.

        The reference's protocol is replaced, in place in the environment,
        by its derivative; an empty derivative means the protocol does not
        allow sending `msg` now.
        """
        loc = loc or Loc(0, 0)
        base = env.lookup(path.base)
        if base is None:
            raise TypeCheckError(
                ErrorCode.UnboundVariable, loc, f"unbound variable {path.base!r}"
            )

        def update(t: TypeExpr, sels: tuple[int, ...]) -> tuple[TypeExpr, LangExpr]:
            if not sels:
                if not isinstance(t, ActorRefT):
                    raise TypeCheckError(
                        ErrorCode.TypeMismatch, loc,
                        f"send target {path} is {type_to_text(t)}, "
                        "not an actor reference",
                    )
                residual = lng.derivative(msg, t.lang)
                if lng.is_empty(residual):
                    raise TypeCheckError(
                        ErrorCode.EmptyResidual, loc,
                        f"protocol of {path} does not allow sending "
                        f"<{msg.name}> here",
                        required_language=lng.Sym(msg),
                        declared_language=t.lang,
                    )
                return ActorRefT(residual), residual
            if not isinstance(t, ProdT):
                raise TypeCheckError(
                    ErrorCode.TypeMismatch, loc,
                    f"path {path} selects into non-product {type_to_text(t)}",
                )
            if sels[0] == 1:
                new_first, residual = update(t.first, sels[1:])
                return ProdT(new_first, t.second), residual
            new_second, residual = update(t.second, sels[1:])
            return ProdT(t.first, new_second), residual

        new_base, residual = update(base, path.sels)
        return residual, env.bind(path.base, new_base)

    # -- scope bookkeeping

    def _drop(self, env: TypeEnv, name: str, loc: Loc) -> TypeEnv:
        if name not in env:
            return env
        t = env.lookup(name)
        self._note_drop(name, t, loc)
        return env.remove(name)

    def _note_drop(self, name: str, t: TypeExpr, loc: Loc):
        if not self.warn_dropped:
            return
        if isinstance(t, ActorRefT) and not lng.equiv(t.lang, EPS):
            self.typed.warnings.append(DroppedBinding(loc, name, type_to_text(t)))
        elif isinstance(t, BehT):
            self.typed.warnings.append(DroppedBinding(loc, name, type_to_text(t)))

    # -- expressions

    def infer(self, env: TypeEnv, e: Expr) -> tuple[TypeExpr, TypeEnv, LangExpr]:
        t, out, eff = self._infer(env, e)
        self.typed.info[id(e)] = NodeInfo(t, out, eff)
        return t, out, eff

    def _infer(self, env: TypeEnv, e: Expr) -> tuple[TypeExpr, TypeEnv, LangExpr]:
        match e:
            case NatLit():
                return NAT, env, EPS
            case BoolLit():
                return BOOL, env, EPS
            case UnitLit():
                return UNIT, env, EPS
            case Var(path):
                t = self._lookup_path(env, path, e.loc)
                if path.sels:
                    base = env.lookup(path.base)
                    self._note_drop(path.base, base, e.loc)
                # Use consumes the binding; duplication needs an explicit split.
                return t, env.remove(path.base), EPS
            case Pair(a, b):
                ta, env1, eff1 = self.infer(env, a)
                tb, env2, eff2 = self.infer(env1, b)
                return ProdT(ta, tb), env2, lng.shuffle(eff1, eff2)
            case Not(x):
                tx, env1, eff = self.infer(env, x)
                if not isinstance(tx, BoolT):
                    raise TypeCheckError(
                        ErrorCode.TypeMismatch, e.loc,
                        f"operand of ! must be Bool, got {type_to_text(tx)}",
                    )
                return BOOL, env1, eff
            case BinOp(op, a, b):
                want: TypeExpr = BOOL if op in ("&&", "||") else NAT
                ta, env1, eff1 = self.infer(env, a)
                tb, env2, eff2 = self.infer(env1, b)
                for tt in (ta, tb):
                    if not types_equal(tt, want):
                        raise TypeCheckError(
                            ErrorCode.TypeMismatch, e.loc,
                            f"operands of {op} must be {type_to_text(want)}, "
                            f"got {type_to_text(tt)}",
                        )
                return want, env2, lng.shuffle(eff1, eff2)
            case If(c, t_branch, f_branch):
                tc, envc, effc = self.infer(env, c)
                if not isinstance(tc, BoolT):
                    raise TypeCheckError(
                        ErrorCode.TypeMismatch, e.loc,
                        f"condition must be Bool, got {type_to_text(tc)}",
                    )
                tt, envt, efft = self.infer(envc, t_branch)
                tf, envf, efff = self.infer(envc, f_branch)
                if not types_equal(tt, tf):
                    raise TypeCheckError(
                        ErrorCode.TypeMismatch, e.loc,
                        f"branches disagree: {type_to_text(tt)} vs "
                        f"{type_to_text(tf)}",
                    )
                joined = env_join(envt, envf, e.loc)
                return tt, joined, lng.shuffle(effc, lng.alt(efft, efff))
            case SelfCap(l):
                return ActorRefT(l), env, l
            case Fun():
                return self._infer_fun(env, e)
            case App(f, a):
                tf, env1, eff1 = self.infer(env, f)
                if not isinstance(tf, FunT):
                    raise TypeCheckError(
                        ErrorCode.TypeMismatch, e.loc,
                        f"applied expression is {type_to_text(tf)}, not a function",
                    )
                ta, env2, eff2 = self.infer(env1, a)
                if not types_equal(ta, tf.param):
                    raise TypeCheckError(
                        ErrorCode.TypeMismatch, e.loc,
                        f"argument type {type_to_text(ta)} does not match "
                        f"parameter type {type_to_text(tf.param)}",
                    )
                return tf.result, env2, lng.shuffle(lng.shuffle(eff1, eff2), tf.latent)
            case Beh():
                return self.check_behaviour(env, e)
            case Spawn():
                return self.check_spawn(env, e)
            case Send(msg, target, payload):
                declared = self.program.payload_type(msg)
                tp, env1, eff = self.infer(env, payload)
                if not types_equal(tp, declared):
                    raise TypeCheckError(
                        ErrorCode.TypeMismatch, e.loc,
                        f"payload of <{msg.name}> must be "
                        f"{type_to_text(declared)}, got {type_to_text(tp)}",
                    )
                _, env2 = self.apply_send_path(env1, target, msg, e.loc)
                return UNIT, env2, eff
            case Split():
                return self._infer_split(env, e)
            case Let(name, value, body):
                tv, env1, eff1 = self.infer(env, value)
                tb, env2, eff2 = self.infer(env1.bind(name, tv), body)
                return tb, self._drop(env2, name, e.loc), lng.shuffle(eff1, eff2)
        raise TypeCheckError(
            ErrorCode.TypeMismatch, getattr(e, "loc", Loc(0, 0)),
            f"unhandled expression form {type(e).__name__}",
        )

    def _infer_fun(self, env: TypeEnv, e: Fun) -> tuple[TypeExpr, TypeEnv, LangExpr]:
        fun_type = FunT(e.param_type, e.latent, e.ret_type)
        captured = free_vars(e.body) - {e.self_name, e.param}
        for name in sorted(captured):
            t = env.lookup(name)
            if t is None:
                raise TypeCheckError(
                    ErrorCode.UnboundVariable, e.loc,
                    f"function body captures unbound variable {name!r}",
                )
            if not self_splittable(t):
                raise TypeCheckError(
                    ErrorCode.NonSplittableCapture, e.loc,
                    f"function captures {name!r} at non-duplicable type "
                    f"{type_to_text(t)}; functions may be called any number "
                    "of times",
                )
        body_env = env.bind(e.self_name, fun_type).bind(e.param, e.param_type)
        tb, _, body_eff = self.infer(body_env, e.body)
        if not types_equal(tb, e.ret_type):
            raise TypeCheckError(
                ErrorCode.TypeMismatch, e.loc,
                f"function body has type {type_to_text(tb)}, "
                f"declared {type_to_text(e.ret_type)}",
            )
        if not lng.includes(body_eff, e.latent):
            raise TypeCheckError(
                ErrorCode.TypeMismatch, e.loc,
                "function body effect exceeds the declared latent effect",
                required_language=body_eff,
                declared_language=e.latent,
            )
        return fun_type, env, EPS

    def check_behaviour(
        self, env: TypeEnv, e: Beh
    ) -> tuple[TypeExpr, TypeEnv, LangExpr]:
        seen_labels: set[MsgType] = set()
        for c in e.cases:
            if c.label in seen_labels:
                raise TypeCheckError(
                    ErrorCode.DuplicateCaseLabel, e.loc,
                    f"duplicate case for <{c.label.name}>",
                )
            seen_labels.add(c.label)
        # Every message the declared protocol may deliver first must have a
        # case, otherwise a permitted send could arrive unhandled.
        for s in sorted(lng.symbols(e.annot)):
            if s not in seen_labels and not lng.is_empty(lng.derivative(s, e.annot)):
                raise TypeCheckError(
                    ErrorCode.BehaviourConformance, e.loc,
                    f"declared protocol admits <{s.name}> first but the "
                    "behaviour has no case for it",
                    required_language=lng.derivative(s, e.annot),
                    declared_language=e.annot,
                )
        effects: dict[MsgType, LangExpr] = {}
        for c in e.cases:
            payload = self.program.payload_type(c.label)
            case_env = env.bind(c.binder, payload)
            tb, _, eff = self.infer(case_env, c.body)
            if not isinstance(tb, BehT):
                raise TypeCheckError(
                    ErrorCode.TypeMismatch, e.loc,
                    f"case <{c.label.name}> returns {type_to_text(tb)}, "
                    "not a behaviour",
                )
            required = lng.shuffle(lng.derivative(c.label, e.annot), eff)
            if not lng.includes(required, tb.lang):
                raise TypeCheckError(
                    ErrorCode.BehaviourConformance, e.loc,
                    f"after <{c.label.name}>, leftover promises and newly "
                    "created capabilities are not covered by the returned "
                    "behaviour",
                    required_language=required,
                    declared_language=tb.lang,
                )
            effects[c.label] = eff
        self.typed.case_effects[id(e)] = effects
        if self.warn_dropped:
            captured = free_vars(e)
            for name, t in env.items():
                if name not in captured:
                    self._note_drop(name, t, e.loc)
        # Constructing a behaviour consumes the whole environment.
        return BehT(e.annot), TypeEnv.empty(), EPS

    def check_spawn(self, env: TypeEnv, e: Spawn) -> tuple[TypeExpr, TypeEnv, LangExpr]:
        tb, env1, eff = self.infer(env, e.expr)
        if not isinstance(tb, BehT):
            raise TypeCheckError(
                ErrorCode.TypeMismatch, e.loc,
                f"spawn argument is {type_to_text(tb)}, not a behaviour",
            )
        init = e.init_cap if e.init_cap is not None else tb.lang
        if not lng.includes(init, tb.lang):
            raise TypeCheckError(
                ErrorCode.SpawnCapabilityTooLarge, e.loc,
                "initial capability exceeds what the spawned behaviour handles",
                required_language=init,
                declared_language=tb.lang,
            )
        return ActorRefT(init), env1, eff

    def check_split(self, env: TypeEnv, e: Split) -> TypeEnv:
        t = self._lookup_path(env, e.path, e.loc)
        split_judgment(t, e.type1, e.type2, e.loc)
        if e.path.sels:
            self._note_drop(e.path.base, env.lookup(e.path.base), e.loc)
        out = env.remove(e.path.base)
        return out.bind(e.name1, e.type1).bind(e.name2, e.type2)

    def _infer_split(self, env: TypeEnv, e: Split) -> tuple[TypeExpr, TypeEnv, LangExpr]:
        inner = self.check_split(env, e)
        tb, env1, eff = self.infer(inner, e.body)
        env1 = self._drop(env1, e.name1, e.loc)
        env1 = self._drop(env1, e.name2, e.loc)
        return tb, env1, eff


def check_program(p: Program, warn_dropped: bool = False) -> TypedProgram:
    """Accept a program or raise TypeCheckError.

    The root must check to a behaviour type under the empty environment, and
    its protocol must allow the initial unit message.
    """
    checker = Checker(p, warn_dropped=warn_dropped)
    t, _, _ = checker.infer(TypeEnv.empty(), p.root)
    if not isinstance(t, BehT):
        raise TypeCheckError(
            ErrorCode.TypeMismatch, p.root.loc,
            f"root must be a behaviour, got {type_to_text(t)}",
        )
    if lng.is_empty(lng.derivative(UNIT_MSG, t.lang)):
        raise TypeCheckError(
            ErrorCode.RootMissingUnitCase, p.root.loc,
            "the root protocol does not allow the initial unit message",
            required_language=lng.Sym(UNIT_MSG),
            declared_language=t.lang,
        )
    checker.typed.root_type = t
    return checker.typed


def check_expr(
    program: Program, env: TypeEnv, e: Expr
) -> tuple[TypeExpr, TypeEnv, LangExpr]:
    """Standalone single-expression judgment, mainly for tests and tooling."""
    return Checker(program).infer(env, e)
