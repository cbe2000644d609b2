"""The core term algebra.

Terms are immutable trees over five constructors:

* ``Num``     -- an exact rational, always in lowest terms,
* ``Sym``     -- a symbol; plain identifiers plus the reserved backslash
  operator names (``\\plus``, ``\\minus``, ``\\times``, ``\\slash``,
  ``\\hat``, ``\\union``) that surface syntax cannot spell directly,
* ``Var``     -- a variable with a session-unique identity,
* ``Tup``     -- an ordered tuple,
* ``SetTerm`` -- a flat set: member terms plus a list of union variables.

There are two mutually incoercible kinds of term: sets and individuals.
``desugar`` lowers surface trees from :mod:`calang.syntax` into this
algebra: infix operators become operator-headed tuples, head-extraction
sugar is flattened, and ``\\/`` chains collapse into the flat-set form
``{t1, ..., tn} \\/ v1 \\/ ... \\/ vq`` whenever the operands allow it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

from . import syntax

# Variable categories.
OBJECT = "object"
ENVIRONMENT = "environment"
LOCAL = "local"
ANONYMOUS = "anonymous"

# Reserved operator symbols.
PLUS = "\\plus"
MINUS = "\\minus"
TIMES = "\\times"
SLASH = "\\slash"
HAT = "\\hat"
UNION = "\\union"

INFIX_SYMBOL = {"+": PLUS, "-": MINUS, "*": TIMES, "/": SLASH, "^": HAT, "\\/": UNION}

# Term kinds.
INDIVIDUAL = "individual"
SET = "set"


@dataclass(frozen=True)
class Num:
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Var:
    """A variable.  Identity is the ``vid``; name and category are display
    and scoping metadata only, so two parses of the same source yield
    distinct variables."""

    vid: tuple[str, int]
    name: str = field(compare=False)
    category: str = field(compare=False)

    @property
    def anonymous(self) -> bool:
        return self.category == ANONYMOUS

    @property
    def generated(self) -> bool:
        return self.vid[0] == "g"


@dataclass(frozen=True)
class Tup:
    members: tuple["Term", ...]

    @property
    def head(self) -> "Term":
        return self.members[0]


class SetTerm:
    """A flat set ``{e1, ..., en} \\/ v1 \\/ ... \\/ vq``.

    Duplicate elements and duplicate union variables collapse on
    construction.  Equality ignores element order and treats the union
    variable list as a set; the stored order is kept for deterministic
    display.
    """

    __slots__ = ("elements", "union_vars", "_key")

    def __init__(self, elements: Iterable["Term"] = (), union_vars: Iterable[Var] = ()):
        elems: list[Term] = []
        for e in elements:
            if e not in elems:
                elems.append(e)
        uvars: list[Var] = []
        for v in union_vars:
            if v not in uvars:
                uvars.append(v)
        object.__setattr__(self, "elements", tuple(elems))
        object.__setattr__(self, "union_vars", tuple(uvars))
        object.__setattr__(self, "_key", (frozenset(elems), frozenset(uvars)))

    def __setattr__(self, name, value):
        raise AttributeError("SetTerm is immutable")

    def __eq__(self, other):
        return isinstance(other, SetTerm) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"SetTerm({list(self.elements)!r}, {list(self.union_vars)!r})"


Term = Union[Num, Sym, Var, Tup, SetTerm]


class VarSupply:
    """Allocates variables with session-unique identities.

    One supply per parsing/evaluation session; not safe for concurrent
    writers, by design.
    """

    def __init__(self, space: str = "d"):
        self.space = space
        self.count = 0

    def fresh(self, name: str, category: str) -> Var:
        v = Var((self.space, self.count), name, category)
        self.count += 1
        return v

    def fresh_anonymous(self) -> Var:
        return self.fresh("_", ANONYMOUS)


def fresh_variable(session: VarSupply) -> Var:
    """A fresh local variable with a generated name, distinct from every
    variable the session has produced so far."""
    return session.fresh(f"_G{session.count}", LOCAL)


class VarScope:
    """Interns surface variable references for one declaration.

    The same ``$name`` always maps to the same :class:`Var` within a
    scope; every ``$_`` occurrence maps to a distinct fresh variable.
    Names matching a signature field are object variables, ``$$`` names
    are environment variables, the rest are locals.
    """

    def __init__(self, supply: Optional[VarSupply] = None, object_fields: Iterable[str] = ()):
        self.supply = supply or VarSupply()
        self.object_fields = frozenset(object_fields)
        self._interned: dict[tuple[int, str], Var] = {}

    def lookup(self, name: str, dollars: int) -> Var:
        if dollars == 1 and name == "_":
            return self.supply.fresh_anonymous()
        key = (dollars, name)
        v = self._interned.get(key)
        if v is None:
            if dollars == 2:
                category = ENVIRONMENT
            elif name in self.object_fields:
                category = OBJECT
            else:
                category = LOCAL
            v = self.supply.fresh(name, category)
            self._interned[key] = v
        return v

    def known(self, name: str, dollars: int = 1) -> Optional[Var]:
        return self._interned.get((dollars, name))

    def interned(self) -> list[Var]:
        return list(self._interned.values())


def _merge_union(lhs: Term, rhs: Term) -> Term:
    """Combine two desugared union operands.

    Sets merge into one flat set and variables join the union list.  Any
    other operand makes the union ill-formed; it is kept as a raw
    ``\\union`` tuple so the predicate that eventually uses it fails,
    rather than failing here.
    """
    parts = []
    for t in (lhs, rhs):
        if isinstance(t, Tup) and t.head == Sym(UNION):
            parts.extend(t.members[1:])
        else:
            parts.append(t)
    elements: list[Term] = []
    union_vars: list[Var] = []
    for p in parts:
        if isinstance(p, SetTerm):
            elements.extend(p.elements)
            union_vars.extend(p.union_vars)
        elif isinstance(p, Var):
            union_vars.append(p)
        else:
            return Tup((Sym(UNION), *parts))
    return SetTerm(elements, union_vars)


def desugar(node, scope: Optional[VarScope] = None) -> Term:
    """Lower a surface term to the core algebra.

    Already-lowered terms pass through unchanged, so the operation is
    idempotent.  ``scope`` resolves variable references; omitting it
    treats every single-dollar name as a local.
    """
    if isinstance(node, (Num, Sym, Var, Tup, SetTerm)):
        return node
    if scope is None:
        scope = VarScope()

    match node:
        case syntax.NumberLit(value):
            return Num(value)
        case syntax.Name(text):
            return Sym(text)
        case syntax.VarRef(name, dollars):
            return scope.lookup(name, dollars)
        case syntax.Unary(op, operand):
            inner = desugar(operand, scope)
            if isinstance(inner, Num):
                return Num(-inner.value) if op == "-" else inner
            if op == "+":
                return inner
            return Tup((Sym(MINUS), inner))
        case syntax.Binary("\\/", lhs, rhs):
            return _merge_union(desugar(lhs, scope), desugar(rhs, scope))
        case syntax.Binary(op, lhs, rhs):
            return Tup((Sym(INFIX_SYMBOL[op]), desugar(lhs, scope), desugar(rhs, scope)))
        case syntax.TupleLit(members):
            return Tup(tuple(desugar(m, scope) for m in members))
        case syntax.HeadTuple(head, args):
            return Tup((Sym(head), *(desugar(a, scope) for a in args)))
        case syntax.SetLit(members):
            # A set literal written inside a set literal stays an element;
            # the well-formedness check reports it at use time.
            return SetTerm(tuple(desugar(m, scope) for m in members))
    raise TypeError(f"not a surface term: {node!r}")


def classify(t: Term) -> str:
    """``set`` for set terms (including raw ``\\union`` tuples), else
    ``individual``."""
    if isinstance(t, SetTerm):
        return SET
    if isinstance(t, Tup) and t.members and t.head == Sym(UNION):
        return SET
    return INDIVIDUAL


def is_set_term(t: Term) -> bool:
    return classify(t) == SET


def check_set_wellformed(t: Term) -> Optional[str]:
    """Return None when well-formed, else a description of the first
    violation.

    A set is ill-formed when an element is itself a set, or when a union
    operand is anything but a set or a variable.  Callers turn a
    violation into predicate failure; this check never raises.
    """
    match t:
        case Num() | Sym() | Var():
            return None
        case SetTerm():
            for e in t.elements:
                if classify(e) == SET:
                    return f"set member is itself a set: {term_text(e)}"
                v = check_set_wellformed(e)
                if v:
                    return v
            return None
        case Tup() if t.members and t.head == Sym(UNION):
            for op in t.members[1:]:
                if not isinstance(op, Var) and classify(op) != SET:
                    return f"union with a non-set operand: {term_text(op)}"
                v = check_set_wellformed(op)
                if v:
                    return v
            return None
        case Tup():
            for m in t.members:
                v = check_set_wellformed(m)
                if v:
                    return v
            return None
    return None


def free_vars(t: Term) -> list[Var]:
    """All variables occurring in ``t``, in order of first appearance."""
    out: list[Var] = []

    def walk(x: Term):
        match x:
            case Var():
                if x not in out:
                    out.append(x)
            case Tup():
                for m in x.members:
                    walk(m)
            case SetTerm():
                for e in x.elements:
                    walk(e)
                for v in x.union_vars:
                    walk(v)

    walk(t)
    return out


# ---------------------------------------------------------------------------
# Debug rendering (CAL surface style)
# ---------------------------------------------------------------------------

_PREC = {PLUS: 2, MINUS: 2, TIMES: 4, SLASH: 4, HAT: 5}
_OP_TEXT = {PLUS: "+", MINUS: "-", TIMES: "*", SLASH: "/", HAT: "^"}


def var_text(v: Var) -> str:
    if v.anonymous:
        return "$_"
    dollars = "$$" if v.category == ENVIRONMENT else "$"
    return dollars + v.name


def term_text(t: Term, prec: int = 0) -> str:
    """Render a term in CAL surface style, for reports and diagnostics."""
    match t:
        case Num():
            text = str(t.value)
            return f"({text})" if t.value < 0 and prec > 0 else text
        case Sym(name):
            return name
        case Var():
            return var_text(t)
        case SetTerm():
            parts = []
            if t.elements or not t.union_vars:
                parts.append("{" + ", ".join(term_text(e) for e in t.elements) + "}")
            parts.extend(var_text(v) for v in t.union_vars)
            text = " \\/ ".join(parts)
            return f"({text})" if prec > 1 and len(parts) > 1 else text
        case Tup() if not t.members:
            return "()"
        case Tup() if t.head == Sym(MINUS) and len(t.members) == 2:
            text = f"-{term_text(t.members[1], 3)}"
            return f"({text})" if prec > 3 else text
        case Tup() if isinstance(t.head, Sym) and t.head.name in _PREC and len(t.members) == 3:
            level = _PREC[t.head.name]
            lhs = term_text(t.members[1], level)
            rhs = term_text(t.members[2], level + 1)
            text = f"{lhs} {_OP_TEXT[t.head.name]} {rhs}"
            return f"({text})" if prec > level else text
        case Tup() if t.head == Sym(UNION):
            text = " \\/ ".join(term_text(m, 2) for m in t.members[1:])
            return f"({text})" if prec > 1 else text
        case Tup() if isinstance(t.head, Sym) and len(t.members) > 1 and not t.head.name.startswith("\\"):
            return t.head.name + "(" + ", ".join(term_text(m) for m in t.members[1:]) + ")"
        case Tup():
            return "(" + ", ".join(term_text(m) for m in t.members) + ")"
    raise TypeError(f"not a term: {t!r}")
