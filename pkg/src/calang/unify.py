"""Most general unification over terms, including flat set unification.

Unification is completely symmetric in its operands and returns *all*
maximally general unifiers: plain term unification has at most one, but
flat set unification (sets of the form ``{t1, ..., tn} \\/ v1 ... \\/ vq``)
generically has several incomparable ones.  Failure is the empty result,
never an exception.

The set unifier enumerates candidate solutions from three ingredients:

1. a *witness* choice pairing every element of each side with an element
   of the other side or absorbing it into one of the other side's union
   variables,
2. an *extras* choice adding already-covered elements to union variables
   (set members may be covered more than once),
3. fresh *remainder* union variables shared between left and right union
   variables, standing for common content the equation does not name.

Every candidate is verified by resolving both operands and checking set
equality, so unsound choices are dropped; duplicates and strictly less
general solutions are filtered at the end.  The enumeration is
exponential in the set sizes, which is the intended trade: property sets
are a handful of members.
"""

from __future__ import annotations

from itertools import product
from typing import Iterable, Optional

from .terms import (
    ENVIRONMENT,
    LOCAL,
    SET,
    UNION,
    Num,
    SetTerm,
    Sym,
    Term,
    Tup,
    Var,
    classify,
    free_vars,
    term_text,
)


class BindingStore:
    """An immutable association of variables to terms.

    Extension copies; existing bindings are never changed or removed.  The
    store also carries the counter from which unification draws fresh
    variables, so identical runs allocate identical names.
    """

    __slots__ = ("_bindings", "_fresh")

    def __init__(self, bindings: Optional[dict[Var, Term]] = None, fresh: int = 0):
        self._bindings = dict(bindings) if bindings else {}
        self._fresh = fresh

    def binding(self, var: Var) -> Optional[Term]:
        return self._bindings.get(var)

    def is_bound(self, var: Var) -> bool:
        return var in self._bindings

    def bind(self, var: Var, term: Term) -> "BindingStore":
        if var in self._bindings:
            raise ValueError(f"variable {var.name} is already bound")
        s = BindingStore(self._bindings, self._fresh)
        s._bindings[var] = term
        return s

    def fresh_union_var(self) -> tuple[Var, "BindingStore"]:
        v = Var(("g", self._fresh), f"_G{self._fresh}", LOCAL)
        return v, BindingStore(self._bindings, self._fresh + 1)

    def items(self):
        return self._bindings.items()

    def variables(self) -> list[Var]:
        return list(self._bindings)

    def lookup_name(self, name: str, dollars: int = 1) -> Optional[Term]:
        """Fetch a binding by display name.

        Anonymous and compiler-generated variables are never reachable
        this way: they can be bound, not referred to.
        """
        for var in self._bindings:
            if var.anonymous or var.generated:
                continue
            if var.name != name:
                continue
            if (var.category == ENVIRONMENT) != (dollars == 2):
                continue
            return resolve(var, self)
        return None

    def __len__(self):
        return len(self._bindings)

    def __repr__(self):
        inner = ", ".join(f"{v.name}={term_text(t)}" for v, t in self._bindings.items())
        return f"BindingStore({inner})"


def resolve(term: Term, store: BindingStore) -> Term:
    """Apply the store to a term, recursively.

    Bound union variables merge their set values into the enclosing set;
    a union variable bound to an individual is left in place for the
    well-formedness check to reject.
    """
    match term:
        case Var():
            b = store.binding(term)
            return resolve(b, store) if b is not None else term
        case Tup():
            return Tup(tuple(resolve(m, store) for m in term.members))
        case SetTerm():
            elements = [resolve(e, store) for e in term.elements]
            union_vars: list[Var] = []
            for v in term.union_vars:
                b = store.binding(v)
                if b is None:
                    union_vars.append(v)
                    continue
                r = resolve(b, store)
                if isinstance(r, SetTerm):
                    elements.extend(r.elements)
                    union_vars.extend(r.union_vars)
                else:
                    union_vars.append(v)
            return SetTerm(elements, union_vars)
        case _:
            return term


def occurs_in(var: Var, term: Term, store: BindingStore) -> bool:
    match term:
        case Var():
            if term == var:
                return True
            b = store.binding(term)
            return occurs_in(var, b, store) if b is not None else False
        case Tup():
            return any(occurs_in(var, m, store) for m in term.members)
        case SetTerm():
            return any(occurs_in(var, e, store) for e in term.elements) or any(
                occurs_in(var, v, store) for v in term.union_vars)
        case _:
            return False


def _bind(store: BindingStore, var: Var, term: Term,
          frozen: frozenset[Var]) -> Optional[BindingStore]:
    if var in frozen:
        return None
    if occurs_in(var, term, store):
        return None
    return store.bind(var, term)


def set_violation(t: Term, store: BindingStore) -> Optional[str]:
    """Well-formedness of a set under a store: resolved elements must be
    individuals and union variables must be unbound or set-valued."""
    r = resolve(t, store)
    if not isinstance(r, SetTerm):
        return None
    for e in r.elements:
        if classify(e) == SET:
            return f"set member is itself a set: {term_text(e)}"
    for v in r.union_vars:
        if store.binding(v) is not None:
            return f"union variable {v.name} is bound to an individual"
    return None


def _set_view(t: Term, store: BindingStore) -> Optional[SetTerm]:
    """Normalize a set-kind term into resolved ``SetTerm`` form.

    Raw ``\\union`` tuples fold their operands in; any ill-formed
    structure yields None, which callers turn into failure.
    """
    if isinstance(t, SetTerm):
        if set_violation(t, store):
            return None
        return resolve(t, store)
    if isinstance(t, Var):
        b = store.binding(t)
        return _set_view(b, store) if b is not None else None
    if isinstance(t, Tup) and t.members and t.head == Sym(UNION):
        elements: list[Term] = []
        union_vars: list[Var] = []
        for op in t.members[1:]:
            if isinstance(op, Var) and store.binding(op) is None:
                union_vars.append(op)
                continue
            view = _set_view(op, store)
            if view is None:
                return None
            elements.extend(view.elements)
            union_vars.extend(view.union_vars)
        merged = resolve(SetTerm(elements, union_vars), store)
        if set_violation(merged, store):
            return None
        return merged
    return None


# ---------------------------------------------------------------------------
# Term unification
# ---------------------------------------------------------------------------

def unify(t1: Term, t2: Term, store: Optional[BindingStore] = None,
          frozen: frozenset[Var] = frozenset(), _filter: bool = True) -> list[BindingStore]:
    """All maximally general extensions of ``store`` under which ``t1``
    and ``t2`` are equal (set-equal for sets).  Empty list means failure.

    ``frozen`` variables may be read but not bound; an attempted binding
    fails that branch.  The rules, applied in order: bound variables are
    resolved first; an unbound variable binds to the other operand (after
    an occurs check); non-variable basic terms unify only with identical
    basic terms; tuples unify member-wise at equal arity; tuples and sets
    never unify unless the tuple is ``\\union``-headed; set against set
    goes through :func:`unify_sets`.
    """
    if store is None:
        store = BindingStore()

    while isinstance(t1, Var) and store.binding(t1) is not None:
        t1 = store.binding(t1)
    while isinstance(t2, Var) and store.binding(t2) is not None:
        t2 = store.binding(t2)

    if isinstance(t1, Var) and isinstance(t2, Var):
        if t1 == t2:
            return [store]
        # Prefer binding a variable that is allowed to bind.
        if t1 in frozen and t2 not in frozen:
            t1, t2 = t2, t1
        s = _bind(store, t1, t2, frozen)
        return [s] if s is not None else []

    set1, set2 = classify(t1) == SET, classify(t2) == SET

    if isinstance(t1, Var) or isinstance(t2, Var):
        var, other, other_is_set = (t1, t2, set2) if isinstance(t1, Var) else (t2, t1, set1)
        if other_is_set:
            view = _set_view(other, store)
            if view is None:
                return []
            other = view
        s = _bind(store, var, other, frozen)
        return [s] if s is not None else []

    if set1 or set2:
        if not (set1 and set2):
            return []
        return unify_sets(t1, t2, store, frozen, _filter=_filter)

    match t1, t2:
        case (Num(), Num()) | (Sym(), Sym()):
            return [store] if t1 == t2 else []
        case (Tup(), Tup()):
            if len(t1.members) != len(t2.members):
                return []
            stores = [store]
            for a, b in zip(t1.members, t2.members):
                stores = [s2 for s in stores for s2 in unify(a, b, s, frozen, _filter=False)]
                if not stores:
                    return []
            if _filter and len(stores) > 1:
                stores = _prune(stores, store, _relevant_vars([t1, t2], store))
            return stores
        case _:
            return []


# ---------------------------------------------------------------------------
# Flat set unification
# ---------------------------------------------------------------------------

def unify_sets(s1: Term, s2: Term, store: Optional[BindingStore] = None,
               frozen: frozenset[Var] = frozenset(), _filter: bool = True) -> list[BindingStore]:
    """Unify two set terms, returning the complete antichain of maximally
    general solution stores.

    Solutions may bind fresh union variables ("remainders") standing for
    shared content the equation does not name.  Union variables are only
    ever bound to set terms.
    """
    if store is None:
        store = BindingStore()
    v1 = _set_view(s1, store)
    v2 = _set_view(s2, store)
    if v1 is None or v2 is None:
        return []

    A, U = list(v1.elements), list(v1.union_vars)
    B, W = list(v2.elements), list(v2.union_vars)

    if A and not B and not W:
        return []
    if B and not A and not U:
        return []

    a_options = [[("pair", j) for j in range(len(B))] + [("absorb", w) for w in W] for _ in A]
    b_options = [[("pair", i) for i in range(len(A))] + [("absorb", u) for u in U] for _ in B]

    all_vars: list[Var] = []
    for v in U + W:
        if v not in all_vars:
            all_vars.append(v)

    candidates: list[BindingStore] = []
    for fa in product(*a_options):
        for fb in product(*b_options):
            pairs: list[tuple[Term, Term]] = []
            absorbed: dict[Var, list[Term]] = {v: [] for v in all_vars}
            for i, choice in enumerate(fa):
                if choice[0] == "pair":
                    pairs.append((A[i], B[choice[1]]))
                else:
                    absorbed[choice[1]].append(A[i])
            for j, choice in enumerate(fb):
                if choice[0] == "pair":
                    pair = (A[choice[1]], B[j])
                    if pair not in pairs:
                        pairs.append(pair)
                else:
                    absorbed[choice[1]].append(B[j])

            stores = [store]
            for a, b in pairs:
                stores = [s2 for s in stores for s2 in unify(a, b, s, frozen, _filter=False)]
                if not stores:
                    break
            for s in stores:
                candidates.extend(
                    _complete_candidate(s, A, B, U, W, absorbed, frozen))

    verified = []
    for s in candidates:
        if resolve(v1, s) == resolve(v2, s):
            verified.append(s)

    if not _filter:
        return verified
    return _prune(verified, store, _relevant_vars([v1, v2], store))


def _complete_candidate(s: BindingStore, A, B, U, W, absorbed,
                        frozen: frozenset[Var]) -> list[BindingStore]:
    """Finish one witness choice: enumerate extras and allocate remainder
    variables, yielding unverified candidate stores."""
    ordered_vars: list[Var] = []
    for v in U + W:
        if v not in ordered_vars:
            ordered_vars.append(v)
    if not ordered_vars:
        return [s]

    known: list[Term] = []
    for e in A + B:
        r = resolve(e, s)
        if r not in known:
            known.append(r)

    out: list[BindingStore] = []
    for extra_choice in product(_subsets(known), repeat=len(ordered_vars)):
        s2 = s
        # Remainder variables shared between each left/right pair of union
        # variables; a variable occurring on both sides gets a private one.
        remainders: dict[Var, list[Var]] = {v: [] for v in ordered_vars}
        for u in U:
            for w in W:
                nv, s2 = s2.fresh_union_var()
                remainders[u].append(nv)
                if u != w:
                    remainders[w].append(nv)
        branch = [s2]
        for v, extras in zip(ordered_vars, extra_choice):
            nxt = []
            for st in branch:
                forced = [resolve(e, st) for e in absorbed.get(v, ())]
                value = SetTerm(forced + list(extras), remainders[v])
                if st.binding(v) is not None:
                    nxt.extend(unify(v, value, st, frozen, _filter=False))
                else:
                    b = _bind(st, v, value, frozen)
                    if b is not None:
                        nxt.append(b)
            branch = nxt
            if not branch:
                break
        out.extend(branch)
    return out


def _subsets(items: list) -> list[tuple]:
    out = [()]
    for it in items:
        out += [prev + (it,) for prev in out]
    return out


# ---------------------------------------------------------------------------
# Solution filtering: duplicates and strictly less general stores
# ---------------------------------------------------------------------------

def _relevant_vars(terms: Iterable[Term], store: BindingStore) -> list[Var]:
    out: list[Var] = []
    for t in terms:
        for v in free_vars(resolve(t, store)):
            if v not in out and store.binding(v) is None:
                out.append(v)
    return out


def _canonical(t: Term, rename: dict[Var, object], keep: frozenset[Var]):
    """A hashable shape of a term with generated/irrelevant variables
    replaced by first-appearance indices, so alpha-equivalent solutions
    compare equal."""
    match t:
        case Num():
            return ("num", t.value)
        case Sym():
            return ("sym", t.name)
        case Var():
            if t in keep:
                return ("var", t.vid)
            if t not in rename:
                rename[t] = ("fresh", len(rename))
            return rename[t]
        case Tup():
            return ("tup", tuple(_canonical(m, rename, keep) for m in t.members))
        case SetTerm():
            elems = frozenset(_canonical(e, rename, keep) for e in t.elements)
            uvars = frozenset(_canonical(v, rename, keep) for v in t.union_vars)
            return ("set", elems, uvars)
    raise TypeError(f"not a term: {t!r}")


def solution_snapshot(store: BindingStore, rvars: list[Var]) -> tuple:
    """A hashable fingerprint of what a solution says about ``rvars``."""
    rename: dict[Var, object] = {}
    keep = frozenset(rvars)
    return tuple(_canonical(resolve(v, store), rename, keep) for v in rvars)


# -- one-way matching (instance checks) -------------------------------------
#
# ``_match(pattern, target, sub)`` yields substitutions for the pattern's
# variables only: target variables are opaque and can appear in bindings
# but never be bound.  This is what "target is an instance of pattern"
# means, and reusing the symmetric unifier here would over-approximate.
# Everything is a lazy generator so an existence check stops at the first
# witness.

def _opaque(v: Var) -> bool:
    # Target-side variables (renamed into the "m" space) are constants
    # for matching purposes: they match only themselves.
    return v.vid[0] == "m"


def _match(pattern: Term, target: Term, sub: dict[Var, Term]):
    while isinstance(pattern, Var) and pattern in sub:
        pattern = sub[pattern]
    if isinstance(pattern, Var):
        if _opaque(pattern):
            if pattern == target:
                yield sub
        else:
            new = dict(sub)
            new[pattern] = target
            yield new
        return
    match pattern, target:
        case (Num(), Num()) | (Sym(), Sym()):
            if pattern == target:
                yield sub
        case (Tup(), Tup()):
            if len(pattern.members) != len(target.members):
                return

            def members(i, s):
                if i == len(pattern.members):
                    yield s
                    return
                for s2 in _match(pattern.members[i], target.members[i], s):
                    yield from members(i + 1, s2)

            yield from members(0, sub)
        case (SetTerm(), SetTerm()):
            yield from _match_sets(pattern, target, sub)
        case (SetTerm(), Var()):
            # A lone union variable can stand for an opaque target set.
            if not pattern.elements and len(pattern.union_vars) == 1:
                yield from _match(pattern.union_vars[0], SetTerm((), (target,)), sub)


def _apply_sub(t: Term, sub: dict[Var, Term]) -> Term:
    match t:
        case Var():
            r = sub.get(t)
            return _apply_sub(r, sub) if r is not None else t
        case Tup():
            return Tup(tuple(_apply_sub(m, sub) for m in t.members))
        case SetTerm():
            elements = [_apply_sub(e, sub) for e in t.elements]
            uvars: list[Var] = []
            for v in t.union_vars:
                r = _apply_sub(v, sub)
                if isinstance(r, SetTerm):
                    elements.extend(r.elements)
                    uvars.extend(r.union_vars)
                elif isinstance(r, Var):
                    uvars.append(r)
                else:
                    elements.append(r)  # ill-formed; matching will reject
            return SetTerm(elements, uvars)
        case _:
            return t


def _bindable_free(t: Term) -> bool:
    return any(not _opaque(v) for v in free_vars(t))


def _match_sets(pattern: SetTerm, target: SetTerm, sub: dict[Var, Term]):
    pattern = _apply_sub(SetTerm(pattern.elements, pattern.union_vars), sub)
    if not _bindable_free(pattern):
        # Nothing left to bind: plain set equality decides.
        if pattern == target:
            yield sub
        return
    Ep, Vp = list(pattern.elements), list(pattern.union_vars)
    Et, Vt = list(target.elements), list(target.union_vars)

    # Opaque union chunks on the pattern side can only stand for
    # themselves: they must appear on the target side too, and then cover
    # each other.
    for v in [v for v in Vp if _opaque(v)]:
        if v not in Vt:
            return
        Vp.remove(v)
        Vt.remove(v)

    if (Et or Vt) and not (Ep or Vp):
        return

    # Every pattern element must match some target element; leftover
    # target elements and all target chunks are then distributed over the
    # pattern's union variables.
    def match_elems(i, s, used):
        if i == len(Ep):
            yield s, used
            return
        for j, et in enumerate(Et):
            for s2 in _match(Ep[i], et, s):
                yield from match_elems(i + 1, s2, used | {j})

    def assign(items, k, s, values):
        if k == len(items):
            final = dict(s)
            for v in Vp:
                if v not in final:
                    final[v] = SetTerm(values[v][0], values[v][1])
                # a pre-bound variable keeps its value; the verification
                # below decides whether this distribution works
            if _apply_sub(pattern, final) == target:
                yield final
            return
        kind, item = items[k]
        for v in Vp:
            values[v][0 if kind == "elem" else 1].append(item)
            yield from assign(items, k + 1, s, values)
            values[v][0 if kind == "elem" else 1].pop()

    for s, used in match_elems(0, sub, frozenset()):
        leftovers = [("elem", et) for j, et in enumerate(Et) if j not in used]
        items = leftovers + [("chunk", vt) for vt in Vt]
        if items and not Vp:
            continue
        values: dict[Var, tuple[list, list]] = {v: ([], []) for v in Vp}
        yield from assign(items, 0, s, values)


_rename_serial = 0


def _rename_apart(terms: list[Term]) -> list[Term]:
    """Bijectively rename every free variable to a fresh identity.

    Independent solutions can reuse generated variable ids, and matching
    must never confuse a pattern variable with a target one, so the
    target side gets a disjoint variable space.
    """
    global _rename_serial
    mapping: dict[Var, Var] = {}

    def walk(t: Term) -> Term:
        global _rename_serial
        match t:
            case Var():
                if t not in mapping:
                    mapping[t] = Var(("m", _rename_serial), t.name, t.category)
                    _rename_serial += 1
                return mapping[t]
            case Tup():
                return Tup(tuple(walk(m) for m in t.members))
            case SetTerm():
                return SetTerm([walk(e) for e in t.elements],
                               [walk(v) for v in t.union_vars])
            case _:
                return t

    return [walk(t) for t in terms]


def is_instance_of(specific: list[Term], general: list[Term]) -> bool:
    """True when the specific value vector is obtainable from the general
    one by substituting for its free variables."""
    if not any(free_vars(g) for g in general):
        return list(specific) == list(general)
    specific = _rename_apart(specific)

    def thread(i, sub):
        if i == len(general):
            yield sub
            return
        for s2 in _match(general[i], specific[i], sub):
            yield from thread(i + 1, s2)

    return next(thread(0, {}), None) is not None


def _prune(stores: list[BindingStore], base: BindingStore,
           rvars: list[Var]) -> list[BindingStore]:
    """Drop duplicate solutions (same observable content) and solutions
    strictly subsumed by a more general one.  Order is preserved."""
    seen: set[tuple] = set()
    kept: list[BindingStore] = []
    values: list[list[Term]] = []
    for s in stores:
        snap = solution_snapshot(s, rvars)
        if snap in seen:
            continue
        seen.add(snap)
        kept.append(s)
        values.append([resolve(v, s) for v in rvars])

    if len(kept) <= 1:
        return kept

    has_free = [any(free_vars(v) for v in vals) for vals in values]
    drop: set[int] = set()
    for i in range(len(kept)):
        if i in drop or not has_free[i]:
            continue
        for j in range(len(kept)):
            if i == j or j in drop:
                continue
            if is_instance_of(values[j], values[i]):
                if is_instance_of(values[i], values[j]) and i > j:
                    continue  # mutual: keep the earlier one
                drop.add(j)
    return [s for k, s in enumerate(kept) if k not in drop]
