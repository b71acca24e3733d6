"""Coordinate frames on jet space: independents, dependents, jet variables, rankings.

A jet variable is a pair ``(dep, idx)`` where ``dep`` is the index of a
dependent variable and ``idx`` is a multi-index of derivative counts, one
per independent variable.  Frames give names and flags to those indices;
the polynomial kernel itself works on bare indices so that frames can be
extended (with formal argument slots) without touching existing data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MultiIndex = tuple
JetVar = tuple


def zero_index(n: int) -> MultiIndex:
    return (0,) * n


def unit_index(n: int, i: int) -> MultiIndex:
    return tuple(1 if k == i else 0 for k in range(n))


def index_order(idx: MultiIndex) -> int:
    return sum(idx)


def index_add(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


def index_sub(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x - y for x, y in zip(a, b))


def index_le(a: MultiIndex, b: MultiIndex) -> bool:
    """Componentwise partial order: a divides b."""
    return all(x <= y for x, y in zip(a, b))


def _valid_name(name: str) -> bool:
    return bool(name) and (name[0].isalpha() or name[0] == "_") and all(
        c.isalnum() or c == "_" for c in name
    )


@dataclass(frozen=True)
class Frame:
    """Declared independent and dependent variables, in canonical order.

    ``formal`` holds indices of dependents that are formal argument slots
    (operator arguments such as the psi's in bracket computations) rather
    than physical unknowns of an equation.
    """

    independents: tuple
    dependents: tuple
    formal: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.independents or not self.dependents:
            raise ValueError("frame needs at least one independent and one dependent")
        names = list(self.independents) + list(self.dependents)
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        for name in names:
            if not _valid_name(name):
                raise ValueError(f"bad variable name {name!r}")
        if not all(0 <= j < len(self.dependents) for j in self.formal):
            raise ValueError("formal flag out of range")

    @property
    def n(self) -> int:
        return len(self.independents)

    @property
    def m(self) -> int:
        return len(self.dependents)

    @property
    def physical(self) -> tuple:
        return tuple(j for j in range(self.m) if j not in self.formal)

    def indep_index(self, name: str) -> int:
        try:
            return self.independents.index(name)
        except ValueError:
            raise ValueError(f"unknown independent variable {name!r}") from None

    def dep_index(self, name: str) -> int:
        try:
            return self.dependents.index(name)
        except ValueError:
            raise ValueError(f"unknown dependent variable {name!r}") from None

    def is_formal(self, dep: int) -> bool:
        return dep in self.formal

    def fresh_names(self, stem: str, count: int) -> tuple:
        """Generate ``count`` dependent names based on ``stem`` avoiding clashes."""
        taken = set(self.independents) | set(self.dependents)
        out = []
        k = 0
        while len(out) < count:
            k += 1
            cand = f"{stem}{k}"
            if cand not in taken:
                taken.add(cand)
                out.append(cand)
        return tuple(out)

    def extend(self, names, formal: bool = True):
        """Append dependents; returns (new frame, indices of the new slots)."""
        names = tuple(names)
        new_ids = tuple(range(self.m, self.m + len(names)))
        flags = set(self.formal)
        if formal:
            flags.update(new_ids)
        frame = Frame(self.independents, self.dependents + names, frozenset(flags))
        return frame, new_ids


@dataclass(frozen=True)
class Ranking:
    """Prolongation-compatible total order on jet variables.

    ``indep_order`` lists independent-variable indices from most to least
    dominant.  With the default ``lex`` rule two jet variables compare by
    the precedence-permuted multi-index, lexicographically, and ties (same
    multi-index, different dependent) fall to dependent precedence.  This
    is a well-order and satisfies v < w  =>  D_i v < D_i w.

    The ``graded`` rule compares total order first, then as above.
    """

    indep_order: tuple
    dep_order: tuple = None
    rule: str = "lex"

    def __post_init__(self):
        if sorted(self.indep_order) != list(range(len(self.indep_order))):
            raise ValueError("indep_order must be a permutation of independent indices")
        if self.rule not in ("lex", "graded"):
            raise ValueError(f"unknown ranking rule {self.rule!r}")

    def _dep_key(self, dep: int) -> int:
        # Higher precedence => larger key.  Dependents beyond dep_order
        # (formal slots added later) rank below all listed ones.
        if self.dep_order is None:
            return -dep
        try:
            return -self.dep_order.index(dep)
        except ValueError:
            return -(len(self.dep_order) + dep)

    def key(self, jet: JetVar):
        dep, idx = jet
        perm = tuple(idx[i] for i in self.indep_order)
        if self.rule == "graded":
            return (sum(idx), perm, self._dep_key(dep))
        return (perm, self._dep_key(dep))

    def max_jet(self, jets):
        return max(jets, key=self.key)

    @staticmethod
    def of(frame: Frame, *indep_names, deps=None, rule: str = "lex") -> "Ranking":
        """Build a ranking from independent names, most dominant first."""
        order = tuple(frame.indep_index(nm) for nm in indep_names)
        if sorted(order) != list(range(frame.n)):
            raise ValueError("ranking must mention every independent exactly once")
        dep_order = None
        if deps is not None:
            dep_order = tuple(frame.dep_index(nm) for nm in deps)
        return Ranking(order, dep_order, rule)
