"""Equations as orthonomic rewrite systems on jet space.

A system is a list of rules  lead -> rhs  where every lead is a jet
variable strictly greater (under a prolongation-compatible ranking) than
everything in the right-hand sides.  Reduction to normal form realizes
restriction to the infinite prolongation; factoring an on-shell
expression through the equation recovers the operator that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .frame import index_le, index_sub
from .ops import CDiffOp, DimensionMismatch, linearize
from .poly import DiffPoly, VectorFunction, as_vector


class HamcheckError(Exception):
    """Base class for kernel errors."""


class NonOrthonomic(HamcheckError):
    pass


class MismatchedSolvedForm(HamcheckError):
    pass


class PassivityFailure(HamcheckError):
    def __init__(self, depth, residual):
        self.depth = depth
        self.residual = residual
        super().__init__(f"passivity check failed at depth {depth}")


class NotOnEquation(HamcheckError):
    pass


class NotConserved(HamcheckError):
    pass


class NotAGenFn(HamcheckError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__("vector is not a generating function on this system")


@dataclass(frozen=True)
class Rule:
    """One solved equation.

    ``rhs_exact`` satisfies F_k = scale * (lead - rhs_exact) on the nose
    and drives factoring through the equation; ``rhs`` is its normal form
    with respect to the other rules and drives reduction.
    """

    lead: tuple
    rhs: DiffPoly
    rhs_exact: DiffPoly
    scale: Fraction


class EquationSystem:
    """Immutable orthonomic system; all queries are pure functions.

    The per-instance caches only memoize derived values that are functions
    of the immutable state, so sharing instances between threads is safe
    (concurrent misses at worst recompute the same value).
    """

    def __init__(self, frame, originals, rules, ranking, passivity_depth):
        self.frame = frame
        self.originals = originals
        self.rules = tuple(rules)
        self.ranking = ranking
        self.passivity_depth = passivity_depth
        self._by_dep = {}
        for k, rule in enumerate(self.rules):
            self._by_dep.setdefault(rule.lead[0], []).append(k)
        self._prol = {}
        self._lin = None
        self._lin_adj = None

    # -- reduction ------------------------------------------------------

    def rule_for(self, jet):
        """Index of the rule whose lead divides this jet variable, if any."""
        dep, idx = jet
        for k in self._by_dep.get(dep, ()):
            if index_le(self.rules[k].lead[1], idx):
                return k
        return None

    def prolonged_rhs(self, k: int, tau) -> DiffPoly:
        """Normal form of D_tau applied to rule k's right-hand side."""
        key = (k, tau)
        got = self._prol.get(key)
        if got is None:
            if not any(tau):
                got = self.reduce(self.rules[k].rhs)
            else:
                i = next(j for j, q in enumerate(tau) if q)
                lower = tuple(q - 1 if j == i else q for j, q in enumerate(tau))
                got = self.reduce(self.prolonged_rhs(k, lower).total(i))
            self._prol[key] = got
        return got

    def reduce(self, p: DiffPoly) -> DiffPoly:
        """Normal form: rewrite the highest reducible jet first, to a fixpoint."""
        key = self.ranking.key
        while True:
            best = None
            best_k = None
            for jet in p.jetvars():
                k = self.rule_for(jet)
                if k is not None and (best is None or key(jet) > key(best)):
                    best = jet
                    best_k = k
            if best is None:
                return p
            tau = index_sub(best[1], self.rules[best_k].lead[1])
            p = p.subst_jet(best, self.prolonged_rhs(best_k, tau))

    def reduce_vector(self, v) -> VectorFunction:
        return as_vector(v).map(self.reduce)

    def restrict_op(self, op: CDiffOp) -> CDiffOp:
        """Reduce every coefficient to internal coordinates."""
        return op.map_coeffs(self.reduce)

    # -- derived operators ------------------------------------------------

    def linearization(self) -> CDiffOp:
        if self._lin is None:
            self._lin = linearize(self.originals, self.frame.physical)
        return self._lin

    def adjoint_linearization(self) -> CDiffOp:
        if self._lin_adj is None:
            self._lin_adj = self.linearization().adjoint()
        return self._lin_adj

    def is_evolution(self):
        """Index of the evolution direction, or None.

        Evolution form here means: one rule per physical dependent, every
        lead a first derivative in the same direction e, and no right-hand
        side containing any e-derivative.
        """
        phys = self.frame.physical
        if len(self.rules) != len(phys):
            return None
        if {r.lead[0] for r in self.rules} != set(phys):
            return None
        first = self.rules[0].lead[1]
        if sum(first) != 1:
            return None
        e = next(i for i, q in enumerate(first) if q)
        for rule in self.rules:
            idx = rule.lead[1]
            if sum(idx) != 1 or not idx[e]:
                return None
            for (_, jdx) in rule.rhs.jetvars():
                if jdx[e]:
                    return None
            if any(xe[e] for (_, xe) in rule.rhs.terms):
                return None
        return e

    # -- membership checks -------------------------------------------------

    def is_symmetry(self, phi) -> bool:
        phi = as_vector(phi)
        if len(phi) != len(self.frame.physical):
            raise DimensionMismatch("symmetry candidate has wrong length")
        return self.reduce_vector(self.linearization().apply(phi)).is_zero()

    def symmetry_residual(self, phi) -> VectorFunction:
        return self.reduce_vector(self.linearization().apply(as_vector(phi)))

    def is_genfn(self, psi) -> bool:
        psi = as_vector(psi)
        if len(psi) != len(self.rules):
            raise DimensionMismatch("generating-function candidate has wrong length")
        return self.reduce_vector(self.adjoint_linearization().apply(psi)).is_zero()

    def genfn_residual(self, psi) -> VectorFunction:
        return self.reduce_vector(self.adjoint_linearization().apply(as_vector(psi)))

    # -- factoring through the equation -------------------------------------

    def factor_through_f(self, g) -> CDiffOp:
        """Find the operator Delta with g = Delta(F) modulo higher F-degree.

        Every reducible jet u_{lead+tau} is replaced by D_tau(rhs) plus a
        fresh commuting symbol standing for D_tau(F_k)/scale_k; the part
        linear in those symbols yields Delta.  Requires reduce(g) = 0.
        """
        g = as_vector(g)
        n = self.frame.n
        base = self.frame.m
        deps_used = set()
        for p in g:
            deps_used |= p.deps()
        for rule in self.rules:
            deps_used |= rule.rhs.deps()
            deps_used.add(rule.lead[0])
        offset = max(deps_used | {base - 1}) + 1
        key = self.ranking.key

        raw_prol = {}

        def raw(k, tau):
            got = raw_prol.get((k, tau))
            if got is None:
                if not any(tau):
                    got = self.rules[k].rhs_exact
                else:
                    i = next(j for j, q in enumerate(tau) if q)
                    lower = tuple(q - 1 if j == i else q for j, q in enumerate(tau))
                    got = raw(k, lower).total(i)
                raw_prol[(k, tau)] = got
            return got

        rows = []
        for comp, p in enumerate(g):
            while True:
                best = None
                best_k = None
                for jet in p.jetvars():
                    if jet[0] >= offset:
                        continue
                    k = self.rule_for(jet)
                    if k is not None and (best is None or key(jet) > key(best)):
                        best = jet
                        best_k = k
                if best is None:
                    break
                tau = index_sub(best[1], self.rules[best_k].lead[1])
                phi = DiffPoly.jet(n, offset + best_k, tau)
                repl = raw(best_k, tau) + phi * (1 / self.rules[best_k].scale)
                p = p.subst_jet(best, repl)
            rows.append(p)

        entries = {}
        zero_residual = True
        for comp, p in enumerate(rows):
            for (jets, xe), c in p.terms.items():
                phis = [(v, e) for (v, e) in jets if v[0] >= offset]
                deg = sum(e for _, e in phis)
                if deg == 0:
                    zero_residual = False
                elif deg == 1:
                    (dep, tau), _ = phis[0]
                    rest = tuple((v, e) for (v, e) in jets if v[0] < offset)
                    mono = (rest, xe)
                    k = dep - offset
                    ekey = (comp, k, tau)
                    add = DiffPoly(n, {mono: c}, _clean=True)
                    got = entries.get(ekey)
                    entries[ekey] = add if got is None else got + add
                # degree >= 2 in F-jets is dropped: the defining identity is
                # only needed to first order off the equation.
        if not zero_residual:
            raise NotOnEquation("expression does not vanish on the equation")
        entries = {k: self.reduce(a) for k, a in entries.items() if a}
        return CDiffOp(n, len(g), len(self.rules), entries)


def make_system(frame, originals, solved, ranking, passivity_depth=4) -> EquationSystem:
    """Validate a solved form against the original equations and build a system.

    ``solved`` is a list of (lead jet, rhs) pairs, one per component of
    ``originals``; each F_k must equal scale * (lead_k - rhs_k) for a
    nonzero rational scale.  Right-hand sides are brought to normal form
    with respect to the other rules before the system is sealed.
    """
    originals = as_vector(originals)
    if len(solved) != len(originals):
        raise MismatchedSolvedForm(
            f"{len(originals)} equations but {len(solved)} solved forms"
        )
    n = frame.n
    rules = []
    for k, (lead, rhs) in enumerate(solved):
        lead = (lead[0], tuple(lead[1]))
        f_k = originals[k]
        coeff = f_k.partial(lead)
        scale = coeff.const_value()
        if scale is None or scale == 0:
            raise NonOrthonomic(
                f"equation {k}: lead must occur linearly with constant coefficient"
            )
        expected = (DiffPoly.jet(n, lead[0], lead[1]) - rhs) * scale
        if expected != f_k:
            raise MismatchedSolvedForm(
                f"equation {k}: F != scale*(lead - rhs) for the given solved form"
            )
        rules.append(Rule(lead, rhs, rhs, scale))

    key = ranking.key
    for k, rule in enumerate(rules):
        for jet in rule.rhs_exact.jetvars():
            if not key(jet) < key(rule.lead):
                raise NonOrthonomic(
                    f"equation {k}: lead is not ranking-maximal in its solved form"
                )
    for a in range(len(rules)):
        for b in range(len(rules)):
            if a != b and rules[a].lead[0] == rules[b].lead[0]:
                if index_le(rules[a].lead[1], rules[b].lead[1]):
                    raise NonOrthonomic(
                        f"lead of equation {b} is a prolongation of equation {a}'s"
                    )

    # Bring right-hand sides to mutual normal form (rules with reducible
    # sides still present the same prolongation, but normal forms make the
    # rewrite system orthonomic).
    for _ in range(50):
        system = EquationSystem(frame, originals, rules, ranking, passivity_depth)
        normalized = [system.reduce(r.rhs) for r in rules]
        if all(p == r.rhs for p, r in zip(normalized, rules)):
            break
        rules = [
            Rule(r.lead, p, r.rhs_exact, r.scale)
            for r, p in zip(rules, normalized)
        ]
    else:
        raise NonOrthonomic("solved forms do not normalize against each other")

    _check_passivity(system, passivity_depth)
    return system


def _multi_indices_upto(n, depth):
    if depth < 0:
        return
    stack = [(0,) * n]
    seen = set(stack)
    while stack:
        idx = stack.pop()
        yield idx
        if sum(idx) < depth:
            for i in range(n):
                up = tuple(q + 1 if k == i else q for k, q in enumerate(idx))
                if up not in seen:
                    seen.add(up)
                    stack.append(up)


def _check_passivity(system: EquationSystem, depth: int):
    """Cross-derivative compatibility of overlapping rules, to finite depth."""
    rules = system.rules
    n = system.frame.n
    for a in range(len(rules)):
        for b in range(a + 1, len(rules)):
            if rules[a].lead[0] != rules[b].lead[0]:
                continue
            la, lb = rules[a].lead[1], rules[b].lead[1]
            lcm = tuple(max(p, q) for p, q in zip(la, lb))
            ta = index_sub(lcm, la)
            tb = index_sub(lcm, lb)
            for nu in _multi_indices_upto(n, depth):
                da = system.reduce(system.rules[a].rhs.total_multi(
                    tuple(p + q for p, q in zip(ta, nu))))
                db = system.reduce(system.rules[b].rhs.total_multi(
                    tuple(p + q for p, q in zip(tb, nu))))
                residual = da - db
                if not residual.is_zero():
                    raise PassivityFailure(sum(nu), residual)


def solve_orthonomic(frame, originals, ranking, passivity_depth=4) -> EquationSystem:
    """Solve each equation for its ranking-maximal jet and build the system.

    The maximal jet must occur linearly with a constant coefficient; this
    keeps solved forms polynomial (no division by jet expressions).
    """
    originals = as_vector(originals)
    n = frame.n
    solved = []
    for k, f_k in enumerate(originals):
        jets = f_k.jetvars()
        if not jets:
            raise NonOrthonomic(f"equation {k} contains no jet variables")
        lead = ranking.max_jet(jets)
        coeff = f_k.partial(lead)
        scale = coeff.const_value()
        if scale is None or scale == 0:
            raise NonOrthonomic(
                f"equation {k}: maximal jet occurs nonlinearly or with "
                "non-constant coefficient"
            )
        rhs = DiffPoly.jet(n, lead[0], lead[1]) - f_k * (1 / scale)
        solved.append((lead, rhs))
    return make_system(frame, originals, solved, ranking, passivity_depth)


# -- conservation laws ---------------------------------------------------


@dataclass(frozen=True)
class GenFn:
    """Generating function of a conservation law, certified on construction."""

    home: EquationSystem
    psi: VectorFunction


def make_genfn(system: EquationSystem, psi) -> GenFn:
    psi = as_vector(psi)
    residual = system.genfn_residual(psi)
    if not residual.is_zero():
        raise NotAGenFn(residual)
    return GenFn(system, psi)


@dataclass(frozen=True)
class ConservedCurrent:
    """One density per independent variable, with vanishing total divergence."""

    home: EquationSystem
    components: VectorFunction

    def divergence(self) -> DiffPoly:
        acc = DiffPoly.zero(self.components.n)
        for i, s in enumerate(self.components):
            acc = acc + s.total(i)
        return acc


def make_current(system: EquationSystem, components) -> ConservedCurrent:
    components = as_vector(components)
    if len(components) != system.frame.n:
        raise DimensionMismatch("need one current component per independent variable")
    current = ConservedCurrent(system, components)
    if not system.reduce(current.divergence()).is_zero():
        raise NotConserved("total divergence does not vanish on the equation")
    return current


def current_to_genfn(system: EquationSystem, current) -> GenFn:
    """Generating function of a conserved current: adjoint factor applied to 1."""
    if not isinstance(current, ConservedCurrent):
        current = make_current(system, current)
    delta = system.factor_through_f(current.divergence())
    ones = VectorFunction([DiffPoly.const(system.frame.n, 1)])
    psi = system.reduce_vector(delta.adjoint().apply(ones))
    return make_genfn(system, psi)
