"""Variational bivectors and trivectors: certification, Schouten bracket,
Poisson brackets and Magri hierarchies.

Multivectors are represented directly as multilinear operators evaluated
on formal argument dependents; skew symmetry enters through explicit
signed symmetrization, so the whole kernel stays commutative.
"""

from __future__ import annotations

from dataclasses import dataclass

from .frame import Frame
from .ops import CDiffOp, DimensionMismatch, linearize
from .poly import DiffPoly, VectorFunction, as_vector, euler, evolutionary_apply, formal_vector
from .systems import (
    EquationSystem,
    GenFn,
    HamcheckError,
    NonOrthonomic,
    make_genfn,
    make_system,
)


class NotABivector(HamcheckError):
    def __init__(self, residual: CDiffOp):
        self.residual = residual
        super().__init__("operator fails the bivector condition on this system")


class ConstraintNotOrthonomic(HamcheckError):
    pass


@dataclass(frozen=True)
class Bivector:
    """Operator certified against a system, with its extracted remainder.

    ``b_op`` carries the bilinear remainder of the certification identity,
    written as an operator in the first slot whose coefficients are linear
    in the formal dependents ``b_args`` (the second slot), over ``b_frame``.
    """

    home: EquationSystem
    op: CDiffOp
    b_op: CDiffOp
    b_frame: Frame
    b_args: tuple

    def b_star(self, psi1: VectorFunction, psi2_args) -> VectorFunction:
        """Remainder adjoint in the first slot, evaluated at two argument blocks.

        ``psi2_args`` are dependent indices substituted for the stored
        formal slot; ``psi1`` is the vector the adjoint acts on.
        """
        relabel = {a: b for a, b in zip(self.b_args, psi2_args)}
        adj = self.b_op.adjoint().map_coeffs(lambda p: p.relabel_deps(relabel))
        return self.home.reduce_vector(adj.apply(psi1))


def bivector_residual(system: EquationSystem, op: CDiffOp) -> CDiffOp:
    """Reduced defect of the bivector condition; zero iff the condition holds."""
    lin = system.linearization()
    if op.rows != lin.cols or op.cols != lin.rows:
        raise DimensionMismatch(
            f"operator must be {lin.cols}x{lin.rows} on this system"
        )
    theta = lin.compose(op) - op.adjoint().compose(system.adjoint_linearization())
    return system.restrict_op(theta)


def _theta(system: EquationSystem, op: CDiffOp) -> CDiffOp:
    lin = system.linearization()
    return lin.compose(op) - op.adjoint().compose(system.adjoint_linearization())


def certify_bivector(system: EquationSystem, op: CDiffOp) -> Bivector:
    """Certify the bivector condition and extract the bilinear remainder.

    Raises NotABivector carrying the nonzero reduced residual on failure.
    """
    residual = bivector_residual(system, op)
    if not residual.is_zero():
        raise NotABivector(residual)
    l = len(system.rules)
    names = system.frame.fresh_names("q", l)
    b_frame, args = system.frame.extend(names, formal=True)
    theta_psi = _theta(system, op).apply(formal_vector(system.frame.n, args))
    b_op = system.factor_through_f(theta_psi)
    return Bivector(system, op, b_op, b_frame, args)


@dataclass(frozen=True)
class TrivectorRep:
    """Bilinear map (psi1, psi2) -> vector, stored on an extended frame."""

    home: EquationSystem
    frame: Frame
    arg1: tuple
    arg2: tuple
    entries: VectorFunction

    def evaluate(self, psi1, psi2) -> VectorFunction:
        psi1 = as_vector(psi1)
        psi2 = as_vector(psi2)

        def subst(p: DiffPoly) -> DiffPoly:
            for ids, vals in ((self.arg1, psi1), (self.arg2, psi2)):
                for d, val in zip(ids, vals):
                    p = p.subst_dep(d, val)
            return p

        return self.entries.map(subst)


@dataclass(frozen=True)
class TrivialityVerdict:
    """Outcome of a skew-density triviality test.

    ``exact`` marks the free-jet test (complete); otherwise a zero verdict
    is trusted but a residual does not by itself refute triviality.
    """

    zero: bool
    exact: bool
    residual: DiffPoly = None
    residual_dep: int = None
    frame: Frame = None


def _lin_a_psi(system: EquationSystem, op: CDiffOp, arg_ids) -> CDiffOp:
    """Linearization of the operator along one formal argument block:
    l_{A,psi} = l_{A(psi)} - A o l_psi, varying physical dependents only."""
    n = system.frame.n
    psi = formal_vector(n, arg_ids)
    phys = system.frame.physical
    first = linearize(op.apply(psi), phys)
    second = op.compose(linearize(psi, phys))
    return first - second


def schouten(system: EquationSystem, b1: Bivector, b2: Bivector) -> TrivectorRep:
    """Variational Schouten bracket of two certified bivectors.

    Evaluates the six-term formula on two fresh formal argument blocks.
    The remainder terms always come from the certified factorization: on
    evolution systems with skew operators this agrees with taking the
    adjoint of the argument-linearization directly, but the factorization
    stays correct for non-skew representatives as well.
    """
    if b1.home is not system or b2.home is not system:
        raise HamcheckError("bivectors must be certified on the given system")
    l = len(system.rules)
    n = system.frame.n
    names1 = system.frame.fresh_names("p", 2 * l)
    frame_ext, ids = system.frame.extend(names1, formal=True)
    a1_ids, a2_ids = ids[:l], ids[l:]
    psi1 = formal_vector(n, a1_ids)
    psi2 = formal_vector(n, a2_ids)

    a1, a2 = b1.op, b2.op

    def b_star(biv: Bivector, psi_a: VectorFunction, psi_b_ids) -> VectorFunction:
        return biv.b_star(psi_a, psi_b_ids)

    terms = [
        _lin_a_psi(system, a1, a1_ids).apply(a2.apply(psi2)),
        -_lin_a_psi(system, a1, a2_ids).apply(a2.apply(psi1)),
        _lin_a_psi(system, a2, a1_ids).apply(a1.apply(psi2)),
        -_lin_a_psi(system, a2, a2_ids).apply(a1.apply(psi1)),
        -a1.apply(b_star(b2, psi1, a2_ids)),
        -a2.apply(b_star(b1, psi1, a2_ids)),
    ]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    total = system.reduce_vector(total)
    return TrivectorRep(system, frame_ext, a1_ids, a2_ids, total)


def _signed_symmetrization(density: DiffPoly, blocks) -> DiffPoly:
    """Sum of sgn(pi) * density with argument blocks permuted by pi."""
    import itertools

    k = len(blocks)
    out = DiffPoly.zero(density.n)
    for perm in itertools.permutations(range(k)):
        sign = 1
        seen = [False] * k
        for i in range(k):
            if seen[i]:
                continue
            j, length = i, 0
            while not seen[j]:
                seen[j] = True
                j = perm[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
        mapping = {}
        for i in range(k):
            for a, b in zip(blocks[i], blocks[perm[i]]):
                mapping[a] = b
        piece = density.relabel_deps(mapping)
        out = out + (piece if sign > 0 else -piece)
    return out


def constraint_system(system: EquationSystem, frame_ext: Frame, blocks):
    """Joint rewrite system: the equation plus the adjoint-linearization
    constraints on each formal argument block, in orthonomic form."""
    n = system.frame.n
    lstar = system.restrict_op(system.adjoint_linearization())
    originals = list(system.originals)
    solved = [(r.lead, r.rhs_exact) for r in system.rules]
    for ids in blocks:
        rows = lstar.apply(formal_vector(n, ids))
        for row in rows:
            jets = [v for v in row.jetvars() if v[0] in ids]
            if not jets:
                raise ConstraintNotOrthonomic(
                    "constraint row contains no argument jets"
                )
            lead = system.ranking.max_jet(jets)
            coeff = row.partial(lead)
            scale = coeff.const_value()
            if scale is None or scale == 0:
                raise ConstraintNotOrthonomic(
                    "constraint cannot be solved for its maximal argument jet"
                )
            rhs = DiffPoly.jet(n, lead[0], lead[1]) - row * (1 / scale)
            originals.append(row)
            solved.append((lead, rhs))
    try:
        return make_system(
            frame_ext, originals, solved, system.ranking, system.passivity_depth
        )
    except NonOrthonomic as exc:
        raise ConstraintNotOrthonomic(str(exc)) from exc


def _euler_residuals(frame: Frame, density: DiffPoly):
    """Euler derivatives with respect to every dependent, physical and formal."""
    all_deps = tuple(range(frame.m))
    return euler(frame, density, deps=all_deps)


def _pick_residual(frame: Frame, residuals: VectorFunction):
    """Deterministic choice of the smallest nonzero component."""
    from .render import poly_text

    nonzero = [
        (len(p.terms), poly_text(frame, p), dep, p)
        for dep, p in enumerate(residuals)
        if not p.is_zero()
    ]
    if not nonzero:
        return None
    nonzero.sort(key=lambda t: (t[0], t[1]))
    _, _, dep, p = nonzero[0]
    return dep, p


def skew_density_verdict(
    system: EquationSystem, frame_ext: Frame, density: DiffPoly, blocks
) -> TrivialityVerdict:
    """Decide whether a fully skew density is a trivial functional.

    On evolution systems whose density avoids the evolution direction the
    free-jet Euler test is exact; otherwise the density is reduced modulo
    the equation together with the orthonomized argument constraints, and
    a zero verdict of the Euler test is a sound semi-decision.
    """
    e = system.is_evolution()
    if e is not None and not density.involves_direction(e):
        residuals = _euler_residuals(frame_ext, density)
        picked = _pick_residual(frame_ext, residuals)
        if picked is None:
            return TrivialityVerdict(True, True, frame=frame_ext)
        return TrivialityVerdict(False, True, picked[1], picked[0], frame_ext)
    joint = constraint_system(system, frame_ext, blocks)
    reduced = joint.reduce(density)
    residuals = _euler_residuals(frame_ext, reduced)
    picked = _pick_residual(frame_ext, residuals)
    if picked is None:
        return TrivialityVerdict(True, False, frame=frame_ext)
    return TrivialityVerdict(False, False, picked[1], picked[0], frame_ext)


def is_zero_trivector(system: EquationSystem, tri: TrivectorRep) -> TrivialityVerdict:
    """Zero test for a trivector: skew-symmetrize the pairing with a third
    argument block and run the triviality test on the resulting density."""
    l = len(system.rules)
    if len(tri.entries) != l:
        raise DimensionMismatch("trivector arity does not match the system")
    n = system.frame.n
    names = tri.frame.fresh_names("r", l)
    frame3, ids3 = tri.frame.extend(names, formal=True)
    density = DiffPoly.zero(n)
    for k in range(l):
        density = density + DiffPoly.jet(n, ids3[k], (0,) * n) * tri.entries[k]
    blocks = (tri.arg1, tri.arg2, ids3)
    skew = _signed_symmetrization(density, blocks)
    return skew_density_verdict(system, frame3, skew, blocks)


def is_hamiltonian(system: EquationSystem, op: CDiffOp) -> bool:
    """Bivector condition plus vanishing self-bracket."""
    try:
        biv = certify_bivector(system, op)
    except NotABivector:
        return False
    return is_zero_trivector(system, schouten(system, biv, biv)).zero


def poisson(system: EquationSystem, biv: Bivector, psi1, psi2) -> VectorFunction:
    """Poisson bracket of two generating functions under a Hamiltonian operator."""
    psi1 = psi1.psi if isinstance(psi1, GenFn) else as_vector(psi1)
    psi2 = psi2.psi if isinstance(psi2, GenFn) else as_vector(psi2)
    for psi in (psi1, psi2):
        residual = system.genfn_residual(psi)
        if not residual.is_zero():
            raise HamcheckError("poisson arguments must be generating functions")
    flow = system.reduce_vector(biv.op.apply(psi1))
    delta = system.factor_through_f(system.linearization().apply(flow))
    out = evolutionary_apply(system.frame, flow, psi2) + delta.adjoint().apply(psi2)
    out = system.reduce_vector(out)
    residual = system.genfn_residual(out)
    if not residual.is_zero():
        raise HamcheckError("poisson bracket failed to close on generating functions")
    return out


@dataclass(frozen=True)
class MagriChain:
    """Generating functions with each A1-image equal to the next A2-image."""

    home: EquationSystem
    entries: tuple
    densities: tuple = None


def magri_defects(system, b1: Bivector, b2: Bivector, chain) -> list:
    """Reduced defects A1(psi_i) - A2(psi_{i+1}) for adjacent entries."""
    vecs = [g.psi if isinstance(g, GenFn) else as_vector(g) for g in chain]
    out = []
    for a, b in zip(vecs, vecs[1:]):
        diff = b1.op.apply(a) - b2.op.apply(b)
        out.append(system.reduce_vector(diff))
    return out


def verify_magri(system, b1, b2, chain, check_poisson=False) -> bool:
    """Adjacent Magri relations, optionally plus pairwise bracket vanishing."""
    if any(not d.is_zero() for d in magri_defects(system, b1, b2, chain)):
        return False
    if check_poisson:
        vecs = [g.psi if isinstance(g, GenFn) else as_vector(g) for g in chain]
        for i in range(len(vecs)):
            for j in range(i + 1, len(vecs)):
                for biv in (b1, b2):
                    if not poisson(system, biv, vecs[i], vecs[j]).is_zero():
                        return False
    return True


def make_chain(system, b1, b2, vecs, densities=None) -> MagriChain:
    entries = tuple(
        g if isinstance(g, GenFn) else make_genfn(system, g) for g in vecs
    )
    chain = MagriChain(system, entries, densities)
    if not verify_magri(system, b1, b2, entries):
        raise HamcheckError("adjacent entries do not satisfy the Magri relation")
    return chain
