"""Deformation of a bi-Hamiltonian system by adjoint constraints.

Given certified operators A1, A2 on F = 0, the deformed system couples
fresh dependents w through F + A1*(w) = 0, A2*(w) = 0.  The deformed
system carries block bivectors assembled from A1, A2 and the adjoint of
the linearization of F + A1*(w) + A2*(w), and Magri hierarchies lift to
it entrywise.
"""

from __future__ import annotations

from dataclasses import dataclass

from .brackets import Bivector, MagriChain, certify_bivector, magri_defects
from .frame import Ranking
from .ops import CDiffOp, linearize
from .poly import DiffPoly, VectorFunction, as_vector, euler, formal_vector
from .systems import (
    EquationSystem,
    GenFn,
    HamcheckError,
    make_genfn,
    solve_orthonomic,
)


class NeedSuccessor(HamcheckError):
    pass


class MagriPrecondition(HamcheckError):
    pass


@dataclass(frozen=True)
class DeformedSystem:
    """Deformed system with its assembled block bivectors."""

    base: EquationSystem
    a1: Bivector
    a2: Bivector
    system: EquationSystem
    w_ids: tuple
    lin_block: CDiffOp
    a1_til: Bivector
    a2_til: Bivector


def deform(
    base: EquationSystem,
    a1: Bivector,
    a2: Bivector,
    ranking: Ranking = None,
    passivity_depth: int = None,
    w_stem: str = "w",
) -> DeformedSystem:
    """Build the deformed system and certify its block bivectors.

    The w dependents are physical unknowns of the new system.  The block
    operators are [[A1, -A1], [0, L]] and [[A2, -A2], [-L, 0]] where L is
    the adjoint of the linearization of F + A1*(w) + A2*(w) with respect
    to the original dependents; certification on the deformed system is
    the acceptance test for the construction.
    """
    if not isinstance(a1, Bivector) or not isinstance(a2, Bivector):
        raise HamcheckError("deform needs certified bivectors")
    if a1.home is not base or a2.home is not base:
        raise HamcheckError("bivectors must be certified on the base system")
    l = len(base.rules)
    m = base.frame.m
    if l != m:
        raise HamcheckError("deformation needs a square base system")
    frame0 = base.frame
    if l == 1 and w_stem not in frame0.dependents and w_stem not in frame0.independents:
        names = (w_stem,)
    else:
        names = frame0.fresh_names(w_stem, l)
    frame, w_ids = frame0.extend(names, formal=False)
    n = frame.n

    wvec = formal_vector(n, w_ids)
    a1_star_w = a1.op.adjoint().apply(wvec)
    a2_star_w = a2.op.adjoint().apply(wvec)
    g = as_vector(base.originals) + a1_star_w
    h = a2_star_w
    theta = g + h
    originals = VectorFunction(list(g) + list(h))

    if ranking is None:
        ranking = base.ranking
    if passivity_depth is None:
        passivity_depth = base.passivity_depth
    system = solve_orthonomic(frame, originals, ranking, passivity_depth)

    lin_block = linearize(theta, frame0.physical).adjoint()
    zero = CDiffOp.zero(n, l, l)
    a1_til_op = CDiffOp.block([[a1.op, -a1.op], [zero, lin_block]])
    a2_til_op = CDiffOp.block([[a2.op, -a2.op], [-lin_block, zero]])
    a1_til = certify_bivector(system, a1_til_op)
    a2_til = certify_bivector(system, a2_til_op)
    return DeformedSystem(
        base, a1, a2, system, w_ids, lin_block, a1_til, a2_til
    )


@dataclass(frozen=True)
class LiftedChain:
    """Lifted hierarchy with per-entry certification outcomes."""

    chain: MagriChain
    genfn_residuals: tuple  # one reduced residual vector per lifted entry
    magri_defects: tuple

    @property
    def all_certified(self) -> bool:
        return all(r.is_zero() for r in self.genfn_residuals) and all(
            d.is_zero() for d in self.magri_defects
        )


def lift_hierarchy(deformed: DeformedSystem, chain: MagriChain) -> LiftedChain:
    """Lift a Magri hierarchy to the deformed system as pairs (psi_i, -psi_{i+1}).

    Certification failures are reported per entry rather than raised: the
    lifting theorem carries unformalized technical assumptions.
    """
    if chain.home is not deformed.base:
        raise HamcheckError("chain must live on the base system")
    vecs = [g.psi if isinstance(g, GenFn) else as_vector(g) for g in chain.entries]
    if not vecs:
        return LiftedChain(MagriChain(deformed.system, ()), (), ())
    if len(vecs) == 1:
        raise NeedSuccessor("lifting consumes psi_{i+1}; a lone entry has none")
    system = deformed.system
    lifted_vecs = []
    residuals = []
    for a, b in zip(vecs, vecs[1:]):
        pair = VectorFunction(list(a) + [-p for p in b])
        lifted_vecs.append(pair)
        residuals.append(system.genfn_residual(pair))
    entries = tuple(
        make_genfn(system, v) if r.is_zero() else v
        for v, r in zip(lifted_vecs, residuals)
    )
    defects = tuple(
        magri_defects(system, deformed.a1_til, deformed.a2_til, lifted_vecs)
    )
    lifted = MagriChain(system, entries, None)
    return LiftedChain(lifted, tuple(residuals), defects)


def check_conserved(deformed: DeformedSystem, psi_i, psi_next) -> bool:
    """Conservation of a base Magri pair on the deformed system.

    Mechanizes the pairing chain of the conservation proof: the density
    <psi_i, flow> + <psi_{i+1}, A2*(w)> must have vanishing variational
    derivatives with respect to every dependent of the deformed system;
    the second summand vanishes on the deformed equation, so the flow
    pairing is a total divergence there.
    """
    base = deformed.base
    psi_i = psi_i.psi if isinstance(psi_i, GenFn) else as_vector(psi_i)
    psi_next = psi_next.psi if isinstance(psi_next, GenFn) else as_vector(psi_next)
    defect = base.reduce_vector(
        deformed.a1.op.apply(psi_i) - deformed.a2.op.apply(psi_next)
    )
    if not defect.is_zero():
        raise MagriPrecondition("pair does not satisfy the base Magri relation")

    system = deformed.system
    n = system.frame.n
    e = base.is_evolution()
    if e is None:
        raise HamcheckError("conservation check needs an evolution base system")
    flow = []
    for dep in base.frame.physical:
        for rule in system.rules:
            if rule.lead[0] == dep and sum(rule.lead[1]) == 1 and rule.lead[1][e]:
                flow.append(rule.rhs)
                break
        else:
            raise HamcheckError("deformed system lost its evolution rules")
    flow = VectorFunction(flow)

    wvec = formal_vector(n, deformed.w_ids)
    constraint = deformed.a2.op.adjoint().apply(wvec)
    density = DiffPoly.zero(n)
    for p, f in zip(psi_i, flow):
        density = density + p * f
    for p, c in zip(psi_next, constraint):
        density = density + p * c
    residuals = euler(system.frame, density, deps=tuple(range(system.frame.m)))
    return residuals.is_zero()
