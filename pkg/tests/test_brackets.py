import pytest

from hamcheck import (
    CDiffOp,
    DiffPoly,
    HamcheckError,
    NotABivector,
    TrivectorRep,
    VectorFunction,
    bivector_residual,
    certify_bivector,
    is_hamiltonian,
    is_zero_trivector,
    make_chain,
    poisson,
    schouten,
    verify_magri,
)
from hamcheck.brackets import _lin_a_psi
from hamcheck.parser import parse_op, parse_poly, parse_vector
from hamcheck.poly import formal_vector


def test_certify_kdv_pair(kdv, kdv_ops):
    a1, a2 = kdv_ops
    assert bivector_residual(kdv, a1).is_zero()
    assert bivector_residual(kdv, a2).is_zero()
    b1 = certify_bivector(kdv, a1)
    assert b1.b_op.is_zero()  # the first operator commutes exactly
    b2 = certify_bivector(kdv, a2)
    assert not b2.b_op.is_zero()


def test_certify_rejects_identity_with_residual(kdv, fr_u):
    with pytest.raises(NotABivector) as err:
        certify_bivector(kdv, CDiffOp.identity(fr_u.n))
    expected = parse_op(fr_u, "2*Dt - 2*Dx^3 - 12*u*Dx - 6*u_x")
    assert err.value.residual == expected


def test_certified_bivectors_are_skew_on_evolution(kdv, kdv3, kdv_ops, kdv3_ops):
    for system, ops in ((kdv, kdv_ops), (kdv3, kdv3_ops)):
        for op in ops:
            certify_bivector(system, op)
            assert system.restrict_op(op.adjoint() + op).is_zero()


def test_remainder_matches_argument_linearization_on_evolution(kdv, kdv_bivectors):
    # For an evolution system the extracted remainder operator coincides
    # with the linearization of the operator along its argument.
    b1, b2 = kdv_bivectors
    n = kdv.frame.n
    relabeled = b2.b_op
    shortcut = _lin_a_psi(kdv, b2.op, b2.b_args)
    assert kdv.restrict_op(relabeled - shortcut).is_zero()


def test_remainder_is_skew_after_symmetrization(kdv, kdv_bivectors):
    # B*(psi1, psi2) changes sign when the two arguments are swapped.
    _, b2 = kdv_bivectors
    frame, ids = kdv.frame.extend(kdv.frame.fresh_names("p", 2))
    psi1 = formal_vector(kdv.frame.n, ids[:1])
    value = b2.b_star(psi1, ids[1:])
    swap = {ids[0]: ids[1], ids[1]: ids[0]}
    swapped = value.map(lambda p: p.relabel_deps(swap))
    assert (value + swapped).map(kdv.reduce).is_zero()


def test_schouten_dx_dx_vanishes_identically(kdv, kdv_bivectors):
    b1, _ = kdv_bivectors
    tri = schouten(kdv, b1, b1)
    assert tri.entries.is_zero()


def test_schouten_kdv_pair_zero(kdv, kdv_bivectors):
    b1, b2 = kdv_bivectors
    for pair in ((b1, b2), (b2, b2)):
        verdict = is_zero_trivector(kdv, schouten(kdv, *pair))
        assert verdict.zero and verdict.exact


def test_schouten_symmetric_in_slots(kdv, kdv_bivectors):
    b1, b2 = kdv_bivectors
    t12 = schouten(kdv, b1, b2)
    t21 = schouten(kdv, b2, b1)
    assert t12.entries == t21.entries


def test_schouten_requires_same_home(kdv, kdv3, kdv_bivectors, kdv3_ops):
    b1, _ = kdv_bivectors
    other = certify_bivector(kdv3, kdv3_ops[0])
    with pytest.raises(HamcheckError):
        schouten(kdv, b1, other)


def test_trivector_evaluate_is_bilinear(kdv, kdv_bivectors, fr_u):
    b1, b2 = kdv_bivectors
    tri = schouten(kdv, b2, b2)
    u = parse_poly(fr_u, "u")
    ux = parse_poly(fr_u, "u_x")
    left = tri.evaluate([2 * u], [ux])
    right = tri.evaluate([u], [ux])
    assert left == VectorFunction([2 * right[0]])


def test_symmetric_map_is_zero_trivector(kdv):
    # symmetric in the two arguments: annihilated by skew-symmetrization
    n = kdv.frame.n
    frame, ids = kdv.frame.extend(kdv.frame.fresh_names("p", 2))
    p1 = DiffPoly.jet(n, ids[0], (0, 0))
    p2 = DiffPoly.jet(n, ids[1], (0, 0))
    tri = TrivectorRep(kdv, frame, ids[:1], ids[1:], VectorFunction([p1 * p2]))
    assert is_zero_trivector(kdv, tri).zero
    zero = TrivectorRep(kdv, frame, ids[:1], ids[1:],
                        VectorFunction([DiffPoly.zero(n)]))
    assert is_zero_trivector(kdv, zero).zero


def test_first_order_skew_pairing_cancels(kdv):
    # psi1 * D_x(psi2) - psi2 * D_x(psi1): the signed symmetrization of the
    # associated density collapses (an odd density with a repeated factor),
    # so this is the zero trivector.
    n = kdv.frame.n
    frame, ids = kdv.frame.extend(kdv.frame.fresh_names("p", 2))
    p1 = DiffPoly.jet(n, ids[0], (0, 0))
    p2 = DiffPoly.jet(n, ids[1], (0, 0))
    tri = TrivectorRep(
        kdv, frame, ids[:1], ids[1:],
        VectorFunction([p1 * p2.total(0) - p2 * p1.total(0)]),
    )
    assert is_zero_trivector(kdv, tri).zero


def test_higher_order_skew_pairing_survives(kdv):
    # psi1' * psi2'' - psi2' * psi1'' pairs into the classical nonzero
    # cubic functional: the Euler test must report a residual.
    n = kdv.frame.n
    frame, ids = kdv.frame.extend(kdv.frame.fresh_names("p", 2))
    d1 = DiffPoly.jet(n, ids[0], (1, 0))
    d2 = DiffPoly.jet(n, ids[1], (1, 0))
    dd1 = DiffPoly.jet(n, ids[0], (2, 0))
    dd2 = DiffPoly.jet(n, ids[1], (2, 0))
    tri = TrivectorRep(
        kdv, frame, ids[:1], ids[1:], VectorFunction([d1 * dd2 - d2 * dd1])
    )
    verdict = is_zero_trivector(kdv, tri)
    assert not verdict.zero
    assert verdict.exact
    assert verdict.residual is not None


def test_is_hamiltonian(kdv, kdv_ops, fr_u):
    a1, a2 = kdv_ops
    assert is_hamiltonian(kdv, a1)
    assert is_hamiltonian(kdv, a2)
    assert not is_hamiltonian(kdv, CDiffOp.identity(fr_u.n))


def test_poisson_brackets_vanish_on_chain(kdv, kdv_bivectors, fr_u):
    b1, b2 = kdv_bivectors
    one = parse_vector(fr_u, "[1]")
    u = parse_vector(fr_u, "[u]")
    psi1 = parse_vector(fr_u, "[3*u^2 + u_xx]")
    assert poisson(kdv, b1, one, one).is_zero()
    assert poisson(kdv, b1, u, one).is_zero()
    assert poisson(kdv, b1, psi1, u).is_zero()
    assert poisson(kdv, b2, psi1, u).is_zero()


def test_poisson_rejects_non_genfn(kdv, kdv_bivectors, fr_u):
    b1, _ = kdv_bivectors
    with pytest.raises(HamcheckError):
        poisson(kdv, b1, parse_vector(fr_u, "[u_x]"), parse_vector(fr_u, "[u]"))


def test_verify_magri(kdv, kdv_bivectors, fr_u):
    b1, b2 = kdv_bivectors
    psi1 = parse_vector(fr_u, "[3*u^2 + u_xx]")
    psi2 = parse_vector(fr_u, "[u]")
    psi3 = parse_vector(fr_u, "[1/2]")
    assert verify_magri(kdv, b1, b2, [psi1, psi2, psi3], check_poisson=True)
    assert verify_magri(kdv, b1, b2, [])
    assert not verify_magri(kdv, b1, b2, [psi2, psi2])
    chain = make_chain(kdv, b1, b2, [psi1, psi2, psi3])
    assert len(chain.entries) == 3
    with pytest.raises(HamcheckError):
        make_chain(kdv, b1, b2, [psi2, psi2])


def test_three_component_matrices_certify(kdv3, kdv3_ops):
    b1m, b2m = kdv3_ops
    assert bivector_residual(kdv3, b1m).is_zero()
    assert bivector_residual(kdv3, b2m).is_zero()


def test_three_component_flows(kdv3, kdv3_ops, fr_uvw):
    from hamcheck import euler

    b1m, b2m = kdv3_ops
    h1 = parse_poly(fr_uvw, "u*w - 1/2*v^2 + 2*u^3")
    h2 = parse_poly(fr_uvw, "-3/2*u^2 - 1/2*w")
    flow = parse_vector(fr_uvw, "[v, w, u_t - 6*u*v]")
    assert kdv3.reduce_vector(b1m.apply(euler(fr_uvw, h1))) == flow
    assert kdv3.reduce_vector(b2m.apply(euler(fr_uvw, h2))) == flow


def test_three_component_schouten_checks(kdv3, kdv3_ops):
    b1 = certify_bivector(kdv3, kdv3_ops[0])
    b2 = certify_bivector(kdv3, kdv3_ops[1])
    for pair in ((b1, b1), (b1, b2), (b2, b2)):
        verdict = is_zero_trivector(kdv3, schouten(kdv3, *pair))
        assert verdict.zero


def test_camassa_holm_scalar(ch, fr_u):
    a1 = parse_op(fr_u, "Dx")
    a2 = parse_op(fr_u, "-Dt - u*Dx + u_x")
    assert bivector_residual(ch, a1).is_zero()
    assert bivector_residual(ch, a2).is_zero()
    b1 = certify_bivector(ch, a1)
    b2 = certify_bivector(ch, a2)
    verdict = is_zero_trivector(ch, schouten(ch, b1, b2))
    assert verdict.zero and not verdict.exact  # constrained semi-decision


def test_camassa_holm_two_component(ch2, ch2_ops, fr_um):
    a1p, a2p = ch2_ops
    assert bivector_residual(ch2, a1p).is_zero()
    assert bivector_residual(ch2, a2p).is_zero()
    # the lower-left entries are the scalar-form operators up to sign
    b1 = parse_op(fr_um, "-(2*m*Dx + m_x)")
    b2 = parse_op(fr_um, "Dx^3 - Dx")
    a1p_21 = CDiffOp(
        fr_um.n, 1, 1,
        {(0, 0, s): a for (r, c, s), a in a1p.entries.items() if (r, c) == (1, 0)},
    )
    a2p_21 = CDiffOp(
        fr_um.n, 1, 1,
        {(0, 0, s): a for (r, c, s), a in a2p.entries.items() if (r, c) == (1, 0)},
    )
    assert a1p_21 == -1 * b2
    assert a2p_21 == -1 * b1


def test_non_skew_representative_brackets(kdv, kdv_bivectors, fr_u):
    # A time-derivative-bearing representative of the second structure's
    # class (differing by a trivial bivector) certifies without being
    # skew, and all its brackets with the pair still vanish.
    from hamcheck.parser import parse_op

    rep = parse_op(fr_u, "Dt - 2*u*Dx + 2*u_x")
    assert bivector_residual(kdv, rep).is_zero()
    assert not kdv.restrict_op(rep.adjoint() + rep).is_zero()  # not skew
    brep = certify_bivector(kdv, rep)
    b1, b2 = kdv_bivectors
    for other in (brep, b1, b2):
        assert is_zero_trivector(kdv, schouten(kdv, brep, other)).zero


def test_poisson_boost_central_extension(kdv, kdv_bivectors, fr_u):
    # The Galilean boost generating function pairs non-trivially with the
    # mass one: the bracket is the constant function, antisymmetrically.
    boost = parse_vector(fr_u, "[x + 6*t*u]")
    assert kdv.is_genfn(boost)
    b1, b2 = kdv_bivectors
    one = parse_vector(fr_u, "[1]")
    u = parse_vector(fr_u, "[u]")
    assert poisson(kdv, b1, boost, u) == parse_vector(fr_u, "[1]")
    assert poisson(kdv, b1, u, boost) == parse_vector(fr_u, "[-1]")
    assert poisson(kdv, b1, boost, one).is_zero()
    # under the second structure the boost steps down the hierarchy
    assert poisson(kdv, b2, boost, u) == parse_vector(fr_u, "[6*u]")
    assert poisson(kdv, b2, boost, one) == parse_vector(fr_u, "[2]")


def test_poisson_on_non_evolution_system(ch, fr_u):
    one = parse_vector(fr_u, "[1]")
    u = parse_vector(fr_u, "[u]")
    assert ch.is_genfn(one) and ch.is_genfn(u)
    c1 = certify_bivector(ch, parse_op(fr_u, "Dx"))
    c2 = certify_bivector(ch, parse_op(fr_u, "-Dt - u*Dx + u_x"))
    assert poisson(ch, c1, u, one).is_zero()
    assert poisson(ch, c2, u, one).is_zero()
    assert poisson(ch, c2, u, u).is_zero()
