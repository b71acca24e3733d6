"""Independent oracle for total derivatives and variational derivatives.

Translates kernel polynomials into sympy expressions over opaque symbols
and computes the total derivative with sympy's own differentiation (the
function-substitution trick), so the comparison does not share code with
the kernel's chain-rule implementation.
"""

import sympy

from hamcheck import DiffPoly


def _jet_symbol(dep, idx):
    return sympy.Symbol("j_" + str(dep) + "_" + "_".join(map(str, idx)))


def _x_symbol(i):
    return sympy.Symbol(f"x{i}")


def to_sympy(p: DiffPoly):
    total = sympy.Integer(0)
    for (jets, xe), c in p.terms.items():
        term = sympy.Rational(c.numerator, c.denominator)
        for i, e in enumerate(xe):
            if e:
                term *= _x_symbol(i) ** e
        for (dep, idx), e in jets:
            term *= _jet_symbol(dep, idx) ** e
        total += term
    return sympy.expand(total)


def from_kernel_equal(p: DiffPoly, expr) -> bool:
    return sympy.expand(to_sympy(p) - expr) == 0


def sympy_total_derivative(p: DiffPoly, i: int):
    """Total derivative computed on the sympy side.

    Each jet symbol is temporarily made a function of x_i; sympy's diff
    produces Derivative nodes which are then renamed to the prolonged jet
    symbols.
    """
    expr = to_sympy(p)
    x = _x_symbol(i)
    jets = []
    for (jets_part, _) in p.terms:
        for (dep, idx), _e in jets_part:
            jets.append((dep, idx))
    jets = sorted(set(jets))
    funcs = {_jet_symbol(dep, idx): sympy.Function(f"F_{dep}_" + "_".join(map(str, idx)))(x)
             for dep, idx in jets}
    expr = expr.subs(funcs)
    expr = sympy.diff(expr, x)
    back = {}
    for (dep, idx), _f in zip(jets, funcs.values()):
        up = tuple(q + 1 if k == i else q for k, q in enumerate(idx))
        back[sympy.Derivative(funcs[_jet_symbol(dep, idx)], x)] = _jet_symbol(dep, up)
        back[funcs[_jet_symbol(dep, idx)]] = _jet_symbol(dep, idx)
    return sympy.expand(expr.subs(back))
