"""Exact sparse differential polynomials in jet variables.

A monomial is a pair ``(jets, xexp)``: a sorted tuple of
``((dep, idx), exponent)`` jet factors and a tuple of exponents of the
explicit independent variables.  Coefficients are arbitrary-precision
rationals; there is no floating point anywhere in the kernel.
"""

from __future__ import annotations

from fractions import Fraction

from .frame import Frame

Mono = tuple

ONE = Fraction(1)


def mono_one(n: int) -> Mono:
    return ((), (0,) * n)


def mono_mul(a: Mono, b: Mono) -> Mono:
    ja, xa = a
    jb, xb = b
    if not ja:
        jets = jb
    elif not jb:
        jets = ja
    else:
        acc = dict(ja)
        for v, e in jb:
            acc[v] = acc.get(v, 0) + e
        jets = tuple(sorted(acc.items()))
    return (jets, tuple(p + q for p, q in zip(xa, xb)))


def mono_degree(m: Mono) -> int:
    jets, xe = m
    return sum(e for _, e in jets) + sum(xe)


def mono_sort_key(m: Mono):
    """Canonical term order: graded, then by jet factors, then x exponents."""
    return (mono_degree(m), m[0], m[1])


class DiffPoly:
    """Differential polynomial with exact rational coefficients.

    Instances are immutable by convention; all operations return new
    values, so polynomials can be shared freely between threads.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms=None, _clean: bool = False):
        self.n = n
        if not terms:
            self.terms = {}
        elif _clean:
            self.terms = terms
        else:
            clean = {}
            for m, c in terms.items():
                c = Fraction(c)
                if c:
                    clean[m] = c
            self.terms = clean

    # -- constructors ------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "DiffPoly":
        return cls(n, None, _clean=True)

    @classmethod
    def const(cls, n: int, c) -> "DiffPoly":
        c = Fraction(c)
        if not c:
            return cls.zero(n)
        return cls(n, {mono_one(n): c}, _clean=True)

    @classmethod
    def coord(cls, n: int, i: int) -> "DiffPoly":
        """The explicit independent variable x_i."""
        xe = tuple(1 if k == i else 0 for k in range(n))
        return cls(n, {((), xe): ONE}, _clean=True)

    @classmethod
    def jet(cls, n: int, dep: int, idx) -> "DiffPoly":
        idx = tuple(idx)
        if len(idx) != n or any(k < 0 for k in idx):
            raise ValueError(f"bad multi-index {idx!r}")
        mono = ((((dep, idx), 1),), (0,) * n)
        return cls(n, {mono: ONE}, _clean=True)

    # -- ring structure ----------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        res = dict(self.terms)
        for m, c in other.terms.items():
            s = res.get(m, 0) + c
            if s:
                res[m] = s
            elif m in res:
                del res[m]
        return DiffPoly(self.n, res, _clean=True)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly(self.n, {m: -c for m, c in self.terms.items()}, _clean=True)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = Fraction(other)
            if not c:
                return DiffPoly.zero(self.n)
            return DiffPoly(
                self.n, {m: q * c for m, q in self.terms.items()}, _clean=True
            )
        if not isinstance(other, DiffPoly):
            return NotImplemented
        res = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                s = res.get(m, 0) + c1 * c2
                if s:
                    res[m] = s
                elif m in res:
                    del res[m]
        return DiffPoly(self.n, res, _clean=True)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not supported")
        out = DiffPoly.const(self.n, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def _coerce(self, other):
        if isinstance(other, DiffPoly):
            return other
        if isinstance(other, (int, Fraction)):
            return DiffPoly.const(self.n, other)
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DiffPoly.const(self.n, other)
        if not isinstance(other, DiffPoly):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        if not self.terms:
            return "DiffPoly(0)"
        parts = []
        for m in sorted(self.terms, key=mono_sort_key, reverse=True):
            parts.append(f"{self.terms[m]}*{m!r}")
        return "DiffPoly(" + " + ".join(parts) + ")"

    # -- structure queries -------------------------------------------

    def jetvars(self) -> set:
        out = set()
        for jets, _ in self.terms:
            for v, _e in jets:
                out.add(v)
        return out

    def deps(self) -> set:
        return {v[0] for v in self.jetvars()}

    def const_value(self):
        """Return the rational value if the polynomial is constant, else None."""
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1:
            (m, c), = self.terms.items()
            if m == mono_one(self.n):
                return c
        return None

    def total_degree(self) -> int:
        return max((mono_degree(m) for m in self.terms), default=0)

    def max_jet_order(self) -> int:
        return max((sum(v[1]) for v in self.jetvars()), default=0)

    def involves_direction(self, i: int) -> bool:
        for jets, xe in self.terms:
            if xe[i]:
                return True
            for (_, idx), _e in jets:
                if idx[i]:
                    return True
        return False

    # -- calculus ----------------------------------------------------

    def partial(self, jet) -> "DiffPoly":
        """Partial derivative with respect to one jet variable."""
        res = {}
        for (jets, xe), c in self.terms.items():
            for t, (v, e) in enumerate(jets):
                if v == jet:
                    rest = jets[:t] + ((v, e - 1),) + jets[t + 1:] if e > 1 else jets[:t] + jets[t + 1:]
                    m = (rest, xe)
                    s = res.get(m, 0) + c * e
                    if s:
                        res[m] = s
                    elif m in res:
                        del res[m]
                    break
        return DiffPoly(self.n, res, _clean=True)

    def partial_x(self, i: int) -> "DiffPoly":
        """Partial derivative with respect to the explicit variable x_i."""
        res = {}
        for (jets, xe), c in self.terms.items():
            if xe[i]:
                nxe = tuple(q - 1 if k == i else q for k, q in enumerate(xe))
                m = (jets, nxe)
                s = res.get(m, 0) + c * xe[i]
                if s:
                    res[m] = s
                elif m in res:
                    del res[m]
        return DiffPoly(self.n, res, _clean=True)

    def total(self, i: int) -> "DiffPoly":
        """Total derivative D_i: d/dx_i plus the chain rule over all jets."""
        res = {}

        def put(m, c):
            s = res.get(m, 0) + c
            if s:
                res[m] = s
            elif m in res:
                del res[m]

        for (jets, xe), c in self.terms.items():
            if xe[i]:
                nxe = tuple(q - 1 if k == i else q for k, q in enumerate(xe))
                put((jets, nxe), c * xe[i])
            for t, ((dep, idx), e) in enumerate(jets):
                up = (dep, tuple(q + 1 if k == i else q for k, q in enumerate(idx)))
                if e > 1:
                    rest = jets[:t] + (((dep, idx), e - 1),) + jets[t + 1:]
                else:
                    rest = jets[:t] + jets[t + 1:]
                acc = dict(rest)
                acc[up] = acc.get(up, 0) + 1
                put((tuple(sorted(acc.items())), xe), c * e)
        return DiffPoly(self.n, res, _clean=True)

    def total_multi(self, idx) -> "DiffPoly":
        """Iterated total derivative D_sigma."""
        p = self
        for i, k in enumerate(idx):
            for _ in range(k):
                p = p.total(i)
        return p

    # -- substitutions -----------------------------------------------

    def subst_jet(self, jet, value: "DiffPoly") -> "DiffPoly":
        """Replace every occurrence of one jet variable by a polynomial."""
        powers = {0: DiffPoly.const(self.n, 1)}

        def power(k):
            if k not in powers:
                powers[k] = power(k - 1) * value
            return powers[k]

        res = {}
        for (jets, xe), c in self.terms.items():
            hit = None
            for t, (v, e) in enumerate(jets):
                if v == jet:
                    hit = (t, e)
                    break
            if hit is None:
                s = res.get((jets, xe), 0) + c
                if s:
                    res[(jets, xe)] = s
                elif (jets, xe) in res:
                    del res[(jets, xe)]
                continue
            t, e = hit
            rest = (jets[:t] + jets[t + 1:], xe)
            for m2, c2 in power(e).terms.items():
                m = mono_mul(rest, m2)
                s = res.get(m, 0) + c * c2
                if s:
                    res[m] = s
                elif m in res:
                    del res[m]
        return DiffPoly(self.n, res, _clean=True)

    def subst_dep(self, dep: int, value: "DiffPoly") -> "DiffPoly":
        """Replace the dependent ``dep`` by a polynomial; jets become D_sigma(value)."""
        p = self
        cache = {}
        for v in sorted(self.jetvars()):
            if v[0] != dep:
                continue
            idx = v[1]
            if idx not in cache:
                cache[idx] = value.total_multi(idx)
            p = p.subst_jet(v, cache[idx])
        return p

    def relabel_deps(self, mapping: dict) -> "DiffPoly":
        """Rename dependent indices (used to permute formal argument slots)."""
        res = {}
        for (jets, xe), c in self.terms.items():
            nj = tuple(
                sorted(((mapping.get(dep, dep), idx), e) for (dep, idx), e in jets)
            )
            m = (nj, xe)
            s = res.get(m, 0) + c
            if s:
                res[m] = s
            elif m in res:
                del res[m]
        return DiffPoly(self.n, res, _clean=True)


class VectorFunction:
    """Fixed-length vector of differential polynomials."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        self.entries = tuple(entries)
        if not self.entries:
            raise ValueError("empty vector function")
        n = self.entries[0].n
        if any(p.n != n for p in self.entries):
            raise ValueError("mixed base dimensions in vector function")

    @property
    def n(self):
        return self.entries[0].n

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    def __add__(self, other):
        if len(other) != len(self):
            raise ValueError("vector length mismatch")
        return VectorFunction(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        if len(other) != len(self):
            raise ValueError("vector length mismatch")
        return VectorFunction(a - b for a, b in zip(self, other))

    def __neg__(self):
        return VectorFunction(-a for a in self)

    def __rmul__(self, c):
        return VectorFunction(a * c for a in self)

    def __eq__(self, other):
        return isinstance(other, VectorFunction) and self.entries == other.entries

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.entries)

    def map(self, fn) -> "VectorFunction":
        return VectorFunction(fn(p) for p in self.entries)

    def __repr__(self):
        return "VectorFunction(" + ", ".join(map(repr, self.entries)) + ")"


def as_vector(v, n=None) -> VectorFunction:
    if isinstance(v, VectorFunction):
        return v
    if isinstance(v, DiffPoly):
        return VectorFunction([v])
    return VectorFunction(v)


def formal_vector(n: int, dep_ids) -> VectorFunction:
    """Vector whose entries are the bare jets of the given dependents."""
    zero = (0,) * n
    return VectorFunction([DiffPoly.jet(n, d, zero) for d in dep_ids])


# -- operations of the jet algebra ------------------------------------


def total_derivative(i: int, p: DiffPoly) -> DiffPoly:
    """Total derivative D_i; linear and Leibniz over products."""
    return p.total(i)


def euler(frame: Frame, density: DiffPoly, deps=None) -> VectorFunction:
    """Variational derivative: component j is sum of (-D)^sigma d/du^j_sigma.

    By default only physical dependents are differentiated; pass ``deps``
    to include formal argument slots.
    """
    if deps is None:
        deps = frame.physical
        bad = density.deps() - set(deps)
        if bad:
            names = ", ".join(frame.dependents[d] for d in sorted(bad))
            raise ValueError(
                f"density involves non-physical dependents ({names}); "
                "pass deps explicitly to vary them"
            )
    out = []
    for j in deps:
        acc = DiffPoly.zero(frame.n)
        for v in density.jetvars():
            if v[0] != j:
                continue
            idx = v[1]
            term = density.partial(v).total_multi(idx)
            if sum(idx) % 2:
                term = -term
            acc = acc + term
        out.append(acc)
    return VectorFunction(out)


def evolutionary_apply(frame: Frame, phi: VectorFunction, f):
    """Apply the evolutionary field of phi: sum of D_sigma(phi^j) d/du^j_sigma.

    ``phi`` must have one component per physical dependent; ``f`` may be a
    polynomial or a vector (handled componentwise).
    """
    phys = frame.physical
    if len(phi) != len(phys):
        raise ValueError(
            f"evolutionary field needs {len(phys)} components, got {len(phi)}"
        )
    if isinstance(f, VectorFunction):
        return VectorFunction([evolutionary_apply(frame, phi, p) for p in f])
    slot = {d: k for k, d in enumerate(phys)}
    cache = {}
    acc = DiffPoly.zero(frame.n)
    for v in f.jetvars():
        dep, idx = v
        if dep not in slot:
            continue
        key = (dep, idx)
        if key not in cache:
            cache[key] = phi[slot[dep]].total_multi(idx)
        acc = acc + f.partial(v) * cache[key]
    return acc
