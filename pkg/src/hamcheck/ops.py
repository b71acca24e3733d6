"""Matrix operators in total derivatives: composition, adjoint, linearization.

An operator is kept in right-normal form, a finite sum  a_sigma * D_sigma
per matrix entry with polynomial coefficients to the left of the
derivative monomials.  Equality of canonical forms is structural.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from math import comb

from .poly import DiffPoly, VectorFunction, as_vector


class DimensionMismatch(ValueError):
    pass


def _binom(sigma, rho) -> int:
    out = 1
    for s, r in zip(sigma, rho):
        out *= comb(s, r)
    return out


def _sub_indices(sigma):
    """All multi-indices rho <= sigma, componentwise."""
    return product(*(range(s + 1) for s in sigma))


class CDiffOp:
    """Matrix of total-derivative polynomials sum_sigma a_sigma D_sigma."""

    __slots__ = ("n", "rows", "cols", "entries")

    def __init__(self, n, rows, cols, entries=None, _clean=False):
        self.n = n
        self.rows = rows
        self.cols = cols
        if not entries:
            self.entries = {}
        elif _clean:
            self.entries = entries
        else:
            clean = {}
            for (r, c, sigma), a in entries.items():
                if not (0 <= r < rows and 0 <= c < cols):
                    raise DimensionMismatch(f"entry ({r},{c}) outside {rows}x{cols}")
                if not isinstance(a, DiffPoly):
                    a = DiffPoly.const(n, a)
                if a:
                    clean[(r, c, tuple(sigma))] = a
            self.entries = clean

    # -- constructors ------------------------------------------------

    @classmethod
    def zero(cls, n, rows=1, cols=1):
        return cls(n, rows, cols, None, _clean=True)

    @classmethod
    def identity(cls, n, size=1):
        one = DiffPoly.const(n, 1)
        zero = (0,) * n
        return cls(n, size, size, {(k, k, zero): one for k in range(size)}, _clean=True)

    @classmethod
    def d(cls, n, i, power=1):
        """Scalar operator D_i^power."""
        sigma = tuple(power if k == i else 0 for k in range(n))
        return cls(n, 1, 1, {(0, 0, sigma): DiffPoly.const(n, 1)}, _clean=True)

    @classmethod
    def mult(cls, p: DiffPoly):
        """Scalar multiplication operator by a polynomial."""
        return cls(p.n, 1, 1, {(0, 0, (0,) * p.n): p})

    @classmethod
    def block(cls, grid):
        """Assemble from a 2-D list of operator blocks (row-major)."""
        nrows = len(grid)
        ncols = len(grid[0])
        if any(len(row) != ncols for row in grid):
            raise DimensionMismatch("ragged block grid")
        n = grid[0][0].n
        row_sizes = [grid[r][0].rows for r in range(nrows)]
        col_sizes = [grid[0][c].cols for c in range(ncols)]
        for r in range(nrows):
            for c in range(ncols):
                b = grid[r][c]
                if b.rows != row_sizes[r] or b.cols != col_sizes[c]:
                    raise DimensionMismatch("inconsistent block shapes")
        entries = {}
        roff = [sum(row_sizes[:r]) for r in range(nrows)]
        coff = [sum(col_sizes[:c]) for c in range(ncols)]
        for r in range(nrows):
            for c in range(ncols):
                for (i, j, sigma), a in grid[r][c].entries.items():
                    entries[(roff[r] + i, coff[c] + j, sigma)] = a
        return cls(n, sum(row_sizes), sum(col_sizes), entries, _clean=True)

    # -- linear structure ---------------------------------------------

    def _check_same_shape(self, other):
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise DimensionMismatch(
                f"{self.rows}x{self.cols} vs {other.rows}x{other.cols}"
            )

    def __add__(self, other):
        self._check_same_shape(other)
        res = dict(self.entries)
        for key, a in other.entries.items():
            s = res.get(key)
            s = a if s is None else s + a
            if s:
                res[key] = s
            elif key in res:
                del res[key]
        return CDiffOp(self.n, self.rows, self.cols, res, _clean=True)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return CDiffOp(
            self.n,
            self.rows,
            self.cols,
            {k: -a for k, a in self.entries.items()},
            _clean=True,
        )

    def __rmul__(self, c):
        c = Fraction(c)
        if not c:
            return CDiffOp.zero(self.n, self.rows, self.cols)
        return CDiffOp(
            self.n,
            self.rows,
            self.cols,
            {k: a * c for k, a in self.entries.items()},
            _clean=True,
        )

    def __eq__(self, other):
        return (
            isinstance(other, CDiffOp)
            and (self.n, self.rows, self.cols) == (other.n, other.rows, other.cols)
            and self.entries == other.entries
        )

    def is_zero(self) -> bool:
        return not self.entries

    def __repr__(self):
        return f"CDiffOp({self.rows}x{self.cols}, {len(self.entries)} terms)"

    # -- queries -------------------------------------------------------

    def order(self) -> int:
        return max((sum(s) for (_, _, s) in self.entries), default=0)

    def involves_direction(self, i: int) -> bool:
        for (_, _, sigma), a in self.entries.items():
            if sigma[i] or a.involves_direction(i):
                return True
        return False

    def entry_terms(self, r, c):
        """All (sigma, coefficient) pairs of one matrix entry."""
        return [
            (sigma, a) for (i, j, sigma), a in self.entries.items() if i == r and j == c
        ]

    def map_coeffs(self, fn) -> "CDiffOp":
        res = {}
        for (r, c, sigma), a in self.entries.items():
            b = fn(a)
            if b:
                key = (r, c, sigma)
                s = res.get(key)
                res[key] = b if s is None else s + b
        return CDiffOp(self.n, self.rows, self.cols, res, _clean=True)

    # -- action, composition, adjoint ----------------------------------

    def apply(self, v) -> VectorFunction:
        v = as_vector(v)
        if len(v) != self.cols:
            raise DimensionMismatch(f"operator has {self.cols} columns, vector {len(v)}")
        cache = {}
        out = [DiffPoly.zero(self.n) for _ in range(self.rows)]
        for (r, c, sigma), a in self.entries.items():
            key = (c, sigma)
            if key not in cache:
                cache[key] = v[c].total_multi(sigma)
            out[r] = out[r] + a * cache[key]
        return VectorFunction(out)

    def compose(self, other: "CDiffOp") -> "CDiffOp":
        """Canonical form of self o other via the multinomial Leibniz rule."""
        if self.cols != other.rows:
            raise DimensionMismatch(
                f"cannot compose {self.rows}x{self.cols} with {other.rows}x{other.cols}"
            )
        dcache = {}

        def deriv(key, b, delta):
            if not any(delta):
                return b
            full = (key, delta)
            got = dcache.get(full)
            if got is None:
                i = next(k for k, q in enumerate(delta) if q)
                lower = tuple(q - 1 if k == i else q for k, q in enumerate(delta))
                got = deriv(key, b, lower).total(i)
                dcache[full] = got
            return got

        res = {}
        for (r, k, sigma), a in self.entries.items():
            for (k2, c, tau), b in other.entries.items():
                if k2 != k:
                    continue
                for rho in _sub_indices(sigma):
                    coeff = _binom(sigma, rho)
                    delta = tuple(s - q for s, q in zip(sigma, rho))
                    db = deriv((k, c, tau), b, delta)
                    if db.is_zero():
                        continue
                    part = a * db
                    if coeff != 1:
                        part = part * coeff
                    out_sigma = tuple(p + q for p, q in zip(rho, tau))
                    key = (r, c, out_sigma)
                    s = res.get(key)
                    s = part if s is None else s + part
                    if s:
                        res[key] = s
                    elif key in res:
                        del res[key]
        return CDiffOp(self.n, self.rows, other.cols, res, _clean=True)

    def adjoint(self) -> "CDiffOp":
        """Formal adjoint: entry (i,j) becomes sum (-1)^|s| D_s o a_(j,i,s)."""
        dcache = {}

        def deriv(key, a, delta):
            if not any(delta):
                return a
            full = (key, delta)
            got = dcache.get(full)
            if got is None:
                i = next(k for k, q in enumerate(delta) if q)
                lower = tuple(q - 1 if k == i else q for k, q in enumerate(delta))
                got = deriv(key, a, lower).total(i)
                dcache[full] = got
            return got

        res = {}
        for (r, c, sigma), a in self.entries.items():
            sign = -1 if sum(sigma) % 2 else 1
            for rho in _sub_indices(sigma):
                coeff = sign * _binom(sigma, rho)
                delta = tuple(s - q for s, q in zip(sigma, rho))
                da = deriv((r, c, sigma), a, delta)
                if da.is_zero():
                    continue
                part = da * coeff
                key = (c, r, rho)
                s = res.get(key)
                s = part if s is None else s + part
                if s:
                    res[key] = s
                elif key in res:
                    del res[key]
        return CDiffOp(self.n, self.cols, self.rows, res, _clean=True)


def linearize(f, deps) -> CDiffOp:
    """Linearization of a vector function with respect to the given dependents.

    Entry (i, j) is sum_sigma (df^i / du^j_sigma) D_sigma, so that applying
    the result to phi equals the evolutionary action of phi on f.
    """
    f = as_vector(f)
    deps = tuple(deps)
    col = {d: j for j, d in enumerate(deps)}
    entries = {}
    for i, p in enumerate(f):
        for v in p.jetvars():
            dep, idx = v
            if dep not in col:
                continue
            a = p.partial(v)
            if a:
                entries[(i, col[dep], idx)] = a
    return CDiffOp(f.n, len(f), len(deps), entries)


def transpose_conjugation_check(op: CDiffOp) -> bool:
    """Verify the adjoint is involutive on this operator."""
    return op.adjoint().adjoint() == op
