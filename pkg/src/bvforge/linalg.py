"""Exact sparse linear algebra over the rationals.

Vectors are dicts {index: Fraction} with no stored zeros; matrices are held
row-wise.  Everything is eliminated with first-nonzero pivoting and
deterministic tie-breaking by lowest index, so bases are reproducible.
"""

from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


class NotInSpan:
    """Sentinel value: the vector is not in the span (not a fault)."""

    def __repr__(self):
        return "NotInSpan"


NOT_IN_SPAN = NotInSpan()


def vec_add(a, b, coeff=ONE):
    """a + coeff*b, sparse; does not mutate its arguments."""
    out = dict(a)
    for k, v in b.items():
        w = out.get(k, ZERO) + coeff * v
        if w:
            out[k] = w
        else:
            out.pop(k, None)
    return out


def vec_iadd(a, b, coeff=ONE):
    """In-place a += coeff*b."""
    for k, v in b.items():
        w = a.get(k, ZERO) + coeff * v
        if w:
            a[k] = w
        else:
            a.pop(k, None)
    return a


def vec_scale(a, c):
    if not c:
        return {}
    return {k: c * v for k, v in a.items()}


class SparseMatrix:
    """Rows x cols sparse rational matrix; entries keyed by (row, col)."""

    def __init__(self, rows, cols, entries=None):
        self.rows = rows
        self.cols = cols
        self.entries = {}
        if entries:
            for (r, c), v in entries.items():
                assert 0 <= r < rows and 0 <= c < cols, "index out of bounds"
                v = Fraction(v)
                if v:
                    self.entries[(r, c)] = v

    def row_list(self):
        rows = [dict() for _ in range(self.rows)]
        for (r, c), v in self.entries.items():
            rows[r][c] = v
        return rows

    def col_list(self):
        cols = [dict() for _ in range(self.cols)]
        for (r, c), v in self.entries.items():
            cols[c][r] = v
        return cols

    @classmethod
    def from_rows(cls, rows, cols):
        m = cls(len(rows), cols)
        for r, row in enumerate(rows):
            for c, v in row.items():
                if v:
                    m.entries[(r, c)] = Fraction(v)
        return m


class Echelon:
    """Incremental row echelon with pivot normalization, used both for rank
    computations and for membership/coordinate queries."""

    def __init__(self):
        self.pivots = {}  # pivot column -> (row vector, history vector)

    def reduce(self, row, hist=None):
        """Reduce ``row`` against the stored pivot rows.  The optional
        ``hist`` dict accumulates the coefficients of the pivots used."""
        row = dict(row)
        while row:
            c = min(row)
            piv = self.pivots.get(c)
            if piv is None:
                return row, c
            coeff = row[c]
            vec_iadd(row, piv[0], -coeff)
            if hist is not None and piv[1] is not None:
                vec_iadd(hist, piv[1], coeff)
        return row, None

    def insert(self, row):
        """Insert a row; returns the pivot column or None if dependent."""
        red, c = self.reduce(row)
        if c is None:
            return None
        self.pivots[c] = (vec_scale(red, ONE / red[c]), None)
        return c

    def reduce_fully(self, row):
        """Eliminate every pivot column; the result is supported on free
        columns only."""
        row = dict(row)
        out = {}
        while row:
            red, c = self.reduce(row)
            if c is None:
                break
            out[c] = red.pop(c)
            row = red
        return out

    @property
    def rank(self):
        return len(self.pivots)


def rank(m):
    ech = Echelon()
    for row in m.row_list():
        if row:
            ech.insert(dict(row))
    return ech.rank


def kernel_basis(m):
    """Basis of {v : m v = 0} as a Subspace of dimension cols - rank."""
    ech = Echelon()
    for row in m.row_list():
        if row:
            ech.insert(dict(row))
    return _kernel_from_echelon(ech, m.cols)


def kernel_of_rows(rows, cols):
    """Kernel of the linear conditions given as sparse row dicts.

    The elimination runs on content-stripped integer rows (fraction-free up
    to a per-row gcd), which is much faster than Fraction arithmetic; the
    kernel vectors come out of an exact rational back-substitution."""
    from math import gcd

    pivots = {}  # col -> integer row with leading entry at col

    def strip(row):
        g = 0
        for v in row.values():
            g = gcd(g, v)
            if g == 1:
                return row
        if g > 1:
            for k in row:
                row[k] //= g
        return row

    for row in rows:
        if not row:
            continue
        # clear denominators
        denom = 1
        for v in row.values():
            if isinstance(v, Fraction):
                denom = denom * v.denominator // gcd(denom, v.denominator)
        work = {}
        for k, v in row.items():
            iv = int(v * denom) if isinstance(v, Fraction) else v * denom
            if iv:
                work[k] = iv
        while work:
            c = min(work)
            piv = pivots.get(c)
            if piv is None:
                pivots[c] = strip(work)
                break
            a, b = piv[c], work[c]
            g = gcd(a, b)
            ma, mb = a // g, b // g
            new = {}
            for k, v in work.items():
                new[k] = v * ma
            for k, v in piv.items():
                w = new.get(k, 0) - v * mb
                if w:
                    new[k] = w
                else:
                    new.pop(k, None)
            work = strip(new)
    ech = Echelon()
    for c, row in pivots.items():
        lead = Fraction(row[c])
        ech.pivots[c] = ({k: Fraction(v) / lead for k, v in row.items()}, None)
    return _kernel_from_echelon(ech, cols)


def _kernel_from_echelon(ech, cols):
    pivot_cols = sorted(ech.pivots)
    free_cols = [c for c in range(cols) if c not in ech.pivots]
    basis = []
    for f in free_cols:
        x = {f: ONE}
        for c in reversed(pivot_cols):
            row = ech.pivots[c][0]
            s = ZERO
            for j, v in row.items():
                if j != c and j in x:
                    s += v * x[j]
            if s:
                x[c] = -s
        basis.append(x)
    return Subspace(cols, basis)


def image_basis(m):
    """Basis of the column space: the deterministic independent subset of the
    actual columns (lowest indices first)."""
    ech = Echelon()
    basis = []
    for c, col in enumerate(m.col_list()):
        if col and ech.insert(dict(col)) is not None:
            basis.append(col)
    return Subspace(m.rows, basis)


class Subspace:
    """A subspace of Q^ambient_dim with a stored (independent) basis.

    Internally keeps a normalized echelon; each pivot row also stores its
    expression in the original basis so that ``coordinates`` is exact and
    unique.
    """

    def __init__(self, ambient_dim, basis):
        self.ambient_dim = ambient_dim
        self.basis = [dict(b) for b in basis]
        self._ech = Echelon()
        for j, b in enumerate(self.basis):
            hist = {}
            red, c = self._ech.reduce(dict(b), hist)
            if c is None:
                raise ValueError("basis vectors are linearly dependent")
            inv = ONE / red[c]
            # pivot row P = inv*(b_j - sum hist[k] b_k)
            expr = vec_scale(hist, -inv)
            expr[j] = inv
            self._ech.pivots[c] = (vec_scale(red, inv), expr)

    @property
    def dim(self):
        return len(self.basis)

    def coordinates(self, v):
        """Coefficients of v in the stored basis, or NOT_IN_SPAN."""
        hist = {}
        red, c = self._ech.reduce(dict(v), hist)
        if c is not None:
            return NOT_IN_SPAN
        return [hist.get(j, ZERO) for j in range(len(self.basis))]

    def __contains__(self, v):
        return not isinstance(self.coordinates(v), NotInSpan)

    def linear_combination(self, coeffs):
        out = {}
        for c, b in zip(coeffs, self.basis):
            if c:
                vec_iadd(out, b, c)
        return out


def coordinates_in_span(v, s):
    return s.coordinates(v)


def span_of(vectors, ambient_dim):
    """Deterministic independent subset of the given vectors as a Subspace."""
    ech = Echelon()
    basis = []
    for v in vectors:
        if v and ech.insert(dict(v)) is not None:
            basis.append(v)
    return Subspace(ambient_dim, basis)


def sum_subspaces(a, b):
    assert a.ambient_dim == b.ambient_dim
    return span_of(a.basis + b.basis, a.ambient_dim)


def intersect_subspaces(a, b):
    """Intersection via the kernel of [A | -B]."""
    assert a.ambient_dim == b.ambient_dim
    da, db = a.dim, b.dim
    rows = {}
    for j, v in enumerate(a.basis):
        for k, val in v.items():
            rows.setdefault(k, {})[j] = val
    for j, v in enumerate(b.basis):
        for k, val in v.items():
            rows.setdefault(k, {})[da + j] = -val
    ker = kernel_of_rows(rows.values(), da + db)
    vecs = []
    for x in ker.basis:
        out = {}
        for j in range(da):
            if j in x:
                vec_iadd(out, a.basis[j], x[j])
        if out:
            vecs.append(out)
    return span_of(vecs, a.ambient_dim)


def subspace_eq(a, b):
    if a.dim != b.dim:
        return False
    return all(v in a for v in b.basis)
