"""The Koszul-dual side of the BV operad.

Carries the cogenerators mu (arity 2, degree 1) and beta (arity 2, degree 2),
the coderivation d_psi (mu -> beta), the weighted contracting homotopy H
(beta -> mu, weight w(v)/C(n+1,2)), the Gerstenhaber dual computed aritywise
as a kernel by local cancellation, the model T^c(delta) (x) Ge_dual of the
Koszul dual dg cooperad with differential d_phi = delta^{-1} (x) d_psi, the
theta/rho distributive isomorphisms, cooperad decompositions, and the
deformation retract onto the homology (the delta towers plus the image of
H d_psi, a model of the desuspended dual gravity operad).

Model vectors are dicts {(delta_power, (tree, decorations)): Fraction}.
"""

from fractions import Fraction
from functools import cache
from itertools import product

from . import trees as tr
from . import treewise as tw
from .linalg import (
    NOT_IN_SPAN,
    NotInSpan,
    ONE,
    ZERO,
    Subspace,
    kernel_of_rows,
    vec_iadd,
)
from .signs import jump_sign

MU = tw.Generator("mu", 2, 1)
BETA = tw.Generator("beta", 2, 2)
DELTA = tw.Generator("delta", 1, 2)

TRIV_KEY = (1, ())  # the trivial tree: arity 1, no vertices


def _psi(g):
    return {BETA: ONE} if g == MU else {}


def _h(g):
    return {MU: ONE} if g == BETA else {}


def d_psi(v):
    """Vertexwise coderivation extending mu -> beta, degree +1."""
    return tw.coderivation_vertexwise(_psi, 1, v, flip_key="dpsi_jump")


def contracting_H(v):
    """Weighted contracting homotopy: beta -> mu with factor w(v)/C(n+1,2)."""
    for (t, decs) in v:
        for g in decs:
            assert g in (MU, BETA), "H is only defined on binary M-trees"
    return tw.weighted_homotopy(_h, v)


def mu_count(key):
    return sum(1 for g in key[1] if g == MU)


# ---------------------------------------------------------------------------
# the twelve two-vertex decorated trees and the Gerstenhaber relations


def _shape(i):
    return (((1, 2), 3), ((1, 3), 2), (1, (2, 3)))[i - 1]


def two_vertex_basis():
    """The twelve 2-vertex binary decorated trees t^{ab}_i at arity 3, with
    decorations listed in the vertex order."""
    out = []
    for i in (1, 2, 3):
        for a in (MU, BETA):
            for b in (MU, BETA):
                out.append((_shape(i), (a, b)))
    return out


def _symmetrize3(key):
    from itertools import permutations

    acc = {}
    for p in permutations([1, 2, 3]):
        k2, s = tw.leaf_relabel_term(key, dict(zip([1, 2, 3], p)))
        tw.tv_insert(acc, k2, Fraction(s))
    return acc


@cache
def _gerstenhaber_relations():
    """Basis of the 6-dimensional space of shifted Gerstenhaber relations in
    the 12-dimensional 2-vertex space: two associativity elements, three
    Leibniz elements and the Jacobi element.

    The associativity space is the S_3-stable complement of the trivial
    isotypic line in the mu/mu stratum; the Jacobi element is the symmetric
    beta/beta vector; the Leibniz space is generated from them by d_psi and
    the weighted homotopy (d_psi maps associativity onto differences of
    Leibniz relations and Leibniz relations onto the Jacobi element).
    """
    from .linalg import kernel_of_rows

    mumu_keys = [(_shape(i), (MU, MU)) for i in (1, 2, 3)]
    proj_rows = {}
    for j, k in enumerate(mumu_keys):
        for k2, c in _symmetrize3(k).items():
            proj_rows.setdefault(mumu_keys.index(k2), {})[j] = c
    assoc = [
        {mumu_keys[i]: c for i, c in x.items()}
        for x in kernel_of_rows(proj_rows.values(), 3).basis
    ]
    jac = _symmetrize3((_shape(1), (BETA, BETA)))
    leibniz = [d_psi(a) for a in assoc] + [contracting_H(jac)]
    rels = assoc + leibniz + [jac]
    assert len(rels) == 6
    return tuple(rels)


def gerstenhaber_relations():
    return [dict(v) for v in _gerstenhaber_relations()]


@cache
def _pattern_quotient():
    """Class coordinates of each 2-vertex pattern modulo the relation space:
    pattern key -> dict[free_column -> Fraction]."""
    basis = two_vertex_basis()
    index = {k: i for i, k in enumerate(basis)}
    from .linalg import Echelon

    ech = Echelon()
    for rel in gerstenhaber_relations():
        row = {index[k]: c for k, c in rel.items()}
        assert ech.insert(row) is not None, "relations are dependent"
    return {k: ech.reduce_fully({i: ONE}) for k, i in index.items()}


class _Interning:
    def __init__(self):
        self.index = {}
        self.keys = []

    def __call__(self, key):
        i = self.index.get(key)
        if i is None:
            i = len(self.keys)
            self.index[key] = i
            self.keys.append(key)
        return i


@cache
def _membership_residuals(a):
    """Residual functionals for membership in the Gerstenhaber dual at arity
    ``a``: an echelon of the component plus an interning of support trees.
    A vector lies in the component iff its fully reduced residual vanishes."""
    from .linalg import Echelon

    ech = Echelon()
    intern = _Interning()
    for k in sorted(gerstenhaber_dual(a)):
        for v in gerstenhaber_dual(a)[k]:
            ech.insert({intern(key): c for key, c in v.items()})
    return ech, intern


def _cut_condition_entries(key, edges):
    """Subcooperad condition entries contributed by one decorated binary tree
    through the given internal edges: every infinitesimal cut tensor must lie
    in (component) (x) (component).

    Yields ((row id), coefficient) where a row id names one residual
    coordinate of one side of one cut group.
    """
    for edge in edges:
        lk, slot, uk, S, s = tw.cut_edge_term(key, edge)
        for side, mine, other in (("L", lk, uk), ("U", uk, lk)):
            a = tw.term_arity(mine)
            if a < 3:
                continue  # weight <= 1 components are full: no condition
            ech, intern = _membership_residuals(a)
            res = ech.reduce_fully({intern(mine): ONE})
            for fc, val in res.items():
                yield (side, S, other, fc), s * val


HOLE = {d: tw.Generator("hole%d" % d, 3, d) for d in (1, 2, 3)}


_ROOT_PATTERN_CACHE = {}


def _root_pattern_entries(key, coeff):
    hit = _ROOT_PATTERN_CACHE.get(key)
    if hit is None:
        hit = tuple(_root_pattern_entries_raw(key))
        _ROOT_PATTERN_CACHE[key] = hit
    for rid, val in hit:
        yield rid, coeff * val


def _root_pattern_entries_raw(key):
    """Local cancellation at the root: the class of the root 2-vertex pattern
    modulo the relation space, in the environment of the contracted tree with
    a hole of the composite's degree at the merged vertex.

    Yields ((row id), coefficient); a row id pairs the hole-decorated
    contracted tree with one residual coordinate of the pattern class.
    """
    t, decs = key
    classes = _pattern_quotient()
    paths = tr.vertex_paths(t)
    idx = tr.vertex_index(t)
    for edge in [e for e in tr.internal_edges(t) if e[0] == ()]:
        pattern, s_extract, (p_pos, c_pos) = tw.two_vertex_pattern(t, decs, edge)
        cls = classes[pattern]
        if not cls:
            continue
        ppath, ci = edge
        pmin, pmax = min(p_pos, c_pos), max(p_pos, c_pos)
        hole_deg = pattern[1][0].degree + pattern[1][1].degree - 1
        prefix = sum(decs[k].degree for k in range(pmin))
        s_jump = jump_sign(-1, prefix)
        pnode = tr.subtree_at(t, ppath)
        raw = tr.replace_at(t, ppath, pnode[:ci] + pnode[ci] + pnode[ci + 1:])
        move = tw._contracted_paths(t, edge)
        dec_by_path, ref = {}, []
        for k, p in enumerate(paths):
            if k == pmax:
                continue
            if k == pmin:
                dec_by_path[ppath] = HOLE[hole_deg]
                ref.append(ppath)
            else:
                dec_by_path[move[p]] = decs[k]
                ref.append(move[p])
        ckey, s_canon = tw.build_decorated(raw, dec_by_path, ref)
        s = s_extract * s_jump * s_canon
        for fc, val in cls.items():
            yield (ckey, fc), s * val


def gerstenhaber_dual_brute(n):
    """Oracle: the Gerstenhaber dual at arity n as a brute kernel computation
    on the full binary treewise space, one condition row per residual
    coordinate of each side of each infinitesimal cut group."""
    if n == 1:
        return {0: [{TRIV_KEY: ONE}]}
    if n == 2:
        return dict(gerstenhaber_dual(2))
    if n == 3:
        return dict(gerstenhaber_dual(3))
    cols = []
    for shape in tr.enumerate_binary_trees(n):
        for decs in product((MU, BETA), repeat=n - 1):
            cols.append(tw.make_term(shape, decs))
    col_index = {k: i for i, k in enumerate(cols)}
    rows = {}
    for key in cols:
        for rid, val in _cut_condition_entries(key, tr.internal_edges(key[0])):
            row = rows.setdefault(rid, {})
            j = col_index[key]
            row[j] = row.get(j, ZERO) + val
    rows = {rid: {j: v for j, v in r.items() if v} for rid, r in rows.items()}
    ker = kernel_of_rows([r for r in rows.values() if r], len(cols))
    out = {}
    for x in ker.basis:
        vec = {cols[i]: c for i, c in x.items()}
        k = mu_count(next(iter(vec)))
        assert all(mu_count(key) == k for key in vec), "kernel vector not graded"
        out.setdefault(k, []).append(vec)
    return out


@cache
def gerstenhaber_dual(n):
    """The Gerstenhaber dual at arity n, stratified by mu-count: a dict
    {stratum: list of treewise vectors}.

    Weight 1 is the cogenerator space; weight 2 is the space of shifted
    Gerstenhaber relations; higher arities are computed recursively as the
    span of graftings of lower components onto a binary root, intersected
    with the subcooperad conditions along root-incident edges.  The total
    dimension is n!.
    """
    if n == 1:
        return {0: ({TRIV_KEY: ONE},)}
    if n == 2:
        return {1: ({tw.make_term((1, 2), (MU,)): ONE},),
                0: ({tw.make_term((1, 2), (BETA,)): ONE},)}
    if n == 3:
        out = {}
        for rel in gerstenhaber_relations():
            out.setdefault(mu_count(next(iter(rel))), []).append(rel)
        return {k: tuple(v) for k, v in out.items()}
    from itertools import combinations

    labels = list(range(1, n + 1))
    span_by_stratum = {}
    for a_size in range(1, n):
        for rest in combinations(labels[1:], a_size - 1):
            A = (1,) + rest
            B = tuple(sorted(set(labels) - set(A)))
            ga = gerstenhaber_dual(len(A))
            gb = gerstenhaber_dual(len(B))
            for root in (MU, BETA):
                root_k = 1 if root == MU else 0
                for ka, vecs_a in ga.items():
                    for kb, vecs_b in gb.items():
                        k = ka + kb + root_k
                        for va in vecs_a:
                            for vb in vecs_b:
                                vec = tw.graft_onto_leafsets(
                                    root, [(list(A), va), (list(B), vb)]
                                )
                                span_by_stratum.setdefault(k, []).append(vec)
    out = {}
    for k, span_vecs in sorted(span_by_stratum.items()):
        rows = {}
        for j, vec in enumerate(span_vecs):
            for key, coeff in vec.items():
                for rid, val in _root_pattern_entries(key, coeff):
                    row = rows.setdefault(rid, {})
                    row[j] = row.get(j, ZERO) + val
        rows = {rid: {j: v for j, v in r.items() if v} for rid, r in rows.items()}
        ker = kernel_of_rows([r for r in rows.values() if r], len(span_vecs))
        basis = []
        for x in ker.basis:
            vec = {}
            for j, c in x.items():
                tw.tv_add(vec, span_vecs[j], c)
            if vec:
                basis.append(_rescale_integral(vec))
        basis = _independent(basis, _Interning())
        if basis:
            out[k] = tuple(basis)
    return out


def _rescale_integral(vec):
    from math import gcd
    denoms = 1
    for c in vec.values():
        denoms = denoms * c.denominator // gcd(denoms, c.denominator)
    nums = 0
    for c in vec.values():
        nums = gcd(nums, abs(c.numerator * (denoms // c.denominator)))
    scale = Fraction(denoms, nums if nums else 1)
    return {k: c * scale for k, c in vec.items()}


def _independent(vectors, intern):
    from .linalg import Echelon
    ech = Echelon()
    out = []
    for v in vectors:
        row = {intern(k): c for k, c in v.items()}
        if ech.insert(row) is not None:
            out.append(v)
    return out


def ge_dim(n):
    return sum(len(b) for b in gerstenhaber_dual(n).values())


@cache
def ge_basis(n):
    """Flat list of the Gerstenhaber-dual basis vectors at arity n, stratum
    by stratum, plus their strata."""
    strata = gerstenhaber_dual(n)
    flat, info = [], []
    for k in sorted(strata):
        for v in strata[k]:
            flat.append(v)
            info.append(k)
    return flat, info


@cache
def ge_subspace(n):
    """The Gerstenhaber dual as a Subspace (for membership tests)."""
    intern = _Interning()
    flat, _ = ge_basis(n)
    vecs = [{intern(k): c for k, c in v.items()} for v in flat]
    dim = 1 + max((max(v) for v in vecs if v), default=0)
    return Subspace(dim, vecs), intern


def ge_coordinates(n, vec):
    """Coordinates of a treewise vector in the Gerstenhaber-dual basis, or
    NOT_IN_SPAN."""
    sub, intern = ge_subspace(n)
    row = {}
    for k, c in vec.items():
        if k not in intern.index:
            return NOT_IN_SPAN
        row[intern.index[k]] = c
    return sub.coordinates(row)


# ---------------------------------------------------------------------------
# the model T^c(delta) (x) Ge_dual and its structure


def d_phi(mv):
    """(m, g) -> (m-1, d_psi g) for m >= 1, zero on the delta^0 layer."""
    out = {}
    slices = {}
    for (m, key), c in mv.items():
        slices.setdefault(m, {})[key] = c
    for m, sl in slices.items():
        if m == 0:
            continue
        for key, c in d_psi(sl).items():
            tw.tv_insert(out, (m - 1, key), c)
    return out


def h_model(mv):
    """The homotopy delta (x) H: (m, g) -> (m+1, H g)."""
    out = {}
    slices = {}
    for (m, key), c in mv.items():
        slices.setdefault(m, {})[key] = c
    for m, sl in slices.items():
        for key, c in contracting_H(sl).items():
            tw.tv_insert(out, (m + 1, key), c)
    return out


def model_degree(m, key):
    return 2 * m + tw.term_degree(key)


def tree_edges(t):
    """All edges of a tree: leaf edges, internal edges and the root edge.
    Encoded as ("leaf", path_to_leaf), ("edge", parent_path, child_idx) or
    ("root",)."""
    out = [("root",)]
    for p, ci in tr.internal_edges(t):
        out.append(("edge", p, ci))

    def walk(u, path):
        for i, c in enumerate(u):
            if tr.is_leaf(c):
                out.append(("leaf", path + (i,)))
            else:
                walk(c, path + (i,))

    if not tr.is_leaf(t):
        walk(t, ())
    else:
        out = [("root",)]  # the trivial tree is a single edge
    return out


def _insert_deltas(t, assignment):
    """Insert chains of delta vertices on the edges of ``t`` per the
    assignment {edge: count}.  Returns (raw_tree, old_path->new_path)."""

    def wrap(u, count):
        for _ in range(count):
            u = (u,)
        return u

    move = {}

    def go(u, path, new_path):
        if tr.is_leaf(u):
            return wrap(u, assignment.get(("leaf", path), 0))
        move[path] = new_path
        kids = []
        for i, c in enumerate(u):
            extra = assignment.get(("edge", path, i), 0) if not tr.is_leaf(c) else 0
            sub = go(c, path + (i,), new_path + (i,) + (0,) * extra)
            kids.append(wrap(sub, extra))
        return tuple(kids)

    root_extra = assignment.get(("root",), 0)
    body = go(t, (), (0,) * root_extra)
    return wrap(body, root_extra), move


def theta(m, v):
    """Insert m delta vertices on the edges of each tree in all possible
    ways: the inverse distributive isomorphism."""
    if m == 0:
        return dict(v)
    out = {}
    for (t, decs), coeff in v.items():
        edges = tree_edges(t)
        paths = tr.vertex_paths(t)
        for weights in _compositions(m, len(edges)):
            assignment = {e: w for e, w in zip(edges, weights) if w}
            raw, move = _insert_deltas(t, assignment)
            new_old = set(move.values())
            dec_by_path, ref = {}, []
            # delta decorations first (even degree: no sign contribution)
            for np in _raw_paths(raw):
                if np not in new_old:
                    dec_by_path[np] = DELTA
                    ref.append(np)
            for op, g in zip(paths, decs):
                dec_by_path[move[op]] = g
                ref.append(move[op])
            key, s = tw.build_decorated(raw, dec_by_path, ref)
            tw.tv_insert(out, key, coeff * s)
    return out


def _raw_paths(t, path=()):
    if tr.is_leaf(t):
        return []
    out = [path]
    for i, c in enumerate(t):
        out.extend(_raw_paths(c, path + (i,)))
    return out


def _compositions(m, parts):
    if parts == 0:
        if m == 0:
            yield ()
        return
    for first in range(m + 1):
        for rest in _compositions(m - first, parts - 1):
            yield (first,) + rest


def rho(v):
    """Project back to the model: keep trees that are a delta chain below a
    pure M-tree, i.e. the summand with all deltas at the root."""
    out = {}
    for (t, decs), coeff in v.items():
        idx = tr.vertex_index(t)
        m, cur, path = 0, t, ()
        while not tr.is_leaf(cur) and len(cur) == 1 and decs[idx[path] - 1] == DELTA:
            m += 1
            path = path + (0,)
            cur = cur[0]
        if tr.is_leaf(cur):
            if all(g == DELTA for g in decs):
                tw.tv_insert(out, (m, TRIV_KEY), coeff)
            continue
        sub_paths = [p for p in tr.vertex_paths(t) if p[:len(path)] == path]
        if len(sub_paths) + m != len(decs):
            continue
        sub_decs = [decs[idx[p] - 1] for p in sub_paths]
        if any(g == DELTA for g in sub_decs):
            continue
        key, s = tw.build_decorated(
            cur, dict(zip([p[len(path):] for p in sub_paths], sub_decs)),
            [p[len(path):] for p in sub_paths],
        )
        tw.tv_insert(out, (m, key), coeff * s)
    return out


# ---------------------------------------------------------------------------
# homology of the model: delta towers and the gravity strata


@cache
def grav_weight_strata(n):
    """Bases of Im(H d_psi) on the Gerstenhaber dual at arity n, stratified
    by mu-count; the internal model of the desuspended dual gravity operad."""
    assert n >= 2
    from .linalg import Echelon

    strata = {}
    for k in sorted(gerstenhaber_dual(n)):
        ech = Echelon()
        intern = _Interning()
        basis = []
        for v in gerstenhaber_dual(n)[k]:
            img = contracting_H(d_psi(v))
            if img and ech.insert({intern(key): c for key, c in img.items()}) is not None:
                basis.append(_rescale_integral(img))
        if basis:
            strata[k] = tuple(basis)
    return strata


@cache
def hom_basis(n):
    """Flat homology basis at arity n >= 2: list of (stratum, vector)."""
    out = []
    for k in sorted(grav_weight_strata(n)):
        for v in grav_weight_strata(n)[k]:
            out.append((k, v))
    return tuple(out)


@cache
def _hom_subspace(n):
    intern = _Interning()
    vecs = [{intern(key): c for key, c in v.items()} for _, v in hom_basis(n)]
    dim = 1 + max((max(v) for v in vecs if v), default=0)
    return Subspace(dim, vecs), intern


def hom_coordinates(n, vec):
    """Coordinates of a treewise vector in the homology basis at arity n."""
    sub, intern = _hom_subspace(n)
    row = {}
    for key, c in vec.items():
        if key not in intern.index:
            return NOT_IN_SPAN
        row[intern.index[key]] = c
    return sub.coordinates(row)


# ---------------------------------------------------------------------------
# generator names for the homology (the minimal model's generator space)


UNIT = ("unit",)  # the counit class I; not a generator of the reduced model


def delta_gen(m):
    """The arity-1 homology class delta^m, m >= 1; degree 2m."""
    assert m >= 1
    return ("delta", m)


def grav_gen(n, j):
    """The j-th homology class at arity n (0-based in the stratified
    order)."""
    return ("grav", n, j)


def gen_arity(g):
    return 1 if g[0] == "delta" else g[1]


def gen_degree(g):
    if g[0] == "delta":
        return 2 * g[1]
    k, v = hom_basis(g[1])[g[2]]
    return tw.term_degree(next(iter(v)))


def gen_stratum(g):
    """mu-count stratum of a gravity-model generator."""
    assert g[0] == "grav"
    return hom_basis(g[1])[g[2]][0]


def generators(max_arity, max_delta):
    out = [delta_gen(m) for m in range(1, max_delta + 1)]
    for n in range(2, max_arity + 1):
        out.extend(grav_gen(n, j) for j in range(len(hom_basis(n))))
    return out


# ---------------------------------------------------------------------------
# the deformation retract (i, p, h) of the Koszul dual dg cooperad


def i_map(g):
    """Inclusion of a homology generator as a model vector."""
    if g == UNIT:
        return {(0, TRIV_KEY): ONE}
    if g[0] == "delta":
        return {(g[1], TRIV_KEY): ONE}
    _, v = hom_basis(g[1])[g[2]]
    return {(0, key): c for key, c in v.items()}


def p_map(mv):
    """Projection of a model vector onto homology classes: the delta-tower
    part plus H d_psi on the delta^0 layer.  Returns {generator: coeff}."""
    out = {}
    slices = {}
    for (m, key), c in mv.items():
        slices.setdefault(m, {})[key] = c
    for m, sl in slices.items():
        arity1 = {k: c for k, c in sl.items() if k == TRIV_KEY}
        rest = {k: c for k, c in sl.items() if k != TRIV_KEY}
        if arity1:
            g = delta_gen(m) if m >= 1 else UNIT
            out[g] = out.get(g, ZERO) + arity1[TRIV_KEY]
        if rest and m == 0:
            n = tw.term_arity(next(iter(rest)))
            img = contracting_H(d_psi(rest))
            if img:
                coords = hom_coordinates(n, img)
                assert not isinstance(coords, NotInSpan), "p: image not in homology model"
                for j, c in enumerate(coords):
                    if c:
                        g = grav_gen(n, j)
                        out[g] = out.get(g, ZERO) + c
    return {g: c for g, c in out.items() if c}


def hvec_add(target, src, coeff=ONE):
    for g, c in src.items():
        w = target.get(g, ZERO) + coeff * c
        if w:
            target[g] = w
        else:
            target.pop(g, None)
    return target


class BVRetract:
    """The deformation retract of the Koszul dual dg cooperad onto its
    homology, within (max_arity, max_delta) bounds."""

    def __init__(self, max_arity, max_delta):
        self.max_arity = max_arity
        self.max_delta = max_delta
        self.generators = generators(max_arity, max_delta)

    i = staticmethod(i_map)
    p = staticmethod(p_map)
    h = staticmethod(h_model)
    d = staticmethod(d_phi)

    def verify(self):
        """Check p i = id and id - i p = d_phi h + h d_phi on every basis
        element of every block within bounds.  Returns a list of failures."""
        bad = []
        for g in self.generators:
            pi = p_map(i_map(g))
            if pi != {g: ONE}:
                bad.append(("pi", g, pi))
        for n in range(1, self.max_arity + 1):
            flat = [{TRIV_KEY: ONE}] if n == 1 else list(ge_basis(n)[0])
            for m in range(0, self.max_delta + 1):
                for gvec in flat:
                    x = {(m, key): c for key, c in gvec.items()}
                    lhs = dict(x)
                    ip = {}
                    for g, c in p_map(x).items():
                        tw.tv_add(ip, i_map(g), c)
                    tw.tv_add(lhs, ip, -ONE)
                    rhs = d_phi(h_model(x))
                    tw.tv_add(rhs, h_model(d_phi(x)))
                    if not tw.tv_equal(lhs, rhs):
                        bad.append(("homotopy", (n, m), x))
        return bad


def bv_retract(max_arity, max_delta):
    return BVRetract(max_arity, max_delta)


# ---------------------------------------------------------------------------
# cooperad decomposition of the model through the theta embedding


@cache
def qbv_block_basis(n, m):
    """Model basis of the block (arity n, delta power m) as theta-embedded
    treewise vectors, plus the Subspace used for recognition."""
    flat = [{TRIV_KEY: ONE}] if n == 1 else [v for v in ge_basis(n)[0]]
    embedded = [theta(m, v) for v in flat]
    intern = _Interning()
    vecs = [{intern(key): c for key, c in v.items()} for v in embedded]
    dim = 1 + max((max(v) for v in vecs if v), default=0)
    return embedded, Subspace(dim, vecs), intern


def block_coordinates(n, m, vec):
    """Coordinates of an embedded treewise vector in the (n, m) block."""
    _, sub, intern = qbv_block_basis(n, m)
    row = {}
    for key, c in vec.items():
        if key not in intern.index:
            return NOT_IN_SPAN
        row[intern.index[key]] = c
    return sub.coordinates(row)


def _delta_count(key):
    return sum(1 for g in key[1] if g == DELTA)


@cache
def decompose_basis_element(n, m, j):
    """Infinitesimal decomposition of the j-th basis element of the (n, m)
    block: a list of (upper_leafset, slot, (m1, j1), (m2, j2), coeff) with
    lower factor (n - |S| + 1, m1, j1) and upper factor (|S|, m2, j2).

    Computed by cutting the theta embedding and recognizing both sides in the
    embedded block bases; recognition failure is an internal fault.
    """
    embedded, _, _ = qbv_block_basis(n, m)
    cuts = {}
    for lk, slot, uk, S, coeff in tw.infinitesimal_cuts(embedded[j]):
        m2 = _delta_count(uk)
        m1 = _delta_count(lk)
        cuts.setdefault((S, slot, m1, m2), {}).setdefault(uk, {}).setdefault(lk, ZERO)
        cuts[(S, slot, m1, m2)][uk][lk] = cuts[(S, slot, m1, m2)][uk][lk] + coeff
    out = []
    for (S, slot, m1, m2), by_upper in sorted(
        cuts.items(), key=lambda kv: (sorted(kv[0][0]), kv[0][1], kv[0][2], kv[0][3])
    ):
        l_ar = n - len(S) + 1
        u_ar = len(S)
        # stage 1: lower profiles must lie in the lower block
        lower_embedded, lower_sub, lower_intern = qbv_block_basis(l_ar, m1)
        mid = {}
        for uk, prof in by_upper.items():
            prof = {k: c for k, c in prof.items() if c}
            if not prof:
                continue
            row = {}
            ok = True
            for key, c in prof.items():
                if key not in lower_intern.index:
                    ok = False
                    break
                row[lower_intern.index[key]] = c
            coords = lower_sub.coordinates(row) if ok else NOT_IN_SPAN
            assert not isinstance(coords, NotInSpan), \
                "decomposition: lower side not recognized (sign or basis bug)"
            for j1, c in enumerate(coords):
                if c:
                    mid.setdefault(j1, {})[uk] = c
        # stage 2: upper profiles must lie in the upper block
        upper_embedded, upper_sub, upper_intern = qbv_block_basis(u_ar, m2)
        for j1, prof in sorted(mid.items()):
            row = {}
            ok = True
            for key, c in prof.items():
                if key not in upper_intern.index:
                    ok = False
                    break
                row[upper_intern.index[key]] = c
            coords = upper_sub.coordinates(row) if ok else NOT_IN_SPAN
            assert not isinstance(coords, NotInSpan), \
                "decomposition: upper side not recognized (sign or basis bug)"
            for j2, c in enumerate(coords):
                if c:
                    out.append((S, slot, (m1, j1), (m2, j2), c))
    return tuple(out)
