"""Homotopy cooperads as families of tree-indexed decomposition maps.

A structure is a square-zero degree -1 derivation on the free operad over the
desuspended basis; equivalently a family {Delta_t} with Delta of the trivial
tree zero, deg Delta_t = #vertices(t) - 2, elementwise finite support, and
the quadratic identity.  The axiom checker expands the derivation squared on
every generator; the homotopy transfer theorem produces the structure on a
retract by summing over all ways of writing each target tree by successive
substitutions of smaller trees interleaved with the homotopy.
"""

from fractions import Fraction
from functools import cache

from . import trees as tr
from . import treewise as tw
from . import koszul as K
from .linalg import NOT_IN_SPAN, NotInSpan, ONE, ZERO
from .signs import FLIPS, desuspension_sign, jump_sign


class HoCooperad:
    """A homotopy cooperad presented on a basis.

    ``elements``: iterable of opaque keys; ``arity``/``degree``: key -> int;
    ``delta``: key -> dict[(tree, keys_tuple) -> Fraction] listing every
    nonzero component, the corolla component being the differential.
    """

    def __init__(self, elements, arity, degree, delta, name=""):
        self.elements = list(elements)
        self.arity = arity
        self.degree = degree
        self._delta = delta
        self.name = name

    @property
    def delta(self):
        return self._delta

    def decoration(self, key):
        return tw.as_decoration(key, self.arity(key), self.degree(key))

    def delta_components(self, key, t=None):
        comps = self._delta(key)
        if t is None:
            return comps
        return {tk: c for tk, c in comps.items() if tk[0] == t}


def corolla_tree(n):
    return tuple(range(1, n + 1)) if n >= 1 else None


# ---------------------------------------------------------------------------
# the derivation on the free operad over the desuspended basis


def _generator_image(C, key):
    """d(s^{-1} key) as a treewise vector over desuspended decorations.

    The desuspension identification runs through the structural (preorder)
    tensor: convert the stored tuple to preorder on full degrees, strip the
    suspensions there, and convert back on desuspended degrees."""
    out = {}
    for (t, keys), coeff in C.delta(key).items():
        order = tr.vertex_paths(t)
        idx = {p: i for i, p in enumerate(order)}
        perm = [idx[p] for p in tw.preorder_paths(t)]
        full = [C.degree(k) for k in keys]
        desusp = [d - 1 for d in full]
        from .signs import koszul_sign

        s1 = koszul_sign(perm, full)
        s2 = desuspension_sign([full[i] for i in perm])
        inv = [0] * len(perm)
        for newpos, old in enumerate(perm):
            inv[old] = newpos
        s3 = koszul_sign(inv, [desusp[i] for i in perm])
        decs = tuple(
            tw.as_decoration(("s", k), C.arity(k), C.degree(k) - 1) for k in keys
        )
        tw.tv_insert(out, (t, decs), coeff * s1 * s2 * s3)
    return out


def derivation_apply(C, v):
    """Extend the generator map to a derivation of the free operad: a signed
    sum over vertices, the operator jumping the preorder prefix."""
    out = {}
    for (t, decs), coeff in v.items():
        idx = tr.vertex_index(t)
        prefix = 0
        for p in tw.preorder_paths(t):
            pos = idx[p]
            dec = decs[pos - 1]
            key = dec.payload[1]
            img = _generator_image(C, key)
            s = jump_sign(-1, prefix, flip_key="derivation_jump")
            for sub_key, c2 in img.items():
                k2, s2 = tw.substitute_term((t, decs), pos, sub_key)
                tw.tv_insert(out, k2, coeff * c2 * s * s2)
            prefix += dec.degree
    return out


def check_axioms(C, keys=None):
    """Verify the homotopy cooperad axioms: the derivation extending the
    structure maps squares to zero on every listed generator.

    Returns a report dict with pass flag and the first violation witness.
    """
    report = {"ok": True, "checked": 0, "witness": None}
    for key in keys if keys is not None else C.elements:
        start = _generator_image(C, key)
        residual = derivation_apply(C, start)
        report["checked"] += 1
        if residual:
            witness_key = min(residual, key=lambda tk: tr.tree_sort_key(tk[0]))
            report["ok"] = False
            report["witness"] = {
                "element": key,
                "tree": tr.format_tree(witness_key[0]),
                "decorations": [str(g) for g in witness_key[1]],
                "coefficient": residual[witness_key],
            }
            return report
    return report


# ---------------------------------------------------------------------------
# the Koszul dual dg cooperad as a (strict) homotopy cooperad


def _two_vertex_tree(n, S):
    """The 2-vertex tree with n leaves whose upper vertex covers the leaf
    set S; returns (tree, upper_first)."""
    kids = [tuple(sorted(S))] + [l for l in range(1, n + 1) if l not in S]
    t = tr.canonical(tuple(kids))
    return t, 1 in S


def qbv_key(n, m, j):
    return ("q", n, m, j)


def qbv_degree(key):
    _, n, m, j = key
    if n == 1:
        return 2 * m
    flat, _ = K.ge_basis(n)
    return 2 * m + tw.term_degree(next(iter(flat[j])))


def qbv_arity(key):
    return key[1]


@cache
def _dpsi_matrix(n):
    """Coordinates of d_psi on the Gerstenhaber dual basis at arity n."""
    flat, _ = K.ge_basis(n)
    cols = []
    for v in flat:
        img = K.d_psi(v)
        coords = K.ge_coordinates(n, img) if img else [ZERO] * len(flat)
        assert not isinstance(coords, NotInSpan)
        cols.append(coords)
    return cols


@cache
def _h_matrix(n):
    """Coordinates of the weighted homotopy H on the basis at arity n."""
    flat, _ = K.ge_basis(n)
    cols = []
    for v in flat:
        img = K.contracting_H(v)
        coords = K.ge_coordinates(n, img) if img else [ZERO] * len(flat)
        assert not isinstance(coords, NotInSpan)
        cols.append(coords)
    return cols


@cache
def _qbv_delta(key):
    """All structure components of a Koszul-dual basis element: the corolla
    differential d_phi plus the binary decomposition maps."""
    _, n, m, j = key
    out = {}
    # corolla: d_phi
    if m >= 1 and n >= 2:
        for j2, c in enumerate(_dpsi_matrix(n)[j]):
            if c:
                tw.tv_insert(out, (corolla_tree(n), (qbv_key(n, m - 1, j2),)), c)
    # binary decompositions
    for S, slot, (m1, j1), (m2, j2), coeff in K.decompose_basis_element(n, m, j):
        t, upper_first = _two_vertex_tree(n, S)
        lo = qbv_key(n - len(S) + 1, m1, j1)
        up = qbv_key(len(S), m2, j2)
        sign = 1
        if upper_first:
            # stored decorations follow the vertex order; the decomposition
            # is born lower-then-upper
            sign = jump_sign(qbv_degree(lo), qbv_degree(up))
            decs = (up, lo)
        else:
            decs = (lo, up)
        tw.tv_insert(out, (t, decs), coeff * sign)
    return out


def qbv_hocooperad(max_arity, max_delta):
    """The Koszul dual dg cooperad within bounds, as a homotopy cooperad
    (all components on trees with >= 3 vertices vanish)."""
    elements = []
    for n in range(1, max_arity + 1):
        dim = 1 if n == 1 else len(K.ge_basis(n)[0])
        for m in range(0, max_delta + 1):
            for j in range(dim):
                if n == 1 and m == 0:
                    continue  # the counit is not an element of the coideal
                elements.append(qbv_key(n, m, j))
    return HoCooperad(elements, qbv_arity, qbv_degree, _qbv_delta, name="qBV-dual")


# ---------------------------------------------------------------------------
# homotopy transfer


def _connected_subsets(t):
    nv = tr.n_vertices(t)
    return [s for s in tr.connected_nests(t)] + (
        [frozenset(range(1, nv + 1))] if nv >= 2 else []
    )


@cache
def seq_factorizations(t):
    """All ways of writing t by successive substitutions of trees with at
    least two vertices: a list of sequences [t1, (j1, t2), ..., (jk, t_{k+1})].

    A step removes the last factor: a connected vertex set S with
    2 <= |S| <= #t - 1 contracts to give the previous tree, the factor being
    the standardized piece and j its vertex position there.
    """
    nv = tr.n_vertices(t)
    assert nv >= 2
    seqs = [(t,)]
    for S in tr.connected_nests(t):
        if len(S) >= nv:
            continue
        piece, _ = tr.nest_piece(t, (S,), S)
        prev, pos = tr.quotient_tree(t, [S])
        j = pos[S]
        for seq in seq_factorizations(prev):
            seqs.append(tuple(seq) + ((j, piece, S),))
    return tuple(seqs)


class Retract:
    """A deformation retract datum between a homotopy cooperad C and a graded
    module H: i includes H-generators as C-basis vectors, p projects, h is
    the degree +1 homotopy in C-basis coordinates."""

    def __init__(self, i, p, h, h_elements, h_arity, h_degree):
        self.i = i          # H-key -> dict[C-key -> coeff]
        self.p = p          # C-key -> dict[H-key -> coeff]
        self.h = h          # C-key -> dict[C-key -> coeff]
        self.h_elements = list(h_elements)
        self.h_arity = h_arity
        self.h_degree = h_degree


def bv_model_retract(max_arity, max_delta):
    """The Theorem-level deformation retract of the Koszul dual onto the
    delta towers plus the gravity model, in basis coordinates."""

    def i(g):
        vec = K.i_map(g)
        return _model_to_coords(vec)

    def p(ckey):
        _, n, m, j = ckey
        out = {}
        if n == 1:
            if m >= 1:
                out[K.delta_gen(m)] = ONE
            return out
        if m != 0:
            return {}
        flat, _ = K.ge_basis(n)
        img = K.contracting_H(K.d_psi(flat[j]))
        if not img:
            return {}
        coords = K.hom_coordinates(n, img)
        assert not isinstance(coords, NotInSpan)
        return {K.grav_gen(n, jj): c for jj, c in enumerate(coords) if c}

    def h(ckey):
        _, n, m, j = ckey
        if n == 1:
            return {}
        return {
            qbv_key(n, m + 1, j2): c
            for j2, c in enumerate(_h_matrix(n)[j])
            if c
        }

    gens = K.generators(max_arity, max_delta)
    return Retract(i, p, h, gens, K.gen_arity, K.gen_degree)


def _model_to_coords(model_vec):
    """Express a model vector (delta power, treewise key) in the Koszul-dual
    basis coordinates {("q", n, m, j): coeff}."""
    out = {}
    slices = {}
    for (m, key), c in model_vec.items():
        slices.setdefault((m, tw.term_arity(key)), {})[key] = c
    for (m, n), sl in slices.items():
        if n == 1:
            out[qbv_key(1, m, 0)] = out.get(qbv_key(1, m, 0), ZERO) + sl[K.TRIV_KEY]
            continue
        coords = K.ge_coordinates(n, sl)
        assert not isinstance(coords, NotInSpan)
        for j, c in enumerate(coords):
            if c:
                out[qbv_key(n, m, j)] = out.get(qbv_key(n, m, j), ZERO) + c
    return {k: c for k, c in out.items() if c}


def _apply_linear_at(C, state_vec, pos, table):
    """Replace the decoration at a 1-based vertex position through a linear
    map given per C-key, with the operator jump over the preorder prefix."""
    out = {}
    for (t, decs), coeff in state_vec.items():
        idx = tr.vertex_index(t)
        prefix = 0
        for p in tw.preorder_paths(t):
            if idx[p] == pos:
                break
            prefix += decs[idx[p] - 1].degree
        dec = decs[pos - 1]
        img = table(dec.payload)
        if not img:
            continue
        for key2, c2 in img.items():
            dec2 = C.decoration(key2)
            s = jump_sign(dec2.degree - dec.degree, prefix)
            k2 = (t, decs[:pos - 1] + (dec2,) + decs[pos:])
            tw.tv_insert(out, k2, coeff * c2 * s)
    return out


def _apply_delta_at(C, state_vec, pos, factor_tree):
    """Substitute the factor-tree components of the structure map at a
    vertex, jumping the preorder prefix."""
    out = {}
    for (t, decs), coeff in state_vec.items():
        idx = tr.vertex_index(t)
        prefix = 0
        for p in tw.preorder_paths(t):
            if idx[p] == pos:
                break
            prefix += decs[idx[p] - 1].degree
        dec = decs[pos - 1]
        comps = C.delta_components(dec.payload, factor_tree)
        if not comps:
            continue
        op_degree = tr.n_vertices(factor_tree) - 2
        s = jump_sign(op_degree, prefix)
        for (ft, keys), c2 in comps.items():
            sub_decs = tuple(C.decoration(k) for k in keys)
            k2, s2 = tw.substitute_term((t, decs), pos, (ft, sub_decs))
            tw.tv_insert(out, k2, coeff * c2 * s * s2)
    return out


def _project_state(retract, state_key, coeff, out):
    """Apply t(p) to a state and accumulate into ``out``; p has degree 0 so
    no Koszul jumps appear."""
    t, decs = state_key
    results = [((), coeff)]
    for dec in decs:
        proj = retract.p(dec.payload)
        if not proj:
            return
        new = []
        for (acc, cc) in results:
            for hk, cv in proj.items():
                new.append((acc + (hk,), cc * cv))
        results = new
    for acc, cc in results:
        tw.tv_insert(out, (t, acc), cc)


def _delta_all_at(C, state_vec, pos, max_vertices):
    """Substitute every (>= 2 vertex) structure component at a vertex."""
    out = {}
    for (t, decs), coeff in state_vec.items():
        if tr.n_vertices(t) >= max_vertices:
            continue
        idx = tr.vertex_index(t)
        prefix = 0
        for p in tw.preorder_paths(t):
            if idx[p] == pos:
                break
            prefix += decs[idx[p] - 1].degree
        dec = decs[pos - 1]
        for (ft, keys), c2 in C.delta_components(dec.payload).items():
            nv = tr.n_vertices(ft)
            if nv < 2 or tr.n_vertices(t) + nv - 1 > max_vertices:
                continue
            s = jump_sign(nv - 2, prefix)
            sub_decs = tuple(C.decoration(k) for k in keys)
            k2, s2 = tw.substitute_term((t, decs), pos, (ft, sub_decs))
            tw.tv_insert(out, k2, coeff * c2 * s * s2)
    return out


def transferred_components(C, retract, g, max_vertices):
    """All transferred structure maps on one H-generator: the forward
    expansion of the transfer sum.  The first factor applies directly to the
    inclusion; every later factor is preceded by the homotopy at the same
    vertex.  Every state reached projects through t(p) into the output.

    Returns dict[(t, H-keys tuple) -> coeff] over all trees with >= 2
    vertices and at most ``max_vertices`` vertices.
    """
    out = {}
    start = {}
    for ckey, c in retract.i(g).items():
        dec = C.decoration(ckey)
        tw.tv_insert(start, (corolla_tree(C.arity(ckey)), (dec,)), c)

    memo = {}

    def tail(state_key):
        """Contributions of all continuations (h then a factor, anywhere,
        any number of times) from one state, the state itself included."""
        hit = memo.get(state_key)
        if hit is not None:
            return hit
        out_local = {}
        _project_state(retract, state_key, ONE, out_local)
        nv = tr.n_vertices(state_key[0])
        for pos in range(1, nv + 1):
            base = _apply_linear_at(C, {state_key: ONE}, pos, retract.h)
            if not base:
                continue
            new = _delta_all_at(C, base, pos, max_vertices)
            for k2, c2 in new.items():
                for tk, cv in tail(k2).items():
                    tw.tv_insert(out_local, tk, c2 * cv)
        memo[state_key] = out_local
        return out_local

    for k0, c0 in start.items():
        # the first factor applies with no homotopy
        nv = tr.n_vertices(k0[0])
        for pos in range(1, nv + 1):
            new = _delta_all_at(C, {k0: ONE}, pos, max_vertices)
            for k2, c2 in new.items():
                for tk, cv in tail(k2).items():
                    tw.tv_insert(out, tk, c0 * c2 * cv)
    return out


def transferred_component(C, retract, g, t):
    """The transferred structure map for one target tree, summed over the
    factorization sequences directly (the literal transfer formula); kept as
    a cross-check of the forward expansion."""
    out = {}
    start = {}
    for ckey, c in retract.i(g).items():
        dec = C.decoration(ckey)
        tw.tv_insert(start, (corolla_tree(C.arity(ckey)), (dec,)), c)
    for seq in seq_factorizations(t):
        t1 = seq[0]
        state = _apply_delta_at(C, start, 1, t1)
        for (j, piece, S) in seq[1:]:
            if not state:
                break
            state = _apply_linear_at(C, state, j, retract.h)
            state = _apply_delta_at(C, state, j, piece)
        if not state:
            continue
        for (tt, decs), coeff in state.items():
            if tt != t:
                continue
            _project_state(retract, (tt, decs), coeff, out)
    return out


def p_infinity_component(C, retract, ckey, t):
    """The infinity-quasi-isomorphism component p_t on a C-basis element:
    the transfer sum with a leading homotopy instead of the inclusion."""
    out = {}
    start0 = {}
    for ck, c in retract.h(ckey).items():
        dec = C.decoration(ck)
        tw.tv_insert(start0, (corolla_tree(C.arity(ck)), (dec,)), c)
    if not start0:
        return out
    for seq in seq_factorizations(t):
        t1 = seq[0]
        state = _apply_delta_at(C, start0, 1, t1)
        for (j, piece, S) in seq[1:]:
            if not state:
                break
            state = _apply_linear_at(C, state, j, retract.h)
            state = _apply_delta_at(C, state, j, piece)
        if not state:
            continue
        for (tt, decs), coeff in state.items():
            if tt != t:
                continue
            results = [((), ONE)]
            for dec in decs:
                proj = retract.p(dec.payload)
                new = []
                for (acc, cc) in results:
                    for hk, cv in proj.items():
                        new.append((acc + (hk,), cc * cv))
                results = new
                if not results:
                    break
            for acc, cc in results:
                tw.tv_insert(out, (t, acc), coeff * cc)
    return out


def candidate_trees(C_arities, n, max_vertices, unary_allowed=True):
    """Trees on which transferred components can be nonzero within bounds."""
    arities = sorted(set(a for a in C_arities if a >= 1))
    if not unary_allowed:
        arities = [a for a in arities if a >= 2]
    return [
        t
        for t in tr.enumerate_trees(n, max_vertices, tuple(arities))
        if tr.n_vertices(t) >= 2
    ]


class TransferredStructure(HoCooperad):
    """The homotopy cooperad structure on the homology produced by the
    homotopy transfer theorem, computed lazily per element within bounds."""

    def __init__(self, C, retract, max_vertices=None):
        self.C = C
        self.retract = retract
        self.max_vertices = max_vertices
        self._cache = {}
        super().__init__(
            retract.h_elements,
            retract.h_arity,
            retract.h_degree,
            self._delta_fn,
            name="transferred",
        )

    def _delta_fn(self, g):
        hit = self._cache.get(g)
        if hit is not None:
            return hit
        deg = self.retract.h_degree(g)
        bound = max(2, deg) if self.max_vertices is None else self.max_vertices
        out = transferred_components(self.C, self.retract, g, bound)
        self._cache[g] = out
        return out


def transfer_bv(max_arity, max_delta, max_vertices=None):
    """The transferred homotopy cooperad on the homology of the Koszul dual
    (the generators of the minimal model), within bounds."""
    C = qbv_hocooperad(max_arity, max_delta)
    retract = bv_model_retract(max_arity, max_delta)
    return TransferredStructure(C, retract, max_vertices)
