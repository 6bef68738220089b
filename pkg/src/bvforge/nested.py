"""Nested trees: the cofree homotopy cooperad, the homotopy bar construction,
convolution homotopy Lie brackets and the skeletal transfer map.

A nested-tree key is (tree, nests, decorations): the nests are frozensets of
1-based vertex indices stored in the nest order (outermost first, innermost
largest, ties by minimal element), the decorations follow the planar vertex
order.  The tensor convention puts the nest symbols, graded by
2 - #(contracted tree), in front of the decorations; the homological degree
of a key is sum(|v|) + N - n + 1.
"""

from fractions import Fraction
from functools import cache

from . import trees as tr
from . import treewise as tw
from .linalg import ONE, ZERO
from .signs import FLIPS, jump_sign, koszul_sign


def nested_degree(key):
    t, nests, decs = key
    n = tr.n_vertices(t)
    return sum(g.degree for g in decs) + len(nests) - n + 1


def nest_degrees(t, nests):
    return [tr.nest_degree(nests, T) for T in nests]


def make_nested(t, nests, decs):
    nests = tuple(tr.sort_nests(list(nests))) if nests else ()
    return (t, nests, tuple(decs))


def _resort_sign(seq, degrees, target):
    """Koszul sign of reordering ``seq`` (with the given degrees) into the
    ``target`` order."""
    pos = {s: i for i, s in enumerate(seq)}
    perm = [pos[s] for s in target]
    return koszul_sign(perm, degrees)


# ---------------------------------------------------------------------------
# the nested-tree differential


def d_nested_term(key):
    """d_N on one nested-tree key: the signed sum over consecutive nest pairs
    of forgetting the inner nest.  Yields (key, coefficient)."""
    t, nests, decs = key
    if len(nests) < 2:
        return
    degs = nest_degrees(t, nests)
    for (i, j) in tr.consecutive_nest_pairs(nests):
        Ti, Tj = nests[i - 1], nests[j - 1]
        ti_labels = tr.contracted_labels(nests, Ti)
        tj_labels = tr.contracted_labels(nests, Tj)
        n_ti, n_tj = len(ti_labels), len(tj_labels)
        kcount = sum(1 for a in ti_labels if a < min(Tj))
        des = sum(1 for a in tj_labels for b in ti_labels if a > b)
        eps = (
            sum(degs[:i - 1])
            + degs[j - 1] * sum(degs[i:j - 1])
            + n_ti + n_tj + kcount + des
        )
        sign = -1 if eps % 2 else 1
        if FLIPS["nest_transposition"] and (degs[j - 1] * sum(degs[i:j - 1])) % 2:
            sign = -sign
        remaining = [T for T in nests if T is not Tj]
        new_nesting = tuple(remaining)
        new_degs = [tr.nest_degree(new_nesting, T) for T in remaining]
        target = tr.sort_nests(remaining)
        sign *= _resort_sign(remaining, new_degs, target)
        yield (t, tuple(target), decs), Fraction(sign)


def d_nested(v):
    out = {}
    for key, coeff in v.items():
        for k2, c2 in d_nested_term(key):
            tw.tv_insert(out, k2, coeff * c2)
    return out


def d_decorations(v, dv):
    """The induced differential of the decorations: dv maps a decoration
    generator to a dict {generator: coeff} of degree -1; the operator jumps
    the nest block (degree N - n + 1 mod 2) and the earlier decorations."""
    out = {}
    for (t, nests, decs), coeff in v.items():
        nest_deg = len(nests) - tr.n_vertices(t) + 1
        jumped = nest_deg
        for i, g in enumerate(decs):
            img = dv(g)
            if img:
                s = jump_sign(-1, jumped)
                for g2, c2 in img.items():
                    key2 = (t, nests, decs[:i] + (g2,) + decs[i + 1:])
                    tw.tv_insert(out, key2, coeff * c2 * s)
            jumped += g.degree
    return out


# ---------------------------------------------------------------------------
# structure maps of the cofree homotopy cooperad


def induced_subtree(t, S):
    """The full induced subtree on a connected vertex set, standardized, and
    the map 1-based piece position -> original vertex index."""
    piece, labels = tr.nest_piece(t, (frozenset(S),), frozenset(S))
    return piece, labels


def nt_structure_component(key):
    """The single nonzero structure map of a nested tree: forget the full
    nest and decorate the contracted tree with the sub-nested-trees.

    Returns None or ((t1, piece_keys_in_vertex_order), sign).
    """
    t, nests, decs = key
    nv = tr.n_vertices(t)
    if nv < 2:
        return None
    full = nests[0]
    assert full == frozenset(range(1, nv + 1)), "nesting lacks the full nest"
    blocks = tr.nest_blocks(nests, full)
    q, pos = tr.quotient_tree(t, [b for b in blocks if len(b) >= 2])
    # include singleton positions
    for b in blocks:
        if len(b) == 1:
            pass
    qidx = tr.vertex_index(q)
    # order the blocks by their vertex position in q
    block_at = {}
    for b in blocks:
        block_at[pos[b]] = b
    piece_keys = []
    source_symbols = []  # (kind, identity, degree) in source order
    nest_src = list(nests[1:])
    degs_src = nest_degrees(t, nests)[1:]
    # source order: remaining nests, then decorations in vertex order
    seq = [("nest", T) for T in nest_src] + [("dec", i) for i in range(len(decs))]
    seq_degs = degs_src + [g.degree for g in decs]
    target = []
    for qpos in sorted(block_at):
        b = block_at[qpos]
        if len(b) == 1:
            v = next(iter(b))
            piece = tr.canonical(tuple(range(1, len(tr.subtree_at(t, tr.vertex_paths(t)[v - 1])) + 1)))
            pkey = (piece, (), (decs[v - 1],))
            piece_keys.append(pkey)
            target.append(("dec", v - 1))
        else:
            piece, labels = induced_subtree(t, b)
            inv = {orig: p for p, orig in labels.items()}
            sub_nests = [T for T in nests if T <= b]
            mapped = [frozenset(inv[v] for v in T) for T in sub_nests]
            sub_decs = []
            dec_positions = []
            for p in range(1, tr.n_vertices(piece) + 1):
                orig = labels[p]
                sub_decs.append(decs[orig - 1])
                dec_positions.append(orig - 1)
            pkey = make_nested(piece, mapped, sub_decs)
            piece_keys.append(pkey)
            for T in sub_nests:
                target.append(("nest", T))
            for i in dec_positions:
                target.append(("dec", i))
    sign = _resort_sign(seq, seq_degs, target)
    return (q, tuple(piece_keys)), sign


# ---------------------------------------------------------------------------
# NT(V) as a homotopy cooperad (for the axiom gate)


def nt_hocooperad(vertex_gens, dv=None, max_vertices=4, max_leaves=4):
    """The cofree homotopy cooperad on a finite list of generators, truncated
    to the given bounds; ``dv`` is an optional differential on generators."""
    from .hocooperad import HoCooperad

    by_arity = {}
    for g in vertex_gens:
        by_arity.setdefault(g.arity, []).append(g)
    elements = []
    arities = tuple(sorted(by_arity))
    for n in range(1, max_leaves + 1):
        for shape in tr.enumerate_trees(n, max_vertices, arities):
            if tr.is_leaf(shape):
                continue
            paths = tr.vertex_paths(shape)
            from itertools import product as iproduct

            for decs in iproduct(*[by_arity.get(len(tr.subtree_at(shape, p)), []) for p in paths]):
                if len(decs) != len(paths):
                    continue
                for nesting, _maximal in tr.enumerate_nestings(shape):
                    elements.append(make_nested(shape, nesting, decs))

    def arity(key):
        return tr.arity(key[0])

    def degree(key):
        return nested_degree(key)

    def delta(key):
        out = {}
        for k2, c2 in d_nested_term(key):
            tw.tv_insert(out, (corolla(arity(key)), (k2,)), c2)
        if dv is not None:
            for k2, c2 in d_decorations({key: ONE}, dv).items():
                tw.tv_insert(out, (corolla(arity(key)), (k2,)), c2)
        comp = nt_structure_component(key)
        if comp is not None:
            (q, pieces), sign = comp
            tw.tv_insert(out, (q, pieces), Fraction(sign))
        return out

    def corolla(n):
        return tuple(range(1, n + 1))

    return HoCooperad(elements, arity, degree, delta, name="NT")


# ---------------------------------------------------------------------------
# the iterated decomposition map into nested trees


def delta_iter(C, ckey, max_vertices):
    """All components of the universal map into nested trees: for each tree
    with a nesting (within bounds), the iterated application of the
    structure maps along the canonical nest order.

    Returns {(tree, nests, C-keys tuple): coeff}.
    """
    from . import hocooperad as H

    out = {}
    n = C.arity(ckey)
    corolla = tuple(range(1, n + 1))
    out[make_nested(corolla, (), (ckey,))] = ONE if n >= 1 else ONE
    arities = sorted({C.arity(k) for k in C.elements})
    for t in H.candidate_trees(arities, n, max_vertices):
        for nesting, _maximal in tr.enumerate_nestings(t):
            res = _delta_iter_once(C, ckey, t, nesting)
            for (decs,), coeff in res.items():
                key = (t, nesting, decs)
                tw.tv_insert(out, key, coeff)
    return out


def _delta_iter_once(C, ckey, t, nesting):
    """Evaluate the iterated structure maps along one nesting: the k-th nest
    substitutes its contracted tree at the collapsed position, the operator
    jumping the earlier nest symbols."""
    from . import hocooperad as H

    state = {(tuple(range(1, tr.arity(t) + 1)), (C.decoration(ckey),)): ONE}
    degs = nest_degrees(t, nesting)
    for k, T in enumerate(nesting):
        piece, _ = tr.nest_piece(t, nesting, T)
        _, j = _partial_quotient(t, nesting, k)
        # the operator reaches its slot jumping the earlier nest symbols
        nest_jump = jump_sign(tr.n_vertices(piece) - 2, sum(degs[:k]))
        state = H._apply_delta_at(C, state, j, piece)
        if not state:
            return {}
        state = {key: c * nest_jump for key, c in state.items()}
    out = {}
    for (tt, decs), c in state.items():
        assert tt == t, "iterated decomposition built the wrong tree"
        tw.tv_insert(out, (tuple(d.payload for d in decs),), c)
    return out


def _maximal_disjoint(sets):
    out = []
    for s in sets:
        if not any(s < u for u in sets):
            out.append(s)
    return out


def _partial_quotient(t, nesting, k):
    """The quotient of t by the nests from position k on (maximal ones
    contracted), and the vertex position of the k-th nest's block."""
    blocks = _maximal_disjoint(list(nesting[k:]))
    q, pos = tr.quotient_tree(t, blocks)
    return q, pos[nesting[k]]
