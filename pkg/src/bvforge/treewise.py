"""Rational linear combinations of decorated trees.

A decorated tree is a pair (tree, decorations) where the decorations are the
generators sitting at the internal vertices, listed in the planar vertex
order.  Vectors are dicts {(tree, decorations): Fraction} with no zeros.

All reorderings of decoration tensors pick up Koszul signs through
``build_decorated``; higher operations (coderivations, cuts, grafts, leaf
relabeling) construct raw assignments and delegate their sign bookkeeping to
that single primitive.
"""

from dataclasses import dataclass
from fractions import Fraction

_CANON_CACHE = {}

from . import trees as tr
from .linalg import ZERO, ONE
from .signs import koszul_sign, jump_sign


@dataclass(frozen=True)
class Generator:
    """A (co)operad generator: named, with an arity, a homological degree and
    a symmetric-group character ("trivial" or "sign").  The optional payload
    lets basis elements of computed modules ride along as decorations."""

    name: str
    arity: int
    degree: int
    symmetry: str = "trivial"
    payload: object = None

    def __repr__(self):
        return self.name


_DECORATION_CACHE = {}


def as_decoration(key, arity, degree):
    """Intern an opaque basis key as a decoration generator."""
    dec = _DECORATION_CACHE.get(key)
    if dec is None:
        dec = Generator(str(key), arity, degree, payload=key)
        _DECORATION_CACHE[key] = dec
    return dec


def term_degree(key):
    return sum(g.degree for g in key[1])


def term_arity(key):
    return tr.arity(key[0])


def tv_add(target, src, coeff=ONE):
    for k, v in src.items():
        w = target.get(k, ZERO) + coeff * v
        if w:
            target[k] = w
        else:
            target.pop(k, None)
    return target


def tv_scale(v, c):
    if not c:
        return {}
    return {k: c * x for k, x in v.items()}


def tv_equal(a, b):
    return tv_add(dict(a), b, -ONE) == {}


def tv_insert(out, key, coeff):
    if not coeff:
        return
    w = out.get(key, ZERO) + coeff
    if w:
        out[key] = w
    else:
        out.pop(key, None)


# ---------------------------------------------------------------------------
# canonicalization primitive


def _canonicalize_with_paths(t):
    """Canonical form together with the map old_path -> new_path for all
    internal vertices; cached per tree."""
    hit = _CANON_CACHE.get(t)
    if hit is not None:
        return hit
    mapping = {}

    def go(node, old_path, new_path):
        if tr.is_leaf(node):
            return node
        mapping[old_path] = new_path
        order = sorted(range(len(node)), key=lambda i: tr._min_leaf_any(node[i]))
        return tuple(
            go(node[i], old_path + (i,), new_path + (pos,))
            for pos, i in enumerate(order)
        )

    canon = go(t, (), ())
    _CANON_CACHE[t] = (canon, mapping)
    return canon, mapping


def build_decorated(raw_tree, dec_by_path, ref_paths):
    """Canonicalize a decorated tree.

    ``raw_tree``: any tree (children possibly unsorted), ``dec_by_path``: map
    from vertex path to Generator, ``ref_paths``: the current tensor order as
    a list of paths.  Returns (key, sign) with the Koszul sign of passing from
    the reference order to the canonical vertex order; vertex symmetry
    characters contribute when the inputs of a vertex are reordered.
    """
    canon, mapping = _canonicalize_with_paths(raw_tree)
    sign = 1
    for opath, g in dec_by_path.items():
        if g.symmetry == "sign":
            node = tr.subtree_at(raw_tree, opath)
            keys = [tr._min_leaf_any(c) for c in node]
            inv = sum(
                1
                for i in range(len(keys))
                for j in range(i + 1, len(keys))
                if keys[i] > keys[j]
            )
            if inv % 2:
                sign = -sign
    old_by_new = {mapping[p]: p for p in dec_by_path}
    order = tr.vertex_paths(canon)
    assert len(order) == len(dec_by_path) == len(ref_paths), "decoration mismatch"
    ref_pos = {p: i for i, p in enumerate(ref_paths)}
    perm = [ref_pos[old_by_new[np]] for np in order]
    degrees = [dec_by_path[p].degree for p in ref_paths]
    sign *= koszul_sign(perm, degrees)
    decs = tuple(dec_by_path[old_by_new[np]] for np in order)
    return (canon, decs), sign


def make_term(tree, decs_in_vertex_order):
    """Key for an already-canonical decorated tree."""
    t = tr.canonical(tree)
    assert t == tree, "tree not in canonical form"
    paths = tr.vertex_paths(t)
    assert len(paths) == len(decs_in_vertex_order)
    for p, g in zip(paths, decs_in_vertex_order):
        assert len(tr.subtree_at(t, p)) == g.arity, "arity mismatch at vertex"
    return (t, tuple(decs_in_vertex_order))


# ---------------------------------------------------------------------------
# coderivations


def coderivation_vertexwise(eta, eta_degree, v, flip_key=None):
    """Extend a cogenerator map to a coderivation: signed sum over vertices.

    ``eta``: Generator -> dict[Generator, Fraction] (same arity).
    """
    out = {}
    for (t, decs), coeff in v.items():
        jumped = 0
        for i, g in enumerate(decs):
            img = eta(g)
            if img:
                s = jump_sign(eta_degree, jumped, flip_key)
                for g2, c2 in img.items():
                    assert g2.arity == g.arity
                    tv_insert(out, (t, decs[:i] + (g2,) + decs[i + 1:]), coeff * c2 * s)
            jumped += g.degree
    return out


def weighted_homotopy(hmap, v):
    """Vertexwise degree -1 map weighted by w(vertex)/C(n+1,2) on each
    n-vertex binary tree; ``hmap``: Generator -> dict[Generator, Fraction]."""
    out = {}
    for (t, decs), coeff in v.items():
        paths = tr.vertex_paths(t)
        if not paths:
            continue
        weights = tr.loday_weights(t)
        denom = tr.weight_denominator(len(paths))
        jumped = 0
        for i, g in enumerate(decs):
            img = hmap(g)
            if img:
                s = jump_sign(-1, jumped)
                w_factor = Fraction(weights[paths[i]], denom)
                for g2, c2 in img.items():
                    tv_insert(
                        out,
                        (t, decs[:i] + (g2,) + decs[i + 1:]),
                        coeff * c2 * s * w_factor,
                    )
            jumped += g.degree
    return out


def two_vertex_pattern(t, decs, edge):
    """The 2-vertex decorated tree obtained by restricting to the two vertices
    of an internal edge, inputs standardized by minimal leaf above each slot.

    Returns (pattern_key, extraction_sign, (parent_pos, child_pos)); the
    extraction sign moves the later of the two decorations next to the earlier
    one and orients the pair by the pattern's own vertex order.  The swap
    decision is positional: two equal generators still contribute a Koszul
    sign when their order flips.
    """
    ppath, ci = edge
    idx = tr.vertex_index(t)
    p_pos = idx[ppath] - 1
    c_pos = idx[ppath + (ci,)] - 1
    pnode = tr.subtree_at(t, ppath)
    cnode = pnode[ci]
    slots = []
    for i, b in enumerate(pnode):
        if i == ci:
            for b2 in cnode:
                slots.append(("u", tr._min_leaf_any(b2)))
        else:
            slots.append(("l", tr._min_leaf_any(b)))
    ranks = {m: r + 1 for r, (_, m) in enumerate(sorted(slots, key=lambda s: s[1]))}
    upper_labels = tuple(sorted(ranks[m] for kind, m in slots if kind == "u"))
    lower_kids = []
    for i, b in enumerate(pnode):
        if i == ci:
            lower_kids.append(upper_labels)
        else:
            lower_kids.append(ranks[tr._min_leaf_any(b)])
    pattern_tree = tr.canonical(tuple(lower_kids))
    pmin, pmax = min(p_pos, c_pos), max(p_pos, c_pos)
    between = sum(decs[k].degree for k in range(pmin + 1, pmax))
    sign = jump_sign(decs[pmax].degree, between)
    # tensor now holds (v_pmin, v_pmax); orient by the pattern's vertex order
    parent_first = tr.vertex_paths(pattern_tree)[0] == ()
    first_pos = p_pos if parent_first else c_pos
    if first_pos != pmin:
        sign *= jump_sign(decs[pmin].degree, decs[pmax].degree)
    want = (decs[p_pos], decs[c_pos]) if parent_first else (decs[c_pos], decs[p_pos])
    return (pattern_tree, want), sign, (p_pos, c_pos)


def _contracted_paths(t, edge):
    """Path relocation map after contracting ``edge``: every vertex path of t
    except the contracted child maps to its path in the uncanonicalized merged
    tree."""
    ppath, ci = edge
    pnode = tr.subtree_at(t, ppath)
    cpath = ppath + (ci,)
    width = len(pnode[ci])
    move = {}
    for p in tr.vertex_paths(t):
        if p == cpath:
            continue
        if p[:len(cpath)] == cpath:
            move[p] = ppath + (ci + p[len(cpath)],) + p[len(cpath) + 1:]
        elif p[:len(ppath)] == ppath and len(p) > len(ppath) and p[len(ppath)] > ci:
            move[p] = ppath + (p[len(ppath)] + width - 1,) + p[len(ppath) + 1:]
        else:
            move[p] = p
    return move


def preorder_paths(t):
    """Internal-vertex paths in preorder (root first, children left to
    right); the structural order used when blocks are created or merged."""
    if tr.is_leaf(t):
        return []
    out = [()]
    for i, c in enumerate(t):
        out.extend((i,) + p for p in preorder_paths(c))
    return out


def preorder_sign(key):
    """Koszul sign converting the stored tensor (vertex order) to preorder."""
    t, decs = key
    vpaths = list(tr.vertex_paths(t))
    pos = {p: i for i, p in enumerate(vpaths)}
    perm = [pos[p] for p in preorder_paths(t)]
    return koszul_sign(perm, [g.degree for g in decs])


def substitute_term(s_key, i, sub_key):
    """Substitute a decorated tree at the i-th vertex (1-based, vertex order)
    of a decorated tree; leaf j of the substitute receives the j-th input
    branch.

    Operadically a decorated tree is the iterated composition of its
    decorations in preorder (root first, then branch blocks), so both tensors
    are converted to preorder, the substitute's block drops into the slot of
    the old decoration, and the result converts back to the stored vertex
    order.  Returns (key, sign)."""
    st, sdecs = s_key
    ut, udecs = sub_key
    path = tr.vertex_paths(st)[i - 1]
    node = tr.subtree_at(st, path)
    assert tr.arity(ut) == len(node), "arity mismatch in substitution"
    branches = {j + 1: node[j] for j in range(len(node))}
    sign = preorder_sign(s_key) * preorder_sign(sub_key)
    block_paths = preorder_paths(ut)
    uidx = tr.vertex_index(ut)
    block_decs = [udecs[uidx[p] - 1] for p in block_paths]

    def plant(u):
        if tr.is_leaf(u):
            return branches[u]
        return tuple(plant(c) for c in u)

    raw = tr.replace_at(st, path, plant(ut))

    # relocate decoration paths: vertices of the substitute anchor at ``path``;
    # vertices of s above the substituted one re-anchor through its branches
    leaf_paths = {}

    def findleaves(u, p):
        if tr.is_leaf(u):
            leaf_paths[u] = p
            return
        for ii, c in enumerate(u):
            findleaves(c, p + (ii,))

    findleaves(ut, ())

    def relocate(p):
        if p[:len(path)] == path and len(p) > len(path):
            bidx = p[len(path)]
            return path + leaf_paths[bidx + 1] + p[len(path) + 1:]
        return p

    sidx = tr.vertex_index(st)
    dec_by_path, ref = {}, []
    for p in preorder_paths(st):
        if p == path:
            for q, g in zip(block_paths, block_decs):
                dec_by_path[path + q] = g
                ref.append(path + q)
        else:
            np = relocate(p)
            dec_by_path[np] = sdecs[sidx[p] - 1]
            ref.append(np)
    key, s2 = build_decorated(raw, dec_by_path, ref)
    return key, sign * s2


def edge_contraction_terms(key, edge, value_fn):
    """Contract one internal edge, decorating the merged vertex through
    ``value_fn(pattern_key) -> dict[decoration, coeff]``; the pattern key
    holds the (parent, child) pair read off structurally.

    The coefficient is defined by transposing the derivation calculus of the
    free operad: a decorated tree is the iterated partial composition of its
    decorations in preorder, the operator reaches the merged vertex jumping
    the preorder prefix of the contracted tree, and the Sweedler pair it
    creates lands in place, parent before child.  Yields (key, coefficient).
    """
    t, decs = key
    pattern, _, _ = two_vertex_pattern(t, decs, edge)
    img = value_fn(pattern)
    if not img:
        return
    ppath, ci = edge
    pnode = tr.subtree_at(t, ppath)
    raw = tr.replace_at(t, ppath, pnode[:ci] + pnode[ci] + pnode[ci + 1:])
    move = _contracted_paths(t, edge)
    paths = tr.vertex_paths(t)
    idx = tr.vertex_index(t)
    c_pos = idx[ppath + (ci,)] - 1
    pat_deg = pattern[1][0].degree + pattern[1][1].degree
    pat_tree = pattern[0]
    parent_first = tr.vertex_paths(pat_tree)[0] == ()
    # the pair in the pattern's stored (vertex) order, born parent-first:
    # converting the born block to the stored order costs a Koszul swap
    born_conv = 1
    if not parent_first:
        born_conv = jump_sign(pattern[1][0].degree, pattern[1][1].degree)
    for g2, c2 in img.items():
        dec_by_path = {ppath: g2}
        for k, p in enumerate(paths):
            if k == c_pos or p == ppath:
                continue
            dec_by_path[move[p]] = decs[k]
        s_canon, mapping = _canonicalize_with_paths(raw)
        order = tr.vertex_paths(s_canon)
        old_by_new = {mapping[p]: p for p in dec_by_path}
        s_decs = tuple(dec_by_path[old_by_new[np]] for np in order)
        s_key = (s_canon, s_decs)
        i = order.index(mapping[ppath]) + 1
        merged_new = mapping[ppath]
        sidx = tr.vertex_index(s_canon)
        prefix = 0
        for p in preorder_paths(s_canon):
            if p == merged_new:
                break
            prefix += s_decs[sidx[p] - 1].degree
        s_jump = jump_sign(g2.degree - pat_deg, prefix)
        back, s_subst = substitute_term(s_key, i, pattern)
        assert back == key, "substitution does not invert the contraction"
        # substitute_term converts the stored pattern tuple to preorder; undo
        # that conversion since the Sweedler pair is born in preorder
        yield s_key, c2 * s_jump * s_subst * born_conv


def coderivation_edgewise(eta2, eta_degree, v):
    """Extend a map on 2-vertex decorated trees to a coderivation: signed sum
    over internal edges.

    ``eta2``: pattern key (2-vertex decorated tree) -> dict[Generator, coeff];
    the value decorates the contraction vertex.
    """
    out = {}
    for key, coeff in v.items():
        for edge in tr.internal_edges(key[0]):
            for k2, c2 in edge_contraction_terms(key, edge, eta2):
                tv_insert(out, k2, coeff * c2)
    return out


# ---------------------------------------------------------------------------
# symmetric group action


def leaf_relabel_term(key, sigma):
    """Relabel leaves by the permutation sigma (a dict), returning
    (new_key, sign)."""
    t, decs = key
    paths = tr.vertex_paths(t)

    def relab(u):
        if tr.is_leaf(u):
            return sigma[u]
        return tuple(relab(c) for c in u)

    return build_decorated(relab(t), dict(zip(paths, decs)), list(paths))


def leaf_relabel(v, sigma):
    out = {}
    for key, coeff in v.items():
        k2, s = leaf_relabel_term(key, sigma)
        tv_insert(out, k2, coeff * s)
    return out


# ---------------------------------------------------------------------------
# cuts and grafts


def standardize_leaves(t):
    """Relabel leaves order-preservingly by 1..arity; shapes and vertex order
    are unaffected."""
    rank = {l: i + 1 for i, l in enumerate(sorted(tr.leaf_list(t)))}

    def go(u):
        if tr.is_leaf(u):
            return rank[u]
        return tuple(go(c) for c in u)

    return go(t)


def cut_edge_term(key, edge):
    """Infinitesimal 2-part cut of a decorated tree along an internal edge.

    Returns (lower_key, slot, upper_key, upper_leafset, sign): the upper part
    is the full branch above the edge, the lower part keeps a slot leaf at the
    position ranked by min(upper leaves); both parts are standardized.
    """
    t, decs = key
    ppath, ci = edge
    pnode = tr.subtree_at(t, ppath)
    upper_tree = pnode[ci]
    upper_leaves = frozenset(tr.leaf_list(upper_tree))
    slot_key = min(upper_leaves)
    lower_tree = tr.replace_at(t, ppath, pnode[:ci] + (slot_key,) + pnode[ci + 1:])

    paths = tr.vertex_paths(t)
    cpath = ppath + (ci,)
    upper_positions = [k for k, p in enumerate(paths) if p[:len(cpath)] == cpath]
    lower_positions = [k for k in range(len(paths)) if k not in upper_positions]

    # Koszul unshuffle: vertex order -> lower block then upper block
    degrees = [g.degree for g in decs]
    sign = koszul_sign(lower_positions + upper_positions, degrees)

    lkey, s1 = build_decorated(
        standardize_leaves(lower_tree),
        {paths[k]: decs[k] for k in lower_positions},
        [paths[k] for k in lower_positions],
    )
    ukey, s2 = build_decorated(
        standardize_leaves(upper_tree),
        {paths[k][len(cpath):]: decs[k] for k in upper_positions},
        [paths[k][len(cpath):] for k in upper_positions],
    )
    slot = sorted(tr.leaf_list(lower_tree)).index(slot_key) + 1
    return lkey, slot, ukey, upper_leaves, sign * s1 * s2


def infinitesimal_cuts(v):
    """All infinitesimal cuts of all terms: list of
    (lower_key, slot, upper_key, upper_leafset, coefficient)."""
    out = []
    for key, coeff in v.items():
        for edge in tr.internal_edges(key[0]):
            lkey, slot, ukey, S, s = cut_edge_term(key, edge)
            out.append((lkey, slot, ukey, S, coeff * s))
    return out


def graft_term(lower_key, slot, upper_key):
    """Operadic partial composition lower o_slot upper; inverse to
    ``cut_edge_term`` up to standardization.  Returns (key, sign)."""
    lt, ldecs = lower_key
    ut, udecs = upper_key
    k = tr.arity(ut)

    def relab_upper(u):
        if tr.is_leaf(u):
            return u + slot - 1
        return tuple(relab_upper(c) for c in u)

    up = relab_upper(ut)
    slot_path = None

    def find(u, path):
        nonlocal slot_path
        if tr.is_leaf(u):
            if u == slot:
                slot_path = path
            return
        for i, c in enumerate(u):
            find(c, path + (i,))

    find(lt, ())
    assert slot_path is not None, "slot leaf not present in lower tree"

    def plant(u):
        if tr.is_leaf(u):
            if u == slot:
                return up
            return u if u < slot else u + k - 1
        return tuple(plant(c) for c in u)

    raw = plant(lt)
    lpaths = list(tr.vertex_paths(lt))
    upaths = list(tr.vertex_paths(ut))
    dec_by_path = {p: g for p, g in zip(lpaths, ldecs)}
    ref = list(lpaths)
    for p, g in zip(upaths, udecs):
        dec_by_path[slot_path + p] = g
        ref.append(slot_path + p)
    return build_decorated(raw, dec_by_path, ref)


def graft_onto_leafsets(root_gen, parts):
    """Graft treewise vectors onto a fresh root corolla.

    ``parts``: list of (sorted leaf labels, vector over standardized trees);
    each vector's leaves 1..k are relabeled onto the given labels.  The
    reference tensor order is (root, parts sorted by minimal label).
    """
    parts = sorted(parts, key=lambda pr: pr[0][0])
    out = {}

    def expand(i, acc_raw, acc_dec, acc_coeff):
        if i == len(parts):
            raw = tuple(raw_c for raw_c, _, _ in acc_raw)
            dec_by_path = {(): root_gen}
            ref = [()]
            for child_idx, (_, decmap, refpaths) in enumerate(acc_raw):
                for p in refpaths:
                    dec_by_path[(child_idx,) + p] = decmap[p]
                    ref.append((child_idx,) + p)
            key, s = build_decorated(raw, dec_by_path, ref)
            tv_insert(out, key, acc_coeff * s)
            return
        labels, vec = parts[i]
        rank = {j + 1: lab for j, lab in enumerate(labels)}
        for (t, decs), c in vec.items():

            def relab(u):
                if tr.is_leaf(u):
                    return rank[u]
                return tuple(relab(x) for x in u)

            paths = tr.vertex_paths(t)
            expand(
                i + 1,
                acc_raw + [(relab(t), dict(zip(paths, decs)), list(paths))],
                None,
                acc_coeff * c,
            )

    expand(0, [], None, ONE)
    return out


def all_two_part_cuts(key):
    """Every 2-part cut of a decorated tree: a lower part containing the root
    and the upper parts hanging at its slots.

    Returns a list of (lower_key_or_None, [(slot, upper_key, leafset), ...],
    sign); lower None encodes the trivial tree (cut below the root).  The
    trivial cut with the whole tree below is the entry with no uppers.
    """
    t, decs = key
    paths = tr.vertex_paths(t)
    idx = {p: k for k, p in enumerate(paths)}
    degrees = [g.degree for g in decs]
    ordered = sorted(paths, key=len)

    downsets = [frozenset()]
    for p in ordered:
        new = []
        for s in downsets:
            new.append(s)
            if p == () or p[:-1] in s:
                new.append(s | {p})
        downsets = new
    results = []
    for D in downsets:
        if not D:
            results.append((None, [(1, key, frozenset(tr.leaf_list(t)))], 1))
            continue
        upper_roots = sorted(
            (p for p in paths if p not in D and p[:-1] in D),
            key=lambda q: tr._min_leaf_any(tr.subtree_at(t, q)),
        )
        upper_blocks = [
            [k for k, q in enumerate(paths) if q[:len(p)] == p] for p in upper_roots
        ]
        lower_block = sorted(idx[p] for p in D)
        sign = koszul_sign(lower_block + [k for b in upper_blocks for k in b], degrees)
        lower_raw = _cut_many(t, set(upper_roots))
        lkey, s0 = build_decorated(
            standardize_leaves(lower_raw),
            {paths[k]: decs[k] for k in lower_block},
            [paths[k] for k in lower_block],
        )
        sign *= s0
        lower_leaves = sorted(tr.leaf_list(lower_raw))
        upper_data = []
        for p, block in zip(upper_roots, upper_blocks):
            sub = tr.subtree_at(t, p)
            ukey, s1 = build_decorated(
                standardize_leaves(sub),
                {paths[k][len(p):]: decs[k] for k in block},
                [paths[k][len(p):] for k in block],
            )
            sign *= s1
            S = frozenset(tr.leaf_list(sub))
            upper_data.append((lower_leaves.index(min(S)) + 1, ukey, S))
        results.append((lkey, upper_data, sign))
    return results


def _cut_many(t, cut_paths, path=()):
    if tr.is_leaf(t):
        return t
    if path in cut_paths:
        return min(tr.leaf_list(t))
    return tuple(_cut_many(c, cut_paths, path + (i,)) for i, c in enumerate(t))
