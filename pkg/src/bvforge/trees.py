"""Reduced rooted trees with bijectively labeled leaves.

A tree is either a leaf (a positive int, its label) or a tuple of at least
one subtree.  Every internal vertex therefore has >= 1 input; the bare leaf
``1`` doubles as the trivial (vertex-free) tree of arity one.

The canonical planar form sorts the children of every vertex by the minimal
leaf label reachable above them (shuffle-tree normal form).  On canonical
trees we use a total order on internal vertices: walk the planar contour
starting at leaf 1 and number vertices in order of first encounter.
Concretely, the vertices on the path from the parent of leaf 1 down to the
root are numbered as they are met, and each off-path subtree is numbered in
preorder at the moment the walk passes its attachment point.

Vertices are identified either by their path from the root (a tuple of child
indices) or by their 1-based position in this vertex order.
"""

from fractions import Fraction
from functools import cache
from itertools import combinations

Tree = object  # int leaf or tuple of subtrees


def is_leaf(t):
    return isinstance(t, int)


def min_leaf(t):
    # on canonical trees the minimal leaf sits above the first child
    while not is_leaf(t):
        t = t[0]
    return t


def _min_leaf_any(t):
    # works on non-canonical trees
    if is_leaf(t):
        return t
    return min(_min_leaf_any(c) for c in t)


def canonical(t):
    """Canonical planar form: children sorted by minimal leaf above them."""
    if is_leaf(t):
        return t
    kids = sorted((canonical(c) for c in t), key=_min_leaf_any)
    return tuple(kids)


def leaf_list(t):
    if is_leaf(t):
        return [t]
    out = []
    for c in t:
        out.extend(leaf_list(c))
    return out


def arity(t):
    return len(leaf_list(t))


@cache
def n_vertices(t):
    if is_leaf(t):
        return 0
    return 1 + sum(n_vertices(c) for c in t)


def subtree_at(t, path):
    for i in path:
        t = t[i]
    return t


def replace_at(t, path, new):
    if not path:
        return new
    i = path[0]
    return t[:i] + (replace_at(t[i], path[1:], new),) + t[i + 1:]


def _preorder_paths(t, path):
    if is_leaf(t):
        return []
    out = [path]
    for i, c in enumerate(t):
        out.extend(_preorder_paths(c, path + (i,)))
    return out


@cache
def vertex_paths(t):
    """Paths of internal vertices in the planar vertex order (see module doc)."""
    if is_leaf(t):
        return ()
    spine = []
    node, path = t, ()
    while not is_leaf(node):
        spine.append((node, path))
        path = path + (0,)
        node = node[0]
    out = []
    for node, path in reversed(spine):
        out.append(path)
        for i in range(1, len(node)):
            out.extend(_preorder_paths(node[i], path + (i,)))
    return tuple(out)


@cache
def vertex_index(t):
    """Map path -> 1-based position in the vertex order."""
    return {p: k + 1 for k, p in enumerate(vertex_paths(t))}


@cache
def parent_vector(t):
    """For each vertex (1-based), the index of its parent vertex, 0 for the root."""
    idx = vertex_index(t)
    par = {}
    for path, k in idx.items():
        par[k] = idx[path[:-1]] if path else 0
    return par


def internal_edges(t):
    """Edges between two internal vertices, as (parent_path, child_position)."""
    out = []
    for path in vertex_paths(t):
        node = subtree_at(t, path)
        for i, c in enumerate(node):
            if not is_leaf(c):
                out.append((path, i))
    return out


def contract_edge(t, edge):
    """Merge the child vertex of ``edge`` into its parent."""
    ppath, ci = edge
    node = subtree_at(t, ppath)
    child = node[ci]
    assert not is_leaf(child), "edge is not internal"
    merged = node[:ci] + child + node[ci + 1:]
    return canonical(replace_at(t, ppath, merged))


def substitute(t, i, s):
    """Substitute the tree ``s`` at the i-th vertex (1-based, vertex order) of ``t``.

    The arity of ``s`` must equal the number of inputs of that vertex; leaf j
    of ``s`` receives the j-th input branch (in planar order).
    """
    path = vertex_paths(t)[i - 1]
    node = subtree_at(t, path)
    assert arity(s) == len(node), "arity mismatch in substitution"
    branches = {j + 1: node[j] for j in range(len(node))}

    def plant(u):
        if is_leaf(u):
            return branches[u]
        return tuple(plant(c) for c in u)

    return canonical(replace_at(t, path, plant(s)))


def loday_weights(t):
    """Loday weight of each vertex of a binary tree: product of the leaf
    counts above its two inputs.  Keyed by vertex path."""
    out = {}

    def count(u):
        if is_leaf(u):
            return 1
        assert len(u) == 2, "Loday weights need a binary tree"
        return count(u[0]) + count(u[1])

    for path in vertex_paths(t):
        node = subtree_at(t, path)
        assert len(node) == 2, "Loday weights need a binary tree"
        out[path] = count(node[0]) * count(node[1])
    return out


def weight_denominator(nv):
    """Sum of all Loday weights of a binary tree with ``nv`` vertices."""
    return nv * (nv + 1) // 2


# ---------------------------------------------------------------------------
# enumeration


def _set_partitions(elems, k):
    """Unordered partitions of the list into k nonempty blocks, blocks sorted
    by their minimum."""
    elems = sorted(elems)
    if k == 1:
        yield [elems]
        return
    if len(elems) < k:
        return
    first, rest = elems[0], elems[1:]
    # choose companions of the first element
    for r in range(len(rest) - (k - 1) + 1):
        for comp in combinations(rest, r):
            block = [first] + list(comp)
            remaining = [e for e in rest if e not in comp]
            for sub in _set_partitions(remaining, k - 1):
                yield sorted([block] + sub, key=lambda b: b[0])


def _gen_trees(leafset, max_v, arities):
    """Yield (tree, used_vertices) for all canonical reduced trees on the
    given leaf labels with at most max_v vertices."""
    if len(leafset) == 1:
        yield leafset[0], 0
    if max_v < 1:
        return
    for k in sorted(arities):
        if k > len(leafset) and k != 1:
            continue
        if k == 1:
            for sub, used in _gen_trees(leafset, max_v - 1, arities):
                yield (sub,), used + 1
            continue
        for blocks in _set_partitions(leafset, k):
            for kids, used in _gen_children(blocks, max_v - 1, arities):
                yield tuple(kids), used + 1


def _gen_children(blocks, budget, arities):
    if not blocks:
        yield [], 0
        return
    head, tail = blocks[0], blocks[1:]
    for sub, used in _gen_trees(head, budget, arities):
        for rest, used2 in _gen_children(tail, budget - used, arities):
            yield [sub] + rest, used + used2


def enumerate_trees(n, max_vertices, allowed_arities=(1, 2, 3, 4, 5, 6)):
    """All canonical reduced trees with leaves 1..n, vertex count <= bound and
    vertex arities in the allowed set.  Deterministic order."""
    assert n >= 1
    seen = set()
    out = []
    for t, used in _gen_trees(list(range(1, n + 1)), max_vertices, set(allowed_arities)):
        if n > 1 and is_leaf(t):
            continue
        if t not in seen:
            seen.add(t)
            out.append(t)
    out.sort(key=tree_sort_key)
    return out


def enumerate_binary_trees(n):
    """All canonical binary trees with leaves 1..n (exactly n-1 vertices)."""
    return enumerate_trees(n, max(n - 1, 0), (2,)) if n > 1 else [1]


def tree_sort_key(t):
    if is_leaf(t):
        return (0, t)
    return (1, len(t)) + tuple(tree_sort_key(c) for c in t)


# ---------------------------------------------------------------------------
# text encoding


def format_tree(t):
    if is_leaf(t):
        return str(t)
    return "(" + ",".join(format_tree(c) for c in t) + ")"


def parse_tree(s):
    s = s.replace(" ", "")
    pos = 0

    def parse():
        nonlocal pos
        if s[pos] == "(":
            pos += 1
            kids = [parse()]
            while s[pos] == ",":
                pos += 1
                kids.append(parse())
            assert s[pos] == ")", "unbalanced tree expression"
            pos += 1
            return tuple(kids)
        j = pos
        while j < len(s) and s[j].isdigit():
            j += 1
        assert j > pos, "expected a leaf label at position %d" % pos
        val = int(s[pos:j])
        pos = j
        return val

    t = parse()
    assert pos == len(s), "trailing characters in tree expression"
    return canonical(t)


# ---------------------------------------------------------------------------
# nested trees


@cache
def connected_nests(t):
    """All connected sets of >= 2 vertices (by 1-based index), sorted."""
    nv = n_vertices(t)
    par = parent_vector(t)
    out = []
    for r in range(2, nv + 1):
        for comb in combinations(range(1, nv + 1), r):
            s = frozenset(comb)
            # connected iff every vertex except the top one has its parent in s
            tops = [v for v in s if par[v] not in s]
            if len(tops) == 1:
                out.append(s)
    out.sort(key=lambda s: (len(s), sorted(s)))
    return tuple(out)


def _compatible(a, b):
    i = a & b
    return not i or a <= b or b <= a


def nest_heights(nests):
    """Nesting height of each nest inside the family: 0 for innermost."""
    hs = {}
    for s in sorted(nests, key=len):
        inner = [hs[u] for u in nests if u < s]
        hs[s] = 1 + max(inner) if inner else 0
    return hs


def sort_nests(nests):
    """The paper's nest order: outermost first; innermost nests are the
    largest.  Ties broken by minimal element."""
    hs = nest_heights(nests)
    return tuple(sorted(nests, key=lambda s: (-hs[s], min(s))))


def enumerate_nestings(t):
    """All nest families on ``t``, each sorted in nest order, with a flag
    marking the maximal ones.  Returns a list of (nesting, is_maximal)."""
    nv = n_vertices(t)
    if nv == 0:
        return []
    if nv == 1:
        return [((), True)]
    full = frozenset(range(1, nv + 1))
    cands = [s for s in connected_nests(t) if s != full]
    families = []

    def extend(chosen, start):
        families.append(list(chosen))
        for k in range(start, len(cands)):
            s = cands[k]
            if all(_compatible(s, u) for u in chosen):
                chosen.append(s)
                extend(chosen, k + 1)
                chosen.pop()

    extend([], 0)
    out = []
    for fam in families:
        nesting = sort_nests([full] + fam)
        out.append((nesting, len(nesting) == nv - 1))
    out.sort(key=lambda pair: (len(pair[0]), [sorted(s) for s in pair[0]]))
    return out


def consecutive_nest_pairs(nesting):
    """Pairs (i, j), 1-based positions with T_j strictly inside T_i and no
    nest strictly between."""
    out = []
    n = len(nesting)
    for a in range(n):
        for b in range(n):
            ta, tb = nesting[a], nesting[b]
            if tb < ta:
                if not any(tb < nesting[c] < ta for c in range(n)):
                    out.append((a + 1, b + 1))
    out.sort()
    return out


def nest_blocks(nesting, T):
    """Maximal proper subnests of T inside the family, plus the singleton
    vertices of T not covered by them.  Returns a list of frozensets."""
    proper = [u for u in nesting if u < T]
    maximal = [u for u in proper if not any(u < w for w in proper)]
    covered = set().union(*maximal) if maximal else set()
    blocks = list(maximal) + [frozenset([v]) for v in sorted(T - covered)]
    return blocks


def contracted_labels(nesting, T):
    """Labels (least elements) of the vertices of the contracted tree t_T."""
    return sorted(min(b) for b in nest_blocks(nesting, T))


def nest_degree(nesting, T):
    """Degree of a nest: 2 minus the vertex count of its contracted tree."""
    return 2 - len(nest_blocks(nesting, T))


def quotient_tree(t, blocks):
    """Contract each block (a disjoint family of connected vertex sets,
    indices 1-based) of ``t`` to a single vertex.

    Returns (tree, block_position) where block_position maps each input block
    to the 1-based vertex-order index of its image in the quotient tree.
    """
    paths = vertex_paths(t)
    idx = vertex_index(t)
    block_of = {}
    for b in blocks:
        for v in b:
            block_of[v] = b

    def build(path):
        node = subtree_at(t, path)
        me = idx[path]
        kids = []
        for i, c in enumerate(node):
            if is_leaf(c):
                kids.append(c)
            else:
                ck = idx[path + (i,)]
                if me in block_of and block_of.get(ck) is block_of[me]:
                    kids.extend(build(path + (i,))[0])
                else:
                    sub, _ = build(path + (i,))
                    kids.append(sub)
        return tuple(kids), me

    raw, _ = build(())
    q = canonical(raw)

    # map blocks to vertex indices of q: a block's image is the vertex whose
    # leaf set matches the set of leaves reachable from the block's top vertex
    def leaves_above(v):
        path = paths[v - 1]
        return frozenset(leaf_list(subtree_at(t, path)))

    par = parent_vector(t)
    pos = {}
    qidx = vertex_index(q)
    qpaths = vertex_paths(q)
    singles = [frozenset([v]) for v in range(1, n_vertices(t) + 1) if v not in block_of]
    for b in list(blocks) + singles:
        top = next(v for v in b if par[v] not in b)
        target = leaves_above(top)
        for qp in qpaths:
            if frozenset(leaf_list(subtree_at(q, qp))) == target:
                pos[b] = qidx[qp]
                break
        else:
            raise AssertionError("block image not found in quotient tree")
    return q, pos


def nest_piece(t, nesting, T):
    """The contracted tree of the nest T (proper subnests collapsed), as a
    standalone standardized tree.

    Returns (piece, vertex_labels) where ``piece`` is a canonical tree whose
    leaves are 1..k (ranked by minimal original leaf above each input branch)
    and vertex_labels maps each 1-based vertex index of ``piece`` to the label
    (least original vertex) of the corresponding block.
    """
    blocks = nest_blocks(nesting, T)
    paths = vertex_paths(t)
    idx = vertex_index(t)
    par = parent_vector(t)
    top = next(v for v in T if par[v] not in T)
    block_of = {}
    for b in blocks:
        for v in b:
            block_of[v] = b

    # walk the induced subtree; block boundaries become vertices, dangling
    # branches become leaves keyed by their minimal original leaf
    def build_block(b):
        top_b = next(v for v in b if par[v] not in b)
        return ("V", min(b), tuple(walk(top_b, b)))

    def walk(v, b):
        node = subtree_at(t, paths[v - 1])
        path = paths[v - 1]
        kids = []
        for i, c in enumerate(node):
            ck = idx.get(path + (i,)) if not is_leaf(c) else None
            if ck is not None and ck in T:
                if ck in b:
                    kids.extend(walk(ck, b))
                else:
                    kids.append(build_block(block_of[ck]))
            else:
                kids.append(("L", c if is_leaf(c) else min(leaf_list(c))))
        return kids

    raw = build_block(block_of[top])

    # collect branch keys and standardize leaf labels
    keys = []

    def collect(u):
        if u[0] == "L":
            keys.append(u[1])
        else:
            for c in u[2]:
                collect(c)

    collect(raw)
    rank = {k: i + 1 for i, k in enumerate(sorted(keys))}

    label_by_leafmin = {}

    def strip(u):
        if u[0] == "L":
            return rank[u[1]]
        kids = tuple(strip(c) for c in u[2])
        label_by_leafmin[frozenset(leaf_list_std(kids))] = u[1]
        return kids

    def leaf_list_std(kids):
        out = []
        for c in kids:
            if is_leaf(c):
                out.append(c)
            else:
                out.extend(leaf_list_std(c))
        return out

    piece = canonical(strip(raw))
    labels = {}
    for path in vertex_paths(piece):
        key = frozenset(leaf_list(subtree_at(piece, path)))
        labels[vertex_index(piece)[path]] = label_by_leafmin[key]
    return piece, labels
