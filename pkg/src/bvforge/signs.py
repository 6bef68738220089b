"""Koszul sign conventions.

Every sign in the engine flows from one rule: the decorations of a tree form
a tensor ordered by the planar vertex order, and any graded symbol moved past
another contributes (-1) to the product of their degrees.  The three entries
of ``FLIPS`` are deliberate mutation points for the sign-sensitivity suite;
they must all be False in production.
"""

FLIPS = {
    # extra sign when a vertexwise coderivation jumps an odd prefix (d_psi)
    "dpsi_jump": False,
    # extra sign on the nest-transposition term of the nested-tree differential
    "nest_transposition": False,
    # extra sign when a derivation of a free operad jumps an odd prefix
    "derivation_jump": False,
}


def koszul_sign(perm, degrees):
    """Sign of reordering graded symbols.

    ``perm`` lists source positions in target order (target_j carries the
    symbol originally at perm[j]); ``degrees`` are the source degrees.
    The sign is (-1)^(sum of degree products over inversions).
    """
    total = 0
    n = len(perm)
    for i in range(n):
        for j in range(i + 1, n):
            if perm[i] > perm[j]:
                total += degrees[perm[i]] * degrees[perm[j]]
    return -1 if total % 2 else 1


def jump_sign(op_degree, jumped_degree_sum, flip_key=None):
    """Sign for moving an operator of the given degree past a block of
    symbols of total degree ``jumped_degree_sum``."""
    s = -1 if (op_degree * jumped_degree_sum) % 2 else 1
    if flip_key and FLIPS[flip_key] and jumped_degree_sum % 2:
        s = -s
    return s


def desuspension_sign(degrees):
    """Sign of the identification t(s c_1, ..., s c_n) -> t(c_1, ..., c_n):
    (-1)^((n-1)|c_1| + (n-2)|c_2| + ... + |c_{n-1}|), where the |c_i| are the
    desuspended degrees."""
    n = len(degrees)
    total = sum((n - 1 - i) * degrees[i] for i in range(n))
    return -1 if total % 2 else 1
