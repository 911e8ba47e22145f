"""Reference computations that share no code with the package.

Everything here uses plain Fractions and floats so a bug in the kernel or
the rank engine cannot leak into the expected values.
"""
from fractions import Fraction


def exact_rank(rows):
    """Rank over Q by fraction-exact Gaussian elimination."""
    a = [[Fraction(x) for x in r] for r in rows]
    if not a:
        return 0
    rank, ncols = 0, len(a[0])
    for c in range(ncols):
        piv = next((i for i in range(rank, len(a)) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        for i in range(len(a)):
            if i != rank and a[i][c] != 0:
                f = a[i][c] / a[rank][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[rank])]
        rank += 1
    return rank


def matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))] for i in range(len(A))]


def kalman_matrix(A, C):
    """(C; CA; ...; CA^(n-1)) stacked."""
    n = len(A)
    out, block = [], [list(r) for r in C]
    for _ in range(n):
        out.extend(block)
        block = matmul(block, A)
    return out


def kalman_rank(A, C):
    return exact_rank(kalman_matrix(A, C))


def central_difference(f, point, name, h=1e-6):
    """(f(p + h e) - f(p - h e)) / 2h for a callable taking a dict of floats."""
    up = dict(point)
    dn = dict(point)
    up[name] += h
    dn[name] -= h
    return (f(up) - f(dn)) / (2 * h)
