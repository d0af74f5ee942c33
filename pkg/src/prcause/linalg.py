"""Exact linear solves over the rationals."""
from fractions import Fraction


def solve(rows, rhs):
    """Solve ``A x = b`` exactly for a square nonsingular system.

    ``rows`` is a list of sparse rows, each a dict ``column -> coefficient``;
    ``rhs`` the matching right-hand sides. Returns a list of Fractions.
    Raises ``ZeroDivisionError`` if the matrix is singular.
    """
    n = len(rows)
    a = [dict(r) for r in rows]
    b = [Fraction(v) for v in rhs]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r].get(col)), None)
        if pivot is None:
            raise ZeroDivisionError("singular system")
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            b[col], b[pivot] = b[pivot], b[col]
        prow = a[col]
        inv = 1 / Fraction(prow[col])
        if inv != 1:
            for k in prow:
                prow[k] = prow[k] * inv
            b[col] *= inv
        for r in range(n):
            if r == col:
                continue
            row = a[r]
            factor = row.get(col)
            if not factor:
                continue
            for k, v in prow.items():
                nv = row.get(k, 0) - factor * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            b[r] -= factor * b[col]
    return b
