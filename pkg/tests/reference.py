"""Exact rational evaluation of the fully discrete scheme, written as the
literal triple sums (no precomputed tables, no reordering).

Valid for binary uniform breakage b = 2/rho and the product kernel
K = 2*alpha*eps*rho, where every integral is rational.
"""

from fractions import Fraction as F


def cells(edges):
    edges = [F(e) for e in edges]
    mids = [(a + b) / 2 for a, b in zip(edges, edges[1:])]
    widths = [b - a for a, b in zip(edges, edges[1:])]
    return edges, mids, widths


def frag(lo, hi, parent):
    # int_lo^hi 2/parent d eps
    return 2 * (hi - lo) / parent


def upper(i, j, edges, mids):
    return mids[i] if i == j else edges[i + 1]


def K(alpha, x, y):
    return 2 * F(alpha) * x * y


def weights(edges):
    edges, mids, _ = cells(edges)
    I = len(mids)
    return [
        sum(mids[l] * frag(edges[l], upper(l, i, edges, mids), mids[i]) for l in range(i + 1)) / mids[i]
        for i in range(I)
    ]


def rates(edges, c, alpha=1):
    edges, mids, widths = cells(edges)
    c = [F(v) for v in c]
    I = len(mids)
    lam = weights(edges)
    birth, death = [], []
    for i in range(I):
        b = F(0)
        for l in range(I):
            for j in range(i, I):
                b += (
                    K(alpha, mids[j], mids[l]) * c[j] * c[l] * widths[j] * widths[l]
                    * frag(edges[i], upper(i, j, edges, mids), mids[j])
                )
        birth.append(b / widths[i])
        death.append(sum(K(alpha, mids[i], mids[j]) * c[i] * c[j] * widths[j] * lam[i] for j in range(I)))
    return birth, death


def step(edges, c, dt, alpha=1):
    b, d = rates(edges, c, alpha)
    return [F(ci) + F(dt) * (bi - di) for ci, bi, di in zip(c, b, d)]
