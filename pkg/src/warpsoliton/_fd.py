"""Fourth-order finite-difference stencils on uniform grids.

Weights are derived once, exactly, from the Taylor (Vandermonde) conditions
with rational arithmetic, so no hand-typed coefficient tables are involved.
"""

from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.sparse as sp


def _exact_weights(offsets, deriv):
    """Solve sum_j w_j * o_j**p / p! = delta(p, deriv) for p < len(offsets)."""
    size = len(offsets)
    rows = [
        [Fraction(o) ** p / factorial(p) for o in offsets] + [Fraction(int(p == deriv))]
        for p in range(size)
    ]
    for col in range(size):
        pivot = next(i for i in range(col, size) if rows[i][col] != 0)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        lead = rows[col][col]
        rows[col] = [x / lead for x in rows[col]]
        for i in range(size):
            if i != col and rows[i][col] != 0:
                factor = rows[i][col]
                rows[i] = [a - factor * b for a, b in zip(rows[i], rows[col])]
    return [row[-1] for row in rows]


# (offsets, weights) per row position; first derivative uses 5 points,
# second derivative needs 6 for fourth order when one-sided.
_CENTRAL = tuple(range(-2, 3))
_LEFT = {
    1: {0: tuple(range(0, 5)), 1: tuple(range(-1, 4))},
    2: {0: tuple(range(0, 6)), 1: tuple(range(-1, 5))},
}


@lru_cache(maxsize=None)
def stencil(deriv, position):
    """Return (offsets, float weights) for a row at ``position``.

    ``position`` is ``"central"`` or ``("left"|"right", index_from_edge)``.
    """
    if position == "central":
        offsets = _CENTRAL
    else:
        side, idx = position
        offsets = _LEFT[deriv][idx]
        if side == "right":
            offsets = tuple(-o for o in offsets)
    weights = _exact_weights(offsets, deriv)
    return offsets, tuple(float(w) for w in weights)


def _row_spec(i, count, deriv):
    if i < 2:
        return stencil(deriv, ("left", i))
    if i > count - 3:
        return stencil(deriv, ("right", count - 1 - i))
    return stencil(deriv, "central")


def derivative(values, spacing, deriv):
    """Fourth-order derivative of nodal ``values`` (central inside, one-sided at the ends)."""
    values = np.asarray(values, dtype=float)
    count = values.size
    out = np.empty(count)
    offsets, weights = stencil(deriv, "central")
    inner = np.zeros(count - 4)
    for o, w in zip(offsets, weights):
        inner += w * values[2 + o : count - 2 + o]
    out[2 : count - 2] = inner
    for i in (0, 1, count - 2, count - 1):
        offs, wts = _row_spec(i, count, deriv)
        out[i] = sum(w * values[i + o] for o, w in zip(offs, wts))
    return out / spacing**deriv


def even_derivative(values, spacing, deriv):
    """Derivative of data mirrored evenly about the first node (u(-r) = u(r)).

    Only the first two rows change; they become central stencils over ghost
    values, so u'(r_min) is exactly zero.
    """
    values = np.asarray(values, dtype=float)
    out = derivative(values, spacing, deriv)
    ext = np.concatenate([values[2:0:-1], values[:5]])
    offsets, weights = stencil(deriv, "central")
    for i in (0, 1):
        out[i] = sum(w * ext[i + 2 + o] for o, w in zip(offsets, weights)) / spacing**deriv
    if deriv == 1:
        out[0] = 0.0
    return out


@lru_cache(maxsize=32)
def derivative_matrix(count, spacing, deriv, even=False):
    """Sparse (count x count) matrix applying :func:`derivative`.

    With ``even=True`` rows 0 and 1 match :func:`even_derivative`.
    """
    rows, cols, data = [], [], []
    for i in range(count):
        if even and i < 2:
            offs, wts = stencil(deriv, "central")
            if deriv == 1 and i == 0:
                continue
        else:
            offs, wts = _row_spec(i, count, deriv)
        for o, w in zip(offs, wts):
            rows.append(i)
            cols.append(abs(i + o))
            data.append(w / spacing**deriv)
    return sp.csr_matrix((data, (rows, cols)), shape=(count, count))
