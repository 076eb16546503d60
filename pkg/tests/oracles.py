"""Independent brute-force oracles shared across test modules."""

import numpy as np
from scipy.optimize import linprog


def torus_distance(a, b):
    d = np.abs(a - b)
    return np.minimum(d, 1.0 - d)


def w2_circle_lp(x, wx, y, wy):
    """Exact discrete optimal transport on the unit circle via linear programming.

    Cost is the squared geodesic distance; returns the 2-Wasserstein
    distance between sum wx_i delta_{x_i} and sum wy_j delta_{y_j}.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    wx = np.asarray(wx, dtype=float)
    wy = np.asarray(wy, dtype=float)
    n, m = x.size, y.size
    cost = torus_distance(x[:, None], y[None, :]) ** 2
    a_eq = []
    b_eq = []
    for i in range(n):
        row = np.zeros((n, m))
        row[i, :] = 1.0
        a_eq.append(row.ravel())
        b_eq.append(wx[i])
    for j in range(m - 1):  # last column constraint is redundant
        row = np.zeros((n, m))
        row[:, j] = 1.0
        a_eq.append(row.ravel())
        b_eq.append(wy[j])
    res = linprog(
        cost.ravel(),
        A_eq=np.array(a_eq),
        b_eq=np.array(b_eq),
        bounds=(0, None),
        method="highs",
    )
    assert res.success, res.message
    return float(np.sqrt(max(res.fun, 0.0)))
