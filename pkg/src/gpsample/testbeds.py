"""Closed-form benchmark problems and the ten-bar truss model.

Every evaluator is vectorized over rows: ``f(X)`` with ``X`` of shape
``(n, d)`` returns ``(n,)`` for single-objective problems and ``(n, m)``
for multi-objective ones.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingularStiffness


def _rows(X, d=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if d is not None and X.shape[1] != d:
        raise DimensionMismatch(f"expected {d} inputs, got {X.shape[1]}")
    return X


# ---------------------------------------------------------------- single objective
def schwefel(X):
    X = _rows(X)
    return 418.9829 * X.shape[1] - np.sum(X * np.sin(np.sqrt(np.abs(X))), axis=1)


def rosenbrock(X):
    X = _rows(X)
    return np.sum(100.0 * (X[:, 1:] - X[:, :-1] ** 2) ** 2 + (X[:, :-1] - 1.0) ** 2, axis=1)


def powell(X):
    X = _rows(X)
    if X.shape[1] % 4:
        raise DimensionMismatch("Powell requires a dimension divisible by 4")
    a, b, c, e = (X[:, k::4] for k in range(4))
    return np.sum((a + 10 * b) ** 2 + 5 * (c - e) ** 2 + (b - 2 * c) ** 4 + 10 * (a - e) ** 4, axis=1)


def ackley(X, a=20.0, b=0.2, h=2 * np.pi):
    X = _rows(X)
    d = X.shape[1]
    s1 = np.sqrt(np.sum(X * X, axis=1) / d)
    s2 = np.sum(np.cos(h * X), axis=1) / d
    return -a * np.exp(-b * s1) - np.exp(s2) + a + np.e


def levy(X):
    X = _rows(X)
    w = 1.0 + (X - 1.0) / 4.0
    head = np.sin(np.pi * w[:, 0]) ** 2
    mid = np.sum((w[:, :-1] - 1) ** 2 * (1 + 10 * np.sin(np.pi * w[:, :-1] + 1) ** 2), axis=1)
    tail = (w[:, -1] - 1) ** 2 * (1 + np.sin(2 * np.pi * w[:, -1]) ** 2)
    return head + mid + tail


def _levy_range():
    x = np.linspace(-10.0, 10.0, 200001)[:, None]
    v = levy(x)
    return float(v.min()), float(v.max())


LEVY_MIN, LEVY_MAX = _levy_range()


def levy_1d_normalized(X):
    """1-D Levy on [-10, 10], rescaled to [0, 1] by its min and max there."""
    return (levy(_rows(X, 1)) - LEVY_MIN) / (LEVY_MAX - LEVY_MIN)


def ishigami(X, a=7.0, b=0.1):
    X = _rows(X, 3)
    return np.sin(X[:, 0]) + a * np.sin(X[:, 1]) ** 2 + b * X[:, 2] ** 4 * np.sin(X[:, 0])


def ishigami_indices(a=7.0, b=0.1):
    """Exact first-order and total-effect indices of the Ishigami function."""
    pi = np.pi
    v1 = 0.5 * (1 + b * pi ** 4 / 5) ** 2
    v2 = a ** 2 / 8
    v13 = b ** 2 * pi ** 8 * (1 / 18 - 1 / 50)
    V = v1 + v2 + v13
    S = np.array([v1, v2, 0.0]) / V
    ST = np.array([v1 + v13, v2, v13]) / V
    return S, ST


@dataclass(frozen=True)
class TestFunction:
    name: str
    dim: int
    bounds: np.ndarray
    fn: object = field(repr=False)
    x_star: np.ndarray = None
    c_star: float = None

    def __call__(self, X):
        return self.fn(_rows(X, self.dim))

    def metadata(self):
        return {"name": self.name, "dim": self.dim, "bounds": self.bounds.tolist(),
                "x_star": None if self.x_star is None else self.x_star.tolist(),
                "c_star": self.c_star}


def _box(lo, hi, d):
    return np.tile([float(lo), float(hi)], (d, 1))


def so_benchmark(name, dim=None):
    """Single-objective benchmark by name, with bounds and known minimum."""
    key = name.lower()
    if key == "schwefel":
        d = dim or 2
        return TestFunction("schwefel", d, _box(-500, 500, d), schwefel, np.full(d, 420.9687), 0.0)
    if key == "rosenbrock":
        d = dim or 4
        return TestFunction("rosenbrock", d, _box(-5, 10, d), rosenbrock, np.ones(d), 0.0)
    if key == "powell":
        d = dim or 4
        if d % 4:
            raise DimensionMismatch("Powell requires a dimension divisible by 4")
        return TestFunction("powell", d, _box(-4, 5, d), powell, np.zeros(d), 0.0)
    if key == "ackley":
        d = dim or 16
        return TestFunction("ackley", d, _box(-10, 10, d), ackley, np.zeros(d), 0.0)
    if key in ("levy", "levy1d", "levy-1d"):
        if dim not in (None, 1):
            raise DimensionMismatch("the normalized Levy benchmark is one-dimensional")
        return TestFunction("levy1d", 1, _box(-10, 10, 1), levy_1d_normalized, np.ones(1), 0.0)
    if key == "ishigami":
        if dim not in (None, 3):
            raise DimensionMismatch("Ishigami is three-dimensional")
        return TestFunction("ishigami", 3, _box(-np.pi, np.pi, 3), ishigami)
    if key in ("truss", "truss-so", "truss_so"):
        if dim not in (None, 10):
            raise DimensionMismatch("the truss problem has ten area inputs")
        return TestFunction("truss", 10, np.tile([1e-4, 20e-4], (10, 1)), truss_weighted_objective)
    raise KeyError(f"unknown benchmark {name!r}")


def eval_so_benchmark(name, x):
    """Evaluate a benchmark at ``x``; scalable problems take ``d`` from ``x``."""
    x = _rows(x)
    return so_benchmark(name, x.shape[1])(x)


# ---------------------------------------------------------------- multi-objective
def kno1(X):
    X = _rows(X, 2)
    s = X[:, 0] + X[:, 1]
    with np.errstate(divide="ignore"):
        r = 9.0 - (3 * np.sin(5.0 / (2.0 * s ** 2)) + 3 * np.sin(4 * s) + 5 * np.sin(2 * s + 2))
    phi = np.pi / (12.0 * (X[:, 0] - X[:, 1] + 3.0))
    return np.column_stack([20 - r * np.cos(phi), 20 - r * np.sin(phi)])


def vlmop2(X):
    X = _rows(X, 2)
    c = 1.0 / np.sqrt(2.0)
    return np.column_stack([1 - np.exp(-np.sum((X - c) ** 2, axis=1)),
                            1 - np.exp(-np.sum((X + c) ** 2, axis=1))])


def vlmop3(X):
    X = _rows(X, 2)
    x1, x2 = X[:, 0], X[:, 1]
    q = x1 ** 2 + x2 ** 2
    return np.column_stack([0.5 * q + np.sin(q),
                            (3 * x1 - 2 * x2 + 4) ** 2 / 8 + (x1 - x2 + 1) ** 2 / 27 + 15,
                            1.0 / (q + 1) - 1.1 * np.exp(-q)])


def dtlz2a(X):
    X = _rows(X, 8)
    g = np.sum((X[:, 2:] - 0.5) ** 2, axis=1)
    a, b = X[:, 0] * np.pi / 2, X[:, 1] * np.pi / 2
    return (1 + g)[:, None] * np.column_stack([np.cos(a) * np.cos(b), np.cos(a) * np.sin(b), np.sin(a)])


def truss_bi_objective(X):
    """Total area in 1e-4 m^2 and node-3 displacement in cm, for areas in m^2."""
    X = _rows(X, 10)
    return np.column_stack([X.sum(1) * 1e4, truss_displacement_at_means(X) * 100.0])


@dataclass(frozen=True)
class MOProblem:
    name: str
    dim: int
    n_obj: int
    bounds: np.ndarray
    fn: object = field(repr=False)
    ref_point: np.ndarray = None

    def __call__(self, X):
        return self.fn(_rows(X, self.dim))

    def metadata(self):
        return {"name": self.name, "dim": self.dim, "n_obj": self.n_obj,
                "bounds": self.bounds.tolist(), "ref_point": self.ref_point.tolist()}


def mo_benchmark(name):
    key = name.lower()
    table = {
        "kno1": (2, 2, _box(0, 3, 2), kno1, (25.0, 25.0)),
        "vlmop2": (2, 2, _box(-2, 2, 2), vlmop2, (2.0, 2.0)),
        "vlmop3": (2, 3, _box(-3, 3, 2), vlmop3, (10.0, 18.0, 0.2)),
        "dtlz2a": (8, 3, _box(0, 1, 8), dtlz2a, (2.0, 2.0, 2.0)),
        "truss": (10, 2, np.tile([1e-4, 20e-4], (10, 1)), truss_bi_objective, (200.0, 2.5)),
    }
    if key not in table:
        raise KeyError(f"unknown multi-objective problem {name!r}")
    d, m, b, f, r = table[key]
    return MOProblem(key, d, m, b, f, np.array(r))


def eval_mo_benchmark(name, x):
    return mo_benchmark(name)(x)


# ---------------------------------------------------------------- ten-bar truss
# Two square bays of side L; supports at nodes 5 and 6 (left edge).
#
#   5 ------ 1 ------ 2        P1 acts horizontally (+x) at node 1,
#   |        |        |        P2 downward at node 3, P3 downward at node 4.
#   6 ------ 4 ------ 3
#
# Coordinates in units of L.
TRUSS_NODES = np.array([[1.0, 1.0], [2.0, 1.0], [2.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
# member k connects the two listed nodes (1-based, member k has area A_k)
TRUSS_MEMBERS = np.array([(4, 2), (1, 2), (5, 1), (1, 4), (1, 3),
                          (4, 3), (2, 3), (5, 4), (6, 1), (6, 4)]) - 1
TRUSS_FREE_NODES = 4
# (free DOF index, sign, load index): DOF 2*node is x, 2*node+1 is y
TRUSS_LOADS = ((2 * 0, 1.0, 0), (2 * 2 + 1, -1.0, 1), (2 * 3 + 1, -1.0, 2))
TRUSS_OUTPUT_NODE = 2                    # node 3

TRUSS_NAMES = ["P1", "P2", "P3", "E", "L"] + [f"A{k}" for k in range(1, 11)]
TRUSS_MEANS = dict(P1=60.0, P2=40.0, P3=10.0, E=200.0, L=1.0)


def _truss_geometry():
    i, j = TRUSS_MEMBERS[:, 0], TRUSS_MEMBERS[:, 1]
    d = TRUSS_NODES[j] - TRUSS_NODES[i]
    length = np.hypot(d[:, 0], d[:, 1])
    cs = d / length[:, None]
    g = np.column_stack([-cs, cs])                     # (10, 4) direction vectors
    dofs = np.column_stack([2 * i, 2 * i + 1, 2 * j, 2 * j + 1])
    return length, g, dofs


_LEN, _G, _DOFS = _truss_geometry()


def truss_stiffness(E, L, A):
    """Stacked free-DOF stiffness matrices, shape ``(n, 8, 8)``.

    ``E`` in Pa, ``L`` in m, ``A`` of shape ``(n, 10)`` in m^2.
    """
    E = np.atleast_1d(E).astype(float)
    L = np.atleast_1d(L).astype(float)
    A = np.atleast_2d(A)
    n = A.shape[0]
    ndof = 2 * len(TRUSS_NODES)
    K = np.zeros((n, ndof, ndof))
    k_axial = E[:, None] * A / (L[:, None] * _LEN[None, :])   # (n, 10)
    for m in range(len(_LEN)):
        blk = np.outer(_G[m], _G[m])
        idx = np.ix_(_DOFS[m], _DOFS[m])
        K[(slice(None),) + idx] += k_axial[:, m, None, None] * blk
    f = 2 * TRUSS_FREE_NODES
    return K[:, :f, :f]


def truss_displacement(P1, P2, P3, E, L, A):
    """Downward displacement (m) of node 3.

    Loads in kN, ``E`` in GPa, ``L`` in m and areas in m^2. Scalars and
    arrays broadcast over samples; ``A`` has shape ``(10,)`` or ``(n, 10)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    P1, P2, P3, E, L = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float))
                                             for v in (P1, P2, P3, E, L)))
    n = max(A.shape[0], P1.size)
    A = np.broadcast_to(A, (n, 10))
    P = np.broadcast_to(np.column_stack([P1, P2, P3]), (n, 3)) * 1e3
    if np.any(A <= 0) or np.any(E <= 0) or np.any(L <= 0):
        raise ValueError("areas, modulus and length must be positive")
    K = truss_stiffness(np.broadcast_to(E, n) * 1e9, np.broadcast_to(L, n), A)
    F = np.zeros((n, 2 * TRUSS_FREE_NODES))
    for dof, sign, k in TRUSS_LOADS:
        F[:, dof] += sign * P[:, k]
    try:
        U = np.linalg.solve(K, F[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularStiffness(str(exc)) from exc
    return -U[:, 2 * TRUSS_OUTPUT_NODE + 1]


def truss_from_table(X):
    """Displacement for rows ordered as ``TRUSS_NAMES`` (A in 1e-4 m^2)."""
    X = _rows(X, 15)
    return truss_displacement(X[:, 0], X[:, 1], X[:, 2], X[:, 3], X[:, 4], X[:, 5:] * 1e-4)


def truss_displacement_at_means(A):
    m = TRUSS_MEANS
    return truss_displacement(m["P1"], m["P2"], m["P3"], m["E"], m["L"], A)


def truss_weighted_objective(A, w1=0.6, w2=0.4, c1_max=200e-4, c2_max=3e-2):
    """Weighted sum of total area and node-3 displacement, areas in m^2."""
    A = _rows(A, 10)
    return w1 * A.sum(1) / c1_max + w2 * truss_displacement_at_means(A) / c2_max


def truss_input_distribution():
    """Input uncertainty of the truss, ordered as ``TRUSS_NAMES`` (A in 1e-4 m^2).

    Loads, modulus and length are Gaussian with the given coefficient of
    variation; areas are uniform.
    """
    from .sobol import InputDistribution
    gauss = [("gaussian_cov", 60.0, 0.6), ("gaussian_cov", 40.0, 0.4), ("gaussian_cov", 10.0, 0.1),
             ("gaussian_cov", 200.0, 0.2), ("gaussian_cov", 1.0, 0.05)]
    ranges = [(6.5, 14.5), (3.5, 7.5), (10, 18), (0.4, 1.6), (0.4, 1.6),
              (0.4, 1.6), (3.5, 7.5), (7, 15), (0.4, 1.6), (6.5, 14.5)]
    return InputDistribution(gauss + [("uniform", lo, hi) for lo, hi in ranges], names=TRUSS_NAMES)


# reference first-order indices, in TRUSS_NAMES order
TRUSS_REFERENCE_S = np.array([0.02537, 0.20862, 0.00126, 0.36740, 0.08911, 0.05921, 0.01602,
                              0.05352, 0.00001, 0.00291, 0.00005, 0.01834, 0.07359, 0.00023,
                              0.06985])
