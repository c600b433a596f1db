"""Charted manifolds and the pointwise connection oracle.

A ChartedManifold is one coordinate patch: coordinate names, a sampling
box, and a symmetric matrix of metric-component expressions.  Everything
here is evaluated pointwise; derivatives go through the expression
layer's exact dual numbers, with a central finite-difference mode
(h = 1e-5, one Richardson step) kept around for cross-checks.

`koszul` is the oracle of record: it computes 2 g(nabla_X Y, Z) from the
six-term identity using only metric values, directional derivatives, and
Lie brackets -- fully independent of `christoffel`.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import expr as ex

FD_STEP = 1e-5


class GeometryError(Exception):
    """Base class for chart/tensor-level errors."""


class NotPositiveDefiniteError(GeometryError):
    def __init__(self, point, min_eigenvalue):
        super().__init__(
            f"metric is not positive definite at {tuple(point)}: "
            f"min eigenvalue {min_eigenvalue:.6g}"
        )
        self.point = tuple(point)
        self.min_eigenvalue = min_eigenvalue


class DimensionMismatchError(GeometryError):
    pass


@dataclass(frozen=True)
class ChartedManifold:
    """A coordinate patch with a metric given entrywise as expressions."""

    name: str
    coords: tuple
    box: tuple  # per-coordinate (lo, hi)
    metric: tuple  # dim x dim matrix of Expr, structurally symmetric

    def __post_init__(self):
        d = len(self.coords)
        if d == 0:
            raise DimensionMismatchError("empty coordinate list")
        if len(self.box) != d:
            raise DimensionMismatchError("box does not match coordinate count")
        if len(self.metric) != d or any(len(row) != d for row in self.metric):
            raise DimensionMismatchError("metric matrix does not match dimension")
        declared = set(self.coords)
        for i in range(d):
            for j in range(d):
                if self.metric[i][j] != self.metric[j][i]:
                    raise GeometryError(
                        f"metric entry ({i},{j}) is not structurally symmetric"
                    )
                undeclared = ex.variables(self.metric[i][j]) - declared
                if undeclared:
                    raise GeometryError(
                        f"metric entry ({i},{j}) uses undeclared coordinates {sorted(undeclared)}"
                    )

    @property
    def dim(self):
        return len(self.coords)

    def bindings(self, p):
        if len(p) != self.dim:
            raise DimensionMismatchError(
                f"point of length {len(p)} on a {self.dim}-dimensional chart"
            )
        return dict(zip(self.coords, p))

    def contains(self, p):
        return all(lo <= x <= hi for x, (lo, hi) in zip(p, self.box))


def validate_field(M: ChartedManifold, components, kind="field"):
    if len(components) != M.dim:
        raise DimensionMismatchError(
            f"{kind} has {len(components)} components on a {M.dim}-dimensional chart"
        )
    declared = set(M.coords)
    for k, comp in enumerate(components):
        undeclared = ex.variables(comp) - declared
        if undeclared:
            raise GeometryError(
                f"{kind} component {k} uses undeclared coordinates {sorted(undeclared)}"
            )
    return tuple(components)


def validate_endo(M: ChartedManifold, matrix):
    if len(matrix) != M.dim:
        raise DimensionMismatchError("endomorphism matrix does not match dimension")
    for row in matrix:
        validate_field(M, row, kind="endomorphism row")
    return tuple(tuple(row) for row in matrix)


def coordinate_field(M: ChartedManifold, k):
    """The k-th coordinate vector field, as constant expressions."""
    return tuple(ex.ONE if i == k else ex.ZERO for i in range(M.dim))


def zero_field(M: ChartedManifold):
    return tuple(ex.ZERO for _ in range(M.dim))


# -- pointwise evaluation ----------------------------------------------------


def field_at(M, F, p):
    env = M.bindings(p)
    return np.array([ex.evaluate(c, env) for c in F])


def endo_at(M, A, p):
    env = M.bindings(p)
    return np.array([[ex.evaluate(c, env) for c in row] for row in A])


def scalar_at(M, f, p):
    return ex.evaluate(f, M.bindings(p))


def _grad_dual(M, e, p):
    env = M.bindings(p)
    v, g = ex.eval_grad(e, env, M.coords)
    return v, np.array(g)


def _grad_fd(M, e, p):
    # central difference with one Richardson step: (4 D(h/2) - D(h)) / 3
    p = np.asarray(p, dtype=float)
    env = M.bindings(p)
    v = ex.evaluate(e, env)
    g = np.zeros(M.dim)
    for s in range(M.dim):
        def d(h):
            hi = p.copy()
            lo = p.copy()
            hi[s] += h
            lo[s] -= h
            return (
                ex.evaluate(e, M.bindings(hi)) - ex.evaluate(e, M.bindings(lo))
            ) / (2.0 * h)

        g[s] = (4.0 * d(FD_STEP / 2.0) - d(FD_STEP)) / 3.0
    return v, g


def scalar_grad(M, e, p, mode="dual"):
    """(value, gradient) of a scalar expression at p."""
    if mode == "dual":
        return _grad_dual(M, e, p)
    if mode == "fd":
        return _grad_fd(M, e, p)
    raise ValueError(f"unknown derivative mode {mode!r}")


def field_grad(M, F, p, mode="dual"):
    """Values and Jacobian of a component tuple: J[s, k] = d F^k / d x^s."""
    vals = np.zeros(len(F))
    jac = np.zeros((M.dim, len(F)))
    for k, comp in enumerate(F):
        v, g = scalar_grad(M, comp, p, mode)
        vals[k] = v
        jac[:, k] = g
    return vals, jac


# -- metric ------------------------------------------------------------------


def _metric_values(M, p):
    env = M.bindings(p)
    d = M.dim
    G = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            G[i, j] = G[j, i] = ex.evaluate(M.metric[i][j], env)
    return G


def _cholesky_check(M, p, G):
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        eigs = np.linalg.eigvalsh(G)
        raise NotPositiveDefiniteError(p, float(eigs.min())) from None


def metric_at(M: ChartedManifold, p):
    """Metric matrix at p; raises NotPositiveDefiniteError if Cholesky fails."""
    G = _metric_values(M, p)
    _cholesky_check(M, p, G)
    return G


def metric_inverse_at(M: ChartedManifold, p):
    G = metric_at(M, p)
    return np.linalg.solve(G, np.eye(M.dim))


@functools.lru_cache(maxsize=65536)
def _metric_with_gradients(M, p, mode):
    d = M.dim
    G = np.zeros((d, d))
    dG = np.zeros((d, d, d))  # dG[s, i, j] = d g_ij / d x^s
    for i in range(d):
        for j in range(i, d):
            v, g = scalar_grad(M, M.metric[i][j], p, mode)
            G[i, j] = G[j, i] = v
            dG[:, i, j] = dG[:, j, i] = g
    _cholesky_check(M, p, G)
    G.setflags(write=False)
    dG.setflags(write=False)
    return G, dG


def metric_with_gradients(M, p, mode="dual"):
    return _metric_with_gradients(M, tuple(float(x) for x in p), mode)


@functools.lru_cache(maxsize=65536)
def _christoffel_cached(M, p, mode):
    G, dG = _metric_with_gradients(M, p, mode)
    Ginv = np.linalg.solve(G, np.eye(M.dim))
    # Gamma^k_ij = 1/2 g^{kh} (g_ih,j + g_hj,i - g_ij,h); the bracket is
    # symmetric in (i, j) because the metric matrix is entrywise symmetric.
    bracket = (
        np.einsum("jih->hij", dG) + np.einsum("ihj->hij", dG) - np.einsum("hij->hij", dG)
    )
    Gamma = 0.5 * np.einsum("kh,hij->kij", Ginv, bracket)
    Gamma.setflags(write=False)
    return Gamma


def christoffel(M: ChartedManifold, p, mode="dual"):
    """Christoffel symbols of the second kind, Gamma[k, i, j], at p."""
    return _christoffel_cached(M, tuple(float(x) for x in p), mode)


def clear_caches():
    _metric_with_gradients.cache_clear()
    _christoffel_cached.cache_clear()


# -- first-order operations --------------------------------------------------


def lie_bracket(M, X, Y, p, mode="dual"):
    """[X, Y]^k = X^i d_i Y^k - Y^i d_i X^k at p."""
    xv, xj = field_grad(M, X, p, mode)
    yv, yj = field_grad(M, Y, p, mode)
    return xv @ yj - yv @ xj


def nabla(M, X, Y, p, mode="dual"):
    """Levi-Civita covariant derivative (nabla_X Y)^k at p."""
    Gamma = christoffel(M, p, mode)
    xv = field_at(M, X, p)
    yv, yj = field_grad(M, Y, p, mode)
    return xv @ yj + np.einsum("kij,i,j->k", Gamma, xv, yv)


def _pairing_grad(M, G, dG, A, B, aj, bj, av, bv):
    # d_s [ g(A, B) ] with precomputed values/jacobians
    return (
        np.einsum("sij,i,j->s", dG, av, bv)
        + np.einsum("si,ij,j->s", aj, G, bv)
        + np.einsum("i,ij,sj->s", av, G, bj)
    )


def koszul(M, X, Y, Z, p, mode="dual"):
    """The six-term Koszul expression 2 g(nabla_X Y, Z) at p.

    Uses only metric values, exact directional derivatives, and Lie
    brackets -- independent of `christoffel`; this is the oracle of
    record for every connection claim in the package.
    """
    G, dG = metric_with_gradients(M, p, mode)
    xv, xj = field_grad(M, X, p, mode)
    yv, yj = field_grad(M, Y, p, mode)
    zv, zj = field_grad(M, Z, p, mode)

    d_yz = _pairing_grad(M, G, dG, Y, Z, yj, zj, yv, zv)
    d_xz = _pairing_grad(M, G, dG, X, Z, xj, zj, xv, zv)
    d_xy = _pairing_grad(M, G, dG, X, Y, xj, yj, xv, yv)

    br_yz = xv @ yj - yv @ xj  # [X, Y]
    br_zx = zv @ xj - xv @ zj  # [Z, X]
    b_yz = yv @ zj - zv @ yj  # [Y, Z]

    return (
        xv @ d_yz
        + yv @ d_xz
        - zv @ d_xy
        - xv @ G @ b_yz
        + yv @ G @ br_zx
        + zv @ G @ br_yz
    )


def d_oneform(M, eta, X, Y, p, convention="half", mode="dual"):
    """Exterior derivative of a 1-form on a pair of fields.

    convention "half":  d eta (X, Y) = (X eta(Y) - Y eta(X) - eta([X,Y])) / 2
    convention "plain": the same without the 1/2.
    """
    if convention not in ("half", "plain"):
        raise ValueError(f"unknown exterior-derivative convention {convention!r}")
    ev, ej = field_grad(M, eta, p, mode)
    xv, xj = field_grad(M, X, p, mode)
    yv, yj = field_grad(M, Y, p, mode)
    # X[eta(Y)] = X^s d_s (eta_k Y^k)
    x_of_etay = xv @ (ej @ yv + np.einsum("k,sk->s", ev, yj))
    y_of_etax = yv @ (ej @ xv + np.einsum("k,sk->s", ev, xj))
    bracket = xv @ yj - yv @ xj
    val = x_of_etay - y_of_etax - ev @ bracket
    return 0.5 * val if convention == "half" else val


def grad(M, f, p, mode="dual"):
    """(grad f)^i = g^{ij} d_j f at p."""
    _, df = scalar_grad(M, f, p, mode)
    return metric_inverse_at(M, p) @ df


def directional_derivative(M, f, X, p, mode="dual"):
    """X[f] at p for a scalar expression f and vector field X."""
    _, df = scalar_grad(M, f, p, mode)
    return field_at(M, X, p) @ df


def nabla_endo(M, phi, X, Y, p, mode="dual"):
    """(nabla_X phi) Y = nabla_X (phi Y) - phi (nabla_X Y) at p."""
    phiY = tuple(
        ex.add_many(ex.mul(phi[k][j], Y[j]) for j in range(M.dim)) for k in range(M.dim)
    )
    first = nabla(M, X, phiY, p, mode)
    second = endo_at(M, phi, p) @ nabla(M, X, Y, p, mode)
    return first - second


# -- pointwise tensor caches for the axiom checkers --------------------------


@functools.lru_cache(maxsize=65536)
def _endo_covariant_cached(M, phi, p, mode):
    d = M.dim
    Gamma = christoffel(M, p, mode)
    vals = np.zeros((d, d))
    dphi = np.zeros((d, d, d))  # dphi[s, k, j]
    for k in range(d):
        for j in range(d):
            v, g = scalar_grad(M, phi[k][j], p, mode)
            vals[k, j] = v
            dphi[:, k, j] = g
    # (nabla_i phi)^k_j = d_i phi^k_j + Gamma^k_im phi^m_j - Gamma^m_ij phi^k_m
    T = (
        dphi
        + np.einsum("kim,mj->ikj", Gamma, vals)
        - np.einsum("mij,km->ikj", Gamma, vals)
    )
    T.setflags(write=False)
    return T


def endo_covariant_at(M, phi, p, mode="dual"):
    """Covariant derivative tensor T[i, k, j] = (nabla_i phi)^k_j at p.

    Tensorial fast path: einsum(T, X, Y) equals nabla_endo(M, phi, X, Y, p)
    for any fields X, Y (the dY terms cancel analytically).
    """
    return _endo_covariant_cached(M, phi, tuple(float(x) for x in p), mode)


def vector_covariant_at(M, xi, p, mode="dual"):
    """K[i, k] = (nabla_i xi)^k at p, so (nabla_X xi)^k = X^i K[i, k]."""
    Gamma = christoffel(M, p, mode)
    xv, xj = field_grad(M, xi, p, mode)
    return xj + np.einsum("kim,m->ik", Gamma, xv)
