"""Moving least squares and its direct (functional) generalization.

The local fit uses shifted-scaled monomials centered at the evaluation/test
point; a linear functional ``lam`` applied to the basis turns the usual shape
functions ``p(x) (P^T W P)^{-1} P^T W`` into a direct recovery of ``lam(u)``
from nodal values.  Only weight *values* are exposed here: nothing in this
module ever differentiates the weight function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .geometry import NodeSet

COND_LIMIT = 1e12


class NodeDeficiencyError(Exception):
    """The active node set cannot support the polynomial degree at a point."""

    def __init__(self, point, cond, detail=""):
        self.point = np.asarray(point, dtype=float)
        self.cond = cond
        msg = f"deficient node set at {self.point} (condition {cond:.3e})"
        super().__init__(msg + (f": {detail}" if detail else ""))


@lru_cache(maxsize=None)
def monomial_exponents(m: int, dim: int) -> tuple:
    """Exponent multi-indices of total degree <= m in graded lexicographic order."""
    if m < 1:
        raise ValueError("basis degree must be >= 1")
    exps = [e for e in np.ndindex(*(m + 1,) * dim) if sum(e) <= m]
    exps.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return tuple(exps)


def basis_size(m: int, dim: int) -> int:
    return math.comb(m + dim, dim)


class PolyBasis:
    """Shifted-scaled monomials p_n(x) = ((x - center)/scale)^alpha."""

    def __init__(self, m: int, dim: int, center, scale: float):
        if scale <= 0.0:
            raise ValueError("basis scale must be positive")
        self.m = m
        self.dim = dim
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.exponents = np.array(monomial_exponents(m, dim))

    @property
    def q(self) -> int:
        return self.exponents.shape[0]

    def values(self, points) -> np.ndarray:
        """Basis values at one point (Q,) or a stack of points (n, Q)."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        z = (np.atleast_2d(pts) - self.center) / self.scale
        out = np.prod(z[:, None, :] ** self.exponents[None, :, :], axis=2)
        return out[0] if single else out

    def derivative(self, points, alpha) -> np.ndarray:
        """D^alpha of every basis function; rejects |alpha| > m.

        All such derivatives vanish identically, so a request for one is
        treated as a caller bug rather than silently returning zeros.
        """
        alpha = np.asarray(alpha, dtype=np.int64)
        order = int(alpha.sum())
        if order > self.m:
            raise ValueError(f"derivative order {tuple(alpha)} exceeds degree {self.m}")
        if order == 0:
            return self.values(points)
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        z = (np.atleast_2d(pts) - self.center) / self.scale
        exps = self.exponents - alpha
        ok = np.all(exps >= 0, axis=1)
        # falling-factorial coefficient per basis function
        coeff = np.prod(
            [[math.perm(int(e), int(a)) for e in self.exponents[:, i]]
             for i, a in enumerate(alpha)],
            axis=0,
        ).astype(float)
        out = np.prod(
            z[:, None, :] ** np.clip(exps, 0, None)[None, :, :], axis=2
        ) * coeff[None, :] / self.scale**order
        out[:, ~ok] = 0.0
        return out[0] if single else out

    def gradients(self, points) -> np.ndarray:
        """First derivatives of all basis functions, shape (n, Q, d)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty((pts.shape[0], self.q, self.dim))
        for j in range(self.dim):
            alpha = np.zeros(self.dim, dtype=np.int64)
            alpha[j] = 1
            out[:, :, j] = self.derivative(pts, alpha)
        return out


class WeightFunction:
    """Compactly supported Gaussian weight; exposes values only."""

    def __init__(self, eps: float = 4.0):
        if eps <= 0.0:
            raise ValueError("shape parameter must be positive")
        self.eps = float(eps)
        self._floor = math.exp(-eps * eps)

    def __call__(self, dist, delta) -> np.ndarray:
        r = np.asarray(dist, dtype=float) / delta
        w = (np.exp(-((self.eps * r) ** 2)) - self._floor) / (1.0 - self._floor)
        return np.where(r < 1.0, w, 0.0)


def weight_eval(x, y, eps: float, delta: float) -> float:
    """Weight value between two points; zero at and beyond distance delta."""
    if delta <= 0.0:
        raise ValueError("support radius must be positive")
    d = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
    return float(WeightFunction(eps)(d, delta))


def basis_eval(basis: PolyBasis, x, alpha=None) -> np.ndarray:
    """Evaluate D^alpha of the basis at x (alpha=None means plain values)."""
    if alpha is None or not np.any(alpha):
        return basis.values(x)
    return basis.derivative(x, alpha)


@dataclass
class MomentSystem:
    """Factorized weighted normal equations of the local fit at one point."""

    point: np.ndarray
    basis: PolyBasis
    active: np.ndarray          # global node indices
    node_points: np.ndarray
    weights: np.ndarray
    cho: tuple
    cond: float
    node_basis: np.ndarray      # basis values at the active nodes

    @classmethod
    def build(cls, x, nodes: NodeSet, m: int, eps: float = 4.0,
              delta: float | None = None) -> "MomentSystem":
        x = np.asarray(x, dtype=float)
        if delta is None:
            delta = nodes.support_at(x)
        active = nodes.neighbors(x, delta)
        q = basis_size(m, nodes.dim)
        basis = PolyBasis(m, nodes.dim, x, delta)
        if active.size < q:
            raise NodeDeficiencyError(x, math.inf,
                                      f"{active.size} active nodes for {q} basis functions")
        pts = nodes.points[active]
        w = WeightFunction(eps)(np.linalg.norm(pts - x, axis=1), delta)
        p = basis.values(pts)
        a = (p.T * w) @ p
        eig = np.linalg.eigvalsh(a)
        cond = float(eig[-1] / eig[0]) if eig[0] > 0.0 else math.inf
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise NodeDeficiencyError(x, cond)
        try:
            cho = scipy.linalg.cho_factor(a)
        except scipy.linalg.LinAlgError as err:
            raise NodeDeficiencyError(x, cond, str(err)) from None
        return cls(point=x, basis=basis, active=active, node_points=pts,
                   weights=w, cho=cho, cond=cond, node_basis=p)

    def phi(self) -> np.ndarray:
        """(P^T W P)^{-1} P^T W, shape (Q, n_active)."""
        return scipy.linalg.cho_solve(self.cho, self.node_basis.T * self.weights)

    def row(self, lambda_p: np.ndarray) -> np.ndarray:
        """Coefficients a(lambda) = lambda(p) A^{-1} P^T W for stacked functionals."""
        lambda_p = np.atleast_2d(np.asarray(lambda_p, dtype=float))
        return lambda_p @ self.phi()


@dataclass
class GmlsRow:
    """Recovery coefficients of one (or several stacked) linear functionals."""

    point: np.ndarray
    active: np.ndarray
    coefficients: np.ndarray    # (n_rows, n_active)

    def apply(self, nodal_values: np.ndarray) -> np.ndarray:
        """Contract against per-node data (values indexed by global node)."""
        return self.coefficients @ np.asarray(nodal_values)[self.active]


def mls_shape(x, nodes: NodeSet, m: int, eps: float = 4.0,
              delta: float | None = None) -> GmlsRow:
    """Classical shape-function row: the point-evaluation functional at x."""
    moment = MomentSystem.build(x, nodes, m, eps=eps, delta=delta)
    lam = moment.basis.values(moment.point)
    return GmlsRow(moment.point, moment.active, moment.row(lam))


def gmls_row(lambda_p: np.ndarray, moment: MomentSystem) -> GmlsRow:
    """Direct recovery row for a functional given its action on the basis."""
    return GmlsRow(moment.point, moment.active, moment.row(lambda_p))


def gmls_derivative_row(x, alpha, nodes: NodeSet, m: int, eps: float = 4.0,
                        delta: float | None = None) -> GmlsRow:
    """Row recovering D^alpha u(x) directly from nodal values."""
    moment = MomentSystem.build(x, nodes, m, eps=eps, delta=delta)
    lam = moment.basis.derivative(moment.point, alpha)
    return GmlsRow(moment.point, moment.active, moment.row(lam))


def dump_rows(rows, path) -> None:
    """Plain-text dump of recovery rows for regression diffs."""
    with open(path, "w") as fh:
        for row in rows:
            coords = ",".join(f"{v:.17g}" for v in row.point)
            fh.write(f"point {coords}\n")
            for r in np.atleast_2d(row.coefficients):
                for j, c in zip(row.active, r):
                    fh.write(f"  {int(j)} {c:.17g}\n")
