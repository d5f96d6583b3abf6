"""Stiffness assembly for the direct methods (DMLPG1/DMLPG5).

Each weak-form test node contributes a d x (d*Q) functional matrix: the local
weak form applied to the shifted polynomial basis.  That matrix is integrated
over polynomials only, cached across subdomains with identical signatures,
and scattered through the local recovery matrix of the generalized moving
least squares fit.  Essential boundary conditions are collocation rows; mixed
nodes replace only their prescribed component rows.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import elasticity as ela
from . import mls
from .geometry import (DIRICHLET, MIXED, Subdomain, UnsupportedClipError,
                       build_subdomain)

_GEOM_TOL = 1e-12


class SingularSystemError(Exception):
    """Direct factorization failed or produced non-finite values."""


class AssemblyError(Exception):
    """One or more nodes failed during assembly; carries (node, error) pairs."""

    def __init__(self, failures):
        self.failures = failures
        detail = "; ".join(f"node {k}: {e}" for k, e in failures[:5])
        more = "" if len(failures) <= 5 else f" (+{len(failures) - 5} more)"
        super().__init__(f"{len(failures)} node(s) failed during assembly: {detail}{more}")


@dataclass(frozen=True)
class SolverConfig:
    """Discretization parameters shared by the direct and classical methods."""

    m: int = 2
    eps: float = 4.0
    shape: str = "box"              # subdomain shape away from curved boundaries
    box_factor: float = 1.0         # box side = factor * local spacing
    ball_factor: float = 0.7        # ball radius = factor * local spacing
    test_degree: int = 2            # polynomial test-function degree on boxes
    quad_interior: int | None = None   # per-axis points on boxes (None: exact count)
    quad_boundary: int | None = None   # per-axis points on box faces (None: exact)
    quad_radial: int = 10
    quad_angular: int = 10
    quad_curved: int = 24           # rule for subdomains clipped by a curved boundary
    quad_traction: int = 16         # rule for prescribed-traction pieces
    quad_mlpg: int = 10             # per-axis points in the classical methods
    cache: bool = True
    scale_rows: bool = False        # scale weak rows by 1/measure(subdomain)

    def interior_points(self) -> int:
        if self.quad_interior is not None:
            return self.quad_interior
        # per-axis integrand degree (m-1) + test_degree for the volume rows
        return math.ceil((self.m + self.test_degree) / 2)

    def boundary_points(self) -> int:
        if self.quad_boundary is not None:
            return self.quad_boundary
        return math.ceil(self.m / 2)


# ---------------------------------------------------------------------------
# Test functions


class BoxTestFunction:
    """Polynomial bump on the unclipped box: prod_i (1 - 4 dx_i^2/s^2)^(n/2).

    Vanishes on every face of the original box, so clipped faces lying on the
    global boundary are the only boundary pieces where it survives.
    """

    def __init__(self, center, size: float, degree: int = 2):
        if degree < 2 or degree % 2:
            raise ValueError("box test-function degree must be even and >= 2")
        self.center = np.asarray(center, dtype=float)
        self.size = float(size)
        self.power = degree // 2

    def values(self, points) -> np.ndarray:
        z = (np.atleast_2d(points) - self.center) * (2.0 / self.size)
        return np.prod((1.0 - z**2) ** self.power, axis=1)

    def gradients(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        z = (pts - self.center) * (2.0 / self.size)
        factors = (1.0 - z**2) ** self.power
        prod_all = np.prod(factors, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            others = np.where(factors > 0.0, prod_all / factors, 0.0)
        dfac = self.power * (1.0 - z**2) ** (self.power - 1) * (-2.0 * z) * (2.0 / self.size)
        return others * dfac


class GaussianTestFunction:
    """The compactly supported Gaussian bump with support radius r_k."""

    def __init__(self, center, radius: float, eps: float = 4.0):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.eps = float(eps)
        self._floor = math.exp(-eps * eps)

    def values(self, points) -> np.ndarray:
        r = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1) / self.radius
        w = (np.exp(-((self.eps * r) ** 2)) - self._floor) / (1.0 - self._floor)
        return np.where(r < 1.0, w, 0.0)

    def gradients(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        diff = pts - self.center
        dist = np.linalg.norm(diff, axis=1)
        r = dist / self.radius
        dphi = -2.0 * self.eps**2 * r * np.exp(-((self.eps * r) ** 2)) / (1.0 - self._floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where((dist > 0.0) & (r < 1.0),
                             dphi / (self.radius * np.maximum(dist, 1e-300)), 0.0)
        return diff * scale[:, None]


def test_function(sub: Subdomain, config: SolverConfig):
    if sub.shape == "box":
        return BoxTestFunction(sub.center, sub.size, config.test_degree)
    return GaussianTestFunction(sub.center, sub.size, config.eps)


# ---------------------------------------------------------------------------
# Functional rows


@dataclass
class FunctionalRow:
    """Local weak form applied to the basis, plus its right-hand side."""

    node: int
    lam: np.ndarray             # (Q, d, d) blocks of the d x dQ functional matrix
    beta: np.ndarray            # (d,)
    cache_key: tuple | None = None


class LambdaCache:
    """Cache of functional matrices keyed by subdomain signature."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._store: dict = {}
        self.hit_counts: dict = {}
        self.misses = 0

    @property
    def hits(self) -> int:
        return sum(self.hit_counts.values())

    def get_or_build(self, key, build):
        if not self.enabled:
            return build()
        value = self._store.get(key)
        if value is None:
            value = build()
            self._store[key] = value
            self.misses += 1
        else:
            self.hit_counts[key] = self.hit_counts.get(key, 0) + 1
        return value


def _interior_rule(sub: Subdomain, config: SolverConfig):
    if sub.shape == "box":
        return sub.interior_rule(config.interior_points())
    if sub.curved_clip:
        return sub.interior_rule(config.quad_curved)
    return sub.interior_rule(max(config.quad_radial, config.quad_angular))


def _piece_rule(piece, sub: Subdomain, config: SolverConfig, traction: bool):
    if traction:
        n = max(config.quad_traction, config.quad_curved if sub.curved_clip else 0)
    elif piece.kind == "box-face":
        n = config.boundary_points()
    elif sub.curved_clip:
        n = config.quad_curved
    else:
        n = max(config.quad_radial, config.quad_angular)
    return piece.rule(n)


def _lambda_volume(sub: Subdomain, basis: mls.PolyBasis, dmat, config: SolverConfig):
    """-int eps_v D P_n over the subdomain interior (the DMLPG1 functional)."""
    rule = _interior_rule(sub, config)
    test = test_function(sub, config)
    tmap = ela.voigt_map(basis.dim)
    grad_v = test.gradients(rule.points)
    grads = basis.gradients(rule.points)
    eps_v = np.einsum("vij,qj->qiv", tmap, grad_v)
    return -np.einsum("q,qiv,vw,wjt,qnt->nij", rule.weights, eps_v, dmat, tmap,
                      grads, optimize=True)


def _lambda_boundary(sub: Subdomain, basis: mls.PolyBasis, dmat, config: SolverConfig):
    """int N D P_n over boundary pieces with unknown traction (DMLPG5)."""
    tmap = ela.voigt_map(basis.dim)
    lam = np.zeros((basis.q, basis.dim, basis.dim))
    for piece in sub.pieces:
        if piece.on_gamma and all(piece.traction_known):
            continue  # fully prescribed traction: right-hand side only
        rule = _piece_rule(piece, sub, config, traction=False)
        grads = basis.gradients(rule.points)
        nq = np.einsum("vij,qj->qiv", tmap, rule.normals)
        contrib = np.einsum("q,qiv,vw,wjt,qnt->nij", rule.weights, nq, dmat,
                            tmap, grads, optimize=True)
        if piece.on_gamma:
            known = np.asarray(piece.traction_known, dtype=bool)
            contrib[:, known, :] = 0.0
        lam += contrib
    return lam


def _beta(sub: Subdomain, problem, config: SolverConfig, survivors,
          test=None) -> np.ndarray:
    """Right-hand side of the local weak form.

    With the equilibrium convention div(sigma) + b = 0, integrating by parts
    leaves -int(b v) - int(tbar v) over the prescribed-traction pieces.
    ``test=None`` means the constant test function of the boundary variant.
    """
    d = sub.center.size
    beta = np.zeros(d)
    if getattr(problem, "body", None) is not None:
        rule = _interior_rule(sub, config)
        v = test.values(rule.points) if test is not None else np.ones(rule.points.shape[0])
        beta -= np.einsum("q,qi->i", rule.weights * v, problem.body(rule.points))
    for piece in sub.pieces:
        if not piece.on_gamma:
            continue
        known = np.asarray(piece.traction_known, dtype=bool)
        if test is not None and np.any(~known & survivors):
            raise UnsupportedClipError(
                f"subdomain at {sub.center}: test function does not vanish on a "
                "boundary piece with unknown traction")
        if not np.any(known):
            continue
        rule = _piece_rule(piece, sub, config, traction=True)
        v = test.values(rule.points) if test is not None else np.ones(rule.points.shape[0])
        tbar = problem.traction(rule.points, rule.normals)
        beta[known] -= np.einsum("q,qi->i", rule.weights * v, tbar)[known]
    return beta


def dmlpg1_row(node: int, sub: Subdomain, problem, config: SolverConfig,
               scale: float, survivors, cache: LambdaCache) -> FunctionalRow:
    """Volume-integrated functional row (vanishing test trace on the subdomain rim)."""
    basis = mls.PolyBasis(config.m, sub.center.size, sub.center, scale)
    dmat = ela.elastic_matrix(problem.material)
    key = ("dmlpg1", config.m, config.test_degree, scale, sub.signature)
    lam = cache.get_or_build(
        key, lambda: _lambda_volume(sub, basis, dmat, config))
    beta = _beta(sub, problem, config, survivors, test=test_function(sub, config))
    return FunctionalRow(node, lam, beta, cache_key=key)


def dmlpg5_row(node: int, sub: Subdomain, problem, config: SolverConfig,
               scale: float, survivors, cache: LambdaCache) -> FunctionalRow:
    """Boundary-integrated functional row (unit test function)."""
    basis = mls.PolyBasis(config.m, sub.center.size, sub.center, scale)
    dmat = ela.elastic_matrix(problem.material)
    key = ("dmlpg5", config.m, scale, sub.signature)
    lam = cache.get_or_build(
        key, lambda: _lambda_boundary(sub, basis, dmat, config))
    beta = _beta(sub, problem, config, survivors, test=None)
    return FunctionalRow(node, lam, beta, cache_key=key)


# ---------------------------------------------------------------------------
# Global system


@dataclass
class GlobalSystem:
    """Sparse block system K u = R with per-node row classification."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    row_kinds: list
    nodes: object
    dim: int
    stats: dict = field(default_factory=dict)


def subdomain_for_node(k: int, nodes, geometry, config: SolverConfig) -> Subdomain:
    """Shape/size policy: curved-boundary nodes get clipped disks or balls;
    everything else uses the configured shape shrunk clear of curved cuts."""
    center = nodes.points[k]
    spacing = nodes.spacing[k]
    tol = _GEOM_TOL * max(1.0, float(np.max(np.abs(center))))
    clearance = geometry.curved_clearance(center)
    if clearance <= tol:
        return build_subdomain(center, "ball", config.ball_factor * spacing, geometry)
    if config.shape == "box":
        size = config.box_factor * spacing
        cap = 2.0 * clearance / math.sqrt(nodes.dim)
        if size > cap:
            size = cap * (1.0 - 1e-9)
    else:
        size = config.ball_factor * spacing
        if size > clearance:
            size = clearance * (1.0 - 1e-9)
    return build_subdomain(center, config.shape, size, geometry)


def collocation_coefficients(moment: mls.MomentSystem) -> np.ndarray:
    """Shape-function values at the moment point: the basis there is e_1."""
    return moment.phi()[0]


def assemble(nodes, problem, method: str = "dmlpg1",
             config: SolverConfig | None = None) -> GlobalSystem:
    """Build the global sparse system for one of the direct methods.

    Dirichlet nodes become collocation block rows, mixed nodes keep weak rows
    only for their unprescribed components, and all remaining nodes contribute
    pure weak-form rows.
    """
    config = config or SolverConfig()
    if method not in ("dmlpg1", "dmlpg5"):
        raise ValueError(f"unknown direct method {method!r}")
    row_builder = dmlpg1_row if method == "dmlpg1" else dmlpg5_row
    geometry = problem.geometry
    d = nodes.dim
    cache = LambdaCache(enabled=config.cache)
    rows, cols, vals = [], [], []
    rhs = np.zeros(nodes.n * d)
    row_kinds = []
    errors = []
    t0 = time.perf_counter()
    for k in range(nodes.n):
        x = nodes.points[k]
        try:
            moment = mls.MomentSystem.build(x, nodes, config.m, eps=config.eps,
                                            delta=float(nodes.support[k]))
            if nodes.tags[k] == DIRICHLET:
                a = collocation_coefficients(moment)
                ubar = problem.dirichlet(x[None, :])[0]
                for i in range(d):
                    rows.append(np.full(a.size, d * k + i))
                    cols.append(d * moment.active + i)
                    vals.append(a)
                    rhs[d * k + i] = ubar[i]
                row_kinds.append("dirichlet-collocation")
                continue
            mask = nodes.masks[k]
            survivors = ~mask
            sub = subdomain_for_node(k, nodes, geometry, config)
            row = row_builder(k, sub, problem, config, float(nodes.support[k]),
                              survivors, cache)
            phi = moment.phi()
            blocks = np.einsum("nij,nl->lij", row.lam, phi)
            beta = row.beta.copy()
            if config.scale_rows:
                blocks /= sub.measure
                beta /= sub.measure
            if nodes.tags[k] == MIXED:
                a = phi[0]
                ubar = problem.dirichlet(x[None, :])[0]
                blocks[:, mask, :] = 0.0
                for i in np.nonzero(mask)[0]:
                    blocks[:, i, i] = a
                    beta[i] = ubar[i]
                row_kinds.append("mixed-replaced")
            else:
                row_kinds.append("weak-form")
            for i in range(d):
                for j in range(d):
                    rows.append(d * k + i + np.zeros(moment.active.size, dtype=np.int64))
                    cols.append(d * moment.active + j)
                    vals.append(blocks[:, i, j])
            rhs[d * k: d * k + d] = beta
        except (mls.NodeDeficiencyError, UnsupportedClipError) as err:
            errors.append((k, err))
    if errors:
        raise AssemblyError(errors)
    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nodes.n * d, nodes.n * d),
    ).tocsr()
    matrix.eliminate_zeros()
    stats = {
        "t_assemble": time.perf_counter() - t0,
        "shape_evals": 0,
        "cache_hits": cache.hits,
        "cache_misses": cache.misses,
        "cache_hit_counts": dict(cache.hit_counts),
        "method": method,
    }
    return GlobalSystem(matrix, rhs, row_kinds, nodes, d, stats)


COND_ALERT = 1e14


def solve(system: GlobalSystem) -> np.ndarray:
    """Direct sparse solve; reports the relative residual in the stats.

    Exactly singular factorizations raise; a 1-norm condition estimate above
    ``COND_ALERT`` (e.g. duplicated nodes making rows and columns coincide)
    raises as well rather than returning an arbitrary solution.
    """
    t0 = time.perf_counter()
    mat = system.matrix.tocsc()
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            lu = spla.splu(mat)
            u = lu.solve(system.rhs)
        except (spla.MatrixRankWarning, RuntimeError) as err:
            raise SingularSystemError(f"sparse factorization failed: {err}") from None
    if not np.all(np.isfinite(u)):
        raise SingularSystemError("factorization produced non-finite values")
    inv_norm = spla.onenormest(spla.LinearOperator(mat.shape, matvec=lu.solve,
                                                   rmatvec=lambda b: lu.solve(b, trans="T")))
    cond = inv_norm * spla.norm(mat, 1)
    if cond > COND_ALERT:
        raise SingularSystemError(
            f"system condition estimate {cond:.2e} exceeds {COND_ALERT:.0e}")
    denom = max(float(np.linalg.norm(system.rhs)), 1e-300)
    residual = float(np.linalg.norm(system.matrix @ u - system.rhs)) / denom
    system.stats["t_solve"] = time.perf_counter() - t0
    system.stats["residual"] = residual
    system.stats["condition_estimate"] = float(cond)
    return u


def recover_field(points, nodes, u: np.ndarray, material, m: int = 2,
                  eps: float = 4.0):
    """Post-process displacement, strain, stress, and von Mises at points.

    Displacements use plain shape-function rows; strains come from direct
    derivative recovery rows assembled into Voigt form.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = nodes.dim
    nv = ela.voigt_size(d)
    tmap = ela.voigt_map(d)
    dmat = ela.elastic_matrix(material)
    uu = np.asarray(u, dtype=float).reshape(nodes.n, d)
    disp = np.empty((points.shape[0], d))
    strain = np.empty((points.shape[0], nv))
    for idx, x in enumerate(points):
        moment = mls.MomentSystem.build(x, nodes, m, eps=eps)
        lam = np.empty((d + 1, moment.basis.q))
        lam[0] = moment.basis.values(x)
        for j in range(d):
            alpha = np.zeros(d, dtype=np.int64)
            alpha[j] = 1
            lam[1 + j] = moment.basis.derivative(x, alpha)
        rows = moment.row(lam)
        local = uu[moment.active]
        disp[idx] = rows[0] @ local
        grads = rows[1:] @ local          # grads[j, i] = d_j u_i
        strain[idx] = np.einsum("vij,ji->v", tmap, grads)
    stress = strain @ dmat.T
    return {
        "displacement": disp,
        "strain": strain,
        "stress": stress,
        "von_mises": ela.von_mises(stress),
    }


def dump_system(system: GlobalSystem, path) -> None:
    """Plain-text coordinate dump (row col value) plus the right-hand side."""
    coo = system.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# dmlpg-system n={system.matrix.shape[0]} nnz={coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
        fh.write("# rhs\n")
        for v in system.rhs:
            fh.write(f"{v:.17g}\n")
