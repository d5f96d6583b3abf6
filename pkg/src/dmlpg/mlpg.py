"""Classical MLPG1/MLPG5 baselines: quadrature against MLS shape functions.

The stiffness rows integrate the elastic operator applied to the trial
expansion, which requires shape-function values *and* their standard (full)
derivatives at every quadrature point.  Evaluations are batched per
subdomain; an evaluation counter records the per-point cost that the direct
methods avoid entirely.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import elasticity as ela
from . import mls
from .assembly import (AssemblyError, GlobalSystem, SolverConfig, _beta,
                       collocation_coefficients, subdomain_for_node,
                       test_function)
from .geometry import DIRICHLET, MIXED, UnsupportedClipError


@dataclass
class ShapeFunctionEvaluation:
    """MLS values and first derivatives at one point."""

    point: np.ndarray
    active: np.ndarray
    values: np.ndarray          # (n_active,)
    gradients: np.ndarray       # (n_active, d)


def _weight_pair(r: np.ndarray, eps: float):
    """Weight value and radial derivative on the open support (zero outside)."""
    floor = math.exp(-eps * eps)
    inside = r < 1.0
    w = np.where(inside, (np.exp(-((eps * r) ** 2)) - floor) / (1.0 - floor), 0.0)
    dw = np.where(inside, -2.0 * eps**2 * r * np.exp(-((eps * r) ** 2)) / (1.0 - floor), 0.0)
    return w, dw


def batched_shape_eval(points, node_points, deltas, basis: mls.PolyBasis,
                       eps: float, full_cond_check: bool = True):
    """Shape functions and standard derivatives at a batch of points.

    ``node_points`` is a superset of every point's active set; nodes beyond a
    point's support get exactly zero value and gradient, so using the union
    changes nothing.  The moment matrices are assembled from the symmetric
    monomial pairs (one GEMM) and the dA/dx contraction is fused, which keeps
    the per-subdomain cost linear in the union size.  Returns values
    (n_pts, n_nodes), gradients (n_pts, n_nodes, d), and condition estimates
    (all points when ``full_cond_check``, else the first point only).
    """
    points = np.atleast_2d(points)
    npts, d = points.shape
    deltas = np.broadcast_to(np.asarray(deltas, dtype=float), (npts,))
    p = basis.values(node_points)                     # (nU, Q)
    q = p.shape[1]
    # squared distances through one GEMM; keeps temporaries two-dimensional
    d2 = (np.add.outer((points**2).sum(axis=1), (node_points**2).sum(axis=1))
          - 2.0 * (points @ node_points.T))
    dist = np.sqrt(np.maximum(d2, 0.0))
    r = dist / deltas[:, None]
    w, dphi = _weight_pair(r, eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where((dist > 0.0) & (r < 1.0),
                          dphi / (deltas[:, None] * np.maximum(dist, 1e-300)), 0.0)
    iu, il = np.triu_indices(q)
    a_pairs = w @ (p[:, iu] * p[:, il])
    a = np.empty((npts, q, q))
    a[:, iu, il] = a_pairs
    a[:, il, iu] = a_pairs
    sample = a if full_cond_check else a[:1]
    eig = np.linalg.eigvalsh(sample)
    conds = eig[:, -1] / np.where(eig[:, 0] > 0.0, eig[:, 0], np.nan)
    if not np.all(np.isfinite(conds)) or np.any(conds > mls.COND_LIMIT):
        bad = int(np.nanargmax(np.where(np.isfinite(conds), conds, np.inf)))
        raise mls.NodeDeficiencyError(points[bad], float(conds[bad]))
    p_x = basis.values(points)                        # (n, Q)
    dp_x = basis.gradients(points)                    # (n, Q, d)
    try:
        c = np.linalg.solve(a, p_x[:, :, None])[:, :, 0]
        cp = c @ p.T                                  # (n, nU)
        # dA/dx_t @ c contracted without forming dw: the weight gradient is
        # radial[q,j] * (x_q - X_j), so the sum splits into two GEMM terms
        s = radial * cp
        sp = s @ p                                    # (n, Q)
        da_c = points[:, None, :] * sp[:, :, None] \
            - np.stack([s @ (node_points[:, t:t + 1] * p) for t in range(d)], axis=2)
        dc = np.linalg.solve(a, dp_x - da_c)          # (n, Q, d)
    except np.linalg.LinAlgError as err:
        raise mls.NodeDeficiencyError(points[0], math.inf, str(err)) from None
    values = cp * w
    # gradients = (dc . p) w + cp * dw, assembled with 2D temporaries per axis
    gradients = np.empty((npts, node_points.shape[0], d))
    for t in range(d):
        gradients[:, :, t] = (dc[:, :, t] @ p.T) * w \
            + cp * radial * (points[:, t:t + 1] - node_points[None, :, t])
    return values, gradients, conds


def mls_shape_with_derivatives(x, nodes, m: int, eps: float = 4.0,
                               delta: float | None = None) -> ShapeFunctionEvaluation:
    """Classical shape functions and their analytic first derivatives at x."""
    x = np.asarray(x, dtype=float)
    if delta is None:
        delta = nodes.support_at(x)
    active = nodes.neighbors(x, delta)
    if active.size < mls.basis_size(m, nodes.dim):
        raise mls.NodeDeficiencyError(x, math.inf, "too few active nodes")
    basis = mls.PolyBasis(m, nodes.dim, x, delta)
    values, gradients, _ = batched_shape_eval(
        x[None, :], nodes.points[active], np.array([delta]), basis, eps)
    return ShapeFunctionEvaluation(x, active, values[0], gradients[0])


def _union_set(k: int, nodes, sub):
    """Union of the active sets over the subdomain.

    Every quadrature point lies within the bounding radius of the center, so
    its nearest node sits within twice that radius; the union then only needs
    to reach one local support radius beyond the subdomain.
    """
    x = nodes.points[k]
    near = nodes.index.query_ball(x, 2.0 * sub.bounding_radius * (1.0 + 1e-12))
    dmax = float(nodes.support[near].max())
    return nodes.index.query_ball(x, sub.bounding_radius + dmax)


def _point_supports(points, nodes):
    """Support radius at each point: its nearest node's delta."""
    return nodes.support[nodes.index.nearest_batch(points)]


def _mlpg_rules(sub, config: SolverConfig):
    n = config.quad_mlpg
    return sub.interior_rule(n)


def assemble_mlpg(nodes, problem, variant: str = "mlpg1",
                  config: SolverConfig | None = None) -> GlobalSystem:
    """Assemble the classical system; BC handling matches the direct methods."""
    config = config or SolverConfig()
    if variant not in ("mlpg1", "mlpg5"):
        raise ValueError(f"unknown classical variant {variant!r}")
    geometry = problem.geometry
    d = nodes.dim
    nv = ela.voigt_size(d)
    tmap = ela.voigt_map(d)
    dmat = ela.elastic_matrix(problem.material)
    rows, cols, vals = [], [], []
    rhs = np.zeros(nodes.n * d)
    row_kinds = []
    errors = []
    shape_evals = 0
    min_per_subdomain = None
    t0 = time.perf_counter()
    for k in range(nodes.n):
        x = nodes.points[k]
        try:
            if nodes.tags[k] == DIRICHLET:
                moment = mls.MomentSystem.build(x, nodes, config.m, eps=config.eps,
                                                delta=float(nodes.support[k]))
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
            union = _union_set(k, nodes, sub)
            basis = mls.PolyBasis(config.m, d, x, float(nodes.support[k]))
            blocks = np.zeros((union.size, d, d))
            if variant == "mlpg1":
                rule = _mlpg_rules(sub, config)
                test = test_function(sub, config)
                eps_v = np.einsum("vij,qj->qiv", tmap, test.gradients(rule.points))
                factors = [(rule, -np.einsum("q,qiv,vw,wjt->qijt", rule.weights,
                                             eps_v, dmat, tmap), None)]
                beta = _beta(sub, problem, config, survivors, test=test)
            else:
                factors = []
                for piece in sub.pieces:
                    if piece.on_gamma and all(piece.traction_known):
                        continue
                    prule = piece.rule(config.quad_mlpg)
                    nq = np.einsum("vij,qj->qiv", tmap, prule.normals)
                    a4 = np.einsum("q,qiv,vw,wjt->qijt", prule.weights, nq, dmat, tmap)
                    known = np.asarray(piece.traction_known, dtype=bool) \
                        if piece.on_gamma else None
                    factors.append((prule, a4, known))
                beta = _beta(sub, problem, config, survivors, test=None)
            all_pts = np.concatenate([rule.points for rule, _, _ in factors])
            deltas = _point_supports(all_pts, nodes)
            _, grads, _ = batched_shape_eval(
                all_pts, nodes.points[union], deltas, basis, config.eps,
                full_cond_check=False)
            offset = 0
            for rule, a4, known in factors:
                npts = rule.points.shape[0]
                contrib = np.einsum("qijt,qlt->lij", a4,
                                    grads[offset:offset + npts], optimize=True)
                if known is not None:
                    contrib[:, known, :] = 0.0
                blocks += contrib
                offset += npts
            evals_here = all_pts.shape[0]
            shape_evals += evals_here
            if min_per_subdomain is None or evals_here < min_per_subdomain:
                min_per_subdomain = evals_here
            if config.scale_rows:
                blocks /= sub.measure
                beta = beta / sub.measure
            if nodes.tags[k] == MIXED:
                moment = mls.MomentSystem.build(x, nodes, config.m, eps=config.eps,
                                                delta=float(nodes.support[k]))
                a = collocation_coefficients(moment)
                ubar = problem.dirichlet(x[None, :])[0]
                blocks[:, mask, :] = 0.0
                # collocation support may differ from the union; scatter separately
                for i in np.nonzero(mask)[0]:
                    rows.append(np.full(a.size, d * k + i))
                    cols.append(d * moment.active + i)
                    vals.append(a)
                    beta[i] = 0.0
                    rhs[d * k + i] = ubar[i]
                row_kinds.append("mixed-replaced")
                keep_rows = np.nonzero(survivors)[0]
            else:
                row_kinds.append("weak-form")
                keep_rows = np.arange(d)
            for i in keep_rows:
                for j in range(d):
                    rows.append(d * k + i + np.zeros(union.size, dtype=np.int64))
                    cols.append(d * union + j)
                    vals.append(blocks[:, i, j])
            rhs[d * k: d * k + d] += beta
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
        "shape_evals": shape_evals,
        "min_evals_per_subdomain": min_per_subdomain or 0,
        "cache_hits": 0,
        "cache_misses": 0,
        "method": variant,
    }
    return GlobalSystem(matrix, rhs, row_kinds, nodes, d, stats)
