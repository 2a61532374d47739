"""Residual a posteriori error estimation for the edge-element solver.

Two elementwise indicators are computed from the same residual and jump
quantities.  With elementwise residuals

    R1 = -div(f - kappa u_h)        (= -div f, the discrete field is
                                       divergence free)
    R2 = f - curl*(eps curl u_h) - kappa u_h
                                    (= f - kappa u_h, the discrete curl is
                                       elementwise constant)

and interior-edge jumps

    J1 = [[f - kappa u_h]] . n      J2 = -[[eps curl u_h]] ^ n,

the coefficient-robust indicator weights R2/J2 with the capped sizes
``hbar = min(s/sqrt(eps), 1/sqrt(kappa))`` while the classical one uses
the plain ``s^2/eps`` and ``s/eps_s`` weights:

    robust(T)    = s_T^2/kappa ||R1||_T^2 + hbar_T^2 ||R2||_T^2
                   + sum_S [ s_S/kappa ||J1||_S^2
                             + hbar_S eps_S^-1/2 ||J2||_S^2 ]
    classical(T) = s_T^2/kappa ||R1||_T^2 + s_T^2/eps_T ||R2||_T^2
                   + sum_S [ s_S/kappa ||J1||_S^2 + s_S/eps_S ||J2||_S^2 ]

where ``eps_S = max(eps_T+, eps_T-)`` and every interior edge contributes
its full term to both adjacent elements.  The size entering the weights
is half the local diameter: ``s_T = diam(T)/2`` for elements and
``s_S = max(diam(T+), diam(T-))/2`` for edges; L2 norms over edges use
the true edge length.  The global estimate is the square root of the sum
of the elementwise indicators.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .edge_fem import _basis_at, _field_at, element_curls
from .quadrature import edge_rule, triangle_rule


class EstimatorKind(enum.Enum):
    ROBUST = "robust"
    CLASSICAL = "classical"


@dataclass(frozen=True)
class WeightedSizes:
    """Capped mesh-size weights per element and per edge.

    Boundary-edge rows carry the values of their single adjacent element;
    the indicators never read them.
    """
    element_size: np.ndarray   # (T,) half-diameters
    eps_element: np.ndarray    # (T,)
    hbar_element: np.ndarray   # (T,) min(s/sqrt(eps), 1/sqrt(kappa))
    edge_size: np.ndarray      # (E,) half of the larger adjacent diameter
    eps_edge: np.ndarray       # (E,) max of adjacent eps
    hbar_edge: np.ndarray      # (E,)


@dataclass(frozen=True)
class IndicatorBreakdown:
    """Per-element squared indicator parts; ``total`` is their exact sum
    and ``global_estimate`` the square root of the grand total."""
    kind: EstimatorKind
    r1: np.ndarray
    r2: np.ndarray
    j1: np.ndarray
    j2: np.ndarray

    @property
    def total(self):
        return self.r1 + self.r2 + self.j1 + self.j2

    @property
    def global_estimate(self):
        return float(np.sqrt(self.total.sum()))


@dataclass(frozen=True)
class Oscillations:
    """Data-oscillation terms: each ``oscN`` is the sum of an element and
    an edge L2 norm; the squared per-entity contributions are retained."""
    osc1: float
    osc2: float
    element_part1: np.ndarray
    edge_part1: np.ndarray
    element_part2: np.ndarray
    edge_part2: np.ndarray


def capped_size(size, eps, kappa):
    """The robust weight ``min(size / sqrt(eps), 1 / sqrt(kappa))``."""
    return np.minimum(np.asarray(size) / np.sqrt(eps), 1.0 / np.sqrt(kappa))


def weighted_sizes(mesh, coefficients):
    """Evaluate the size weights of both estimators on a mesh."""
    eps_t = coefficients.eps_by_region(mesh.regions)
    kappa = coefficients.kappa
    s_t = 0.5 * mesh.diameters

    t_plus = mesh.edge_tris[:, 0]
    t_minus = np.where(mesh.is_boundary_edge, t_plus, mesh.edge_tris[:, 1])
    s_e = 0.5 * np.maximum(mesh.diameters[t_plus], mesh.diameters[t_minus])
    eps_e = np.maximum(eps_t[t_plus], eps_t[t_minus])
    return WeightedSizes(
        element_size=s_t,
        eps_element=eps_t,
        hbar_element=capped_size(s_t, eps_t, kappa),
        edge_size=s_e,
        eps_edge=eps_e,
        hbar_edge=capped_size(s_e, eps_e, kappa),
    )


def _residual_data(solution, problem, quad):
    """Pointwise residual samples on all elements.

    Returns quad weights, element areas, R1 values (T, Q) and R2 values
    (T, Q, 2).
    """
    mesh = solution.mesh
    if problem.div_f is None:
        raise ValueError("problem must provide an analytic div f")
    kappa = problem.coefficients.kappa
    points = np.einsum("qi,tie->tqe", quad.points, mesh.vertices[mesh.triangles])
    r1 = -np.asarray(problem.div_f(points), dtype=float)
    uh = _field_at(solution, np.arange(mesh.num_triangles), quad.points)
    r2 = np.asarray(problem.f(points), dtype=float) - kappa * uh
    return quad.weights, mesh.areas, r1, r2


def element_residuals(solution, problem, tri_id, quad_degree=6):
    """L2 norms of the two element residuals on one triangle."""
    quad = triangle_rule(quad_degree)
    mesh = solution.mesh
    kappa = problem.coefficients.kappa
    if problem.div_f is None:
        raise ValueError("problem must provide an analytic div f")
    tri = np.array([tri_id])
    points = np.einsum("qi,ie->qe", quad.points, mesh.vertices[mesh.triangles[tri_id]])
    r1 = -np.asarray(problem.div_f(points), dtype=float)
    uh = _field_at(solution, tri, quad.points)[0]
    r2 = np.asarray(problem.f(points), dtype=float) - kappa * uh
    area = mesh.areas[tri_id]
    norm_r1 = np.sqrt(area * (quad.weights * r1 ** 2).sum())
    norm_r2 = np.sqrt(area * (quad.weights * (r2 ** 2).sum(-1)).sum())
    return float(norm_r1), float(norm_r2)


def _edge_field_traces(solution, edge_ids, s_points):
    """Discrete field on both sides of interior edges at edge parameters
    ``s`` (measured from the lower-id vertex); returns (u_plus, u_minus),
    each (n_edges, Q, 2)."""
    mesh = solution.mesh
    q = len(s_points)
    traces = []
    for side in (0, 1):
        tri = mesh.edge_tris[edge_ids, side]
        loc = mesh.edge_tri_local[edge_ids, side]
        lam = np.zeros((len(edge_ids), q, 3))
        anchor = mesh.triangles[tri, loc]
        starts_low = anchor == mesh.edges[edge_ids, 0]
        first = np.where(starts_low[:, None], 1.0 - s_points[None, :], s_points[None, :])
        second = np.where(starts_low[:, None], s_points[None, :], 1.0 - s_points[None, :])
        np.put_along_axis(lam, np.broadcast_to(loc[:, None, None], (len(edge_ids), q, 1)),
                          first[..., None], axis=2)
        np.put_along_axis(lam, np.broadcast_to(((loc + 1) % 3)[:, None, None],
                                               (len(edge_ids), q, 1)),
                          second[..., None], axis=2)
        traces.append(_field_at(solution, tri, lam))
    return traces[0], traces[1]


def _jump_data(solution, problem, n_edge_points):
    """Squared jump norms ||J1||_S^2 and ||J2||_S^2 on every edge
    (zero on boundary edges), plus the raw J1 samples for oscillation
    projections."""
    mesh = solution.mesh
    coeffs = problem.coefficients
    eps_t = coeffs.eps_by_region(mesh.regions)
    kappa = coeffs.kappa
    s_pts, s_wts = edge_rule(n_edge_points)

    ne = mesh.num_edges
    j1_sq = np.zeros(ne)
    j2_sq = np.zeros(ne)
    interior = np.nonzero(~mesh.is_boundary_edge)[0]
    j1_vals = np.zeros((len(interior), len(s_pts)))
    if len(interior):
        u_plus, u_minus = _edge_field_traces(solution, interior, s_pts)
        a = mesh.edges[interior, 0]
        b = mesh.edges[interior, 1]
        points = (mesh.vertices[a][:, None, :]
                  + s_pts[None, :, None] * (mesh.vertices[b] - mesh.vertices[a])[:, None, :])
        f_vals = np.asarray(problem.f(points), dtype=float)
        normals = mesh.edge_normals[interior]
        lengths = mesh.edge_lengths[interior]
        # both sides evaluated literally; the f contributions cancel when
        # f is continuous
        jump = (f_vals - kappa * u_plus) - (f_vals - kappa * u_minus)
        j1_vals = (jump * normals[:, None, :]).sum(-1)
        j1_sq[interior] = lengths * (s_wts[None, :] * j1_vals ** 2).sum(1)

        curls = element_curls(solution)
        t_plus = mesh.edge_tris[interior, 0]
        t_minus = mesh.edge_tris[interior, 1]
        curl_jump = eps_t[t_plus] * curls[t_plus] - eps_t[t_minus] * curls[t_minus]
        # the wedge of the scalar jump with n is tangential with constant
        # magnitude, so the squared edge norm is jump^2 * |S|
        j2_sq[interior] = curl_jump ** 2 * lengths
    return j1_sq, j2_sq, interior, j1_vals, s_wts


def edge_jumps(solution, problem, edge_id, n_edge_points=4):
    """L2 norms of the two jump terms on one interior edge."""
    mesh = solution.mesh
    if mesh.is_boundary_edge[edge_id]:
        raise ValueError(f"edge {edge_id} is a boundary edge; jumps are "
                         "defined on interior edges only")
    coeffs = problem.coefficients
    eps_t = coeffs.eps_by_region(mesh.regions)
    kappa = coeffs.kappa
    s_pts, s_wts = edge_rule(n_edge_points)
    ids = np.array([edge_id])
    u_plus, u_minus = _edge_field_traces(solution, ids, s_pts)
    a, b = mesh.edges[edge_id]
    points = mesh.vertices[a] + s_pts[:, None] * (mesh.vertices[b] - mesh.vertices[a])
    f_vals = np.asarray(problem.f(points), dtype=float)
    jump = (f_vals - kappa * u_plus[0]) - (f_vals - kappa * u_minus[0])
    j1 = (jump * mesh.edge_normals[edge_id]).sum(-1)
    length = mesh.edge_lengths[edge_id]
    norm_j1 = np.sqrt(length * (s_wts * j1 ** 2).sum())

    curls = element_curls(solution)
    t_plus, t_minus = mesh.edge_tris[edge_id]
    curl_jump = eps_t[t_plus] * curls[t_plus] - eps_t[t_minus] * curls[t_minus]
    norm_j2 = np.sqrt(curl_jump ** 2 * length)
    return float(norm_j1), float(norm_j2)


def indicator(solution, problem, kind=EstimatorKind.ROBUST, quad_degree=6,
              n_edge_points=4):
    """Per-element indicator breakdown for either estimator kind."""
    mesh = solution.mesh
    coeffs = problem.coefficients
    kappa = coeffs.kappa
    sizes = weighted_sizes(mesh, coeffs)

    wts, areas, r1_vals, r2_vals = _residual_data(solution, problem,
                                                  triangle_rule(quad_degree))
    r1_norm_sq = np.einsum("q,tq,t->t", wts, r1_vals ** 2, areas)
    r2_norm_sq = np.einsum("q,tq,t->t", wts, (r2_vals ** 2).sum(-1), areas)

    r1 = sizes.element_size ** 2 / kappa * r1_norm_sq
    if kind is EstimatorKind.ROBUST:
        r2 = sizes.hbar_element ** 2 * r2_norm_sq
    else:
        r2 = sizes.element_size ** 2 / sizes.eps_element * r2_norm_sq

    j1_sq, j2_sq, interior, _, _ = _jump_data(solution, problem, n_edge_points)
    j1_term = sizes.edge_size[interior] / kappa * j1_sq[interior]
    if kind is EstimatorKind.ROBUST:
        j2_term = (sizes.hbar_edge[interior] / np.sqrt(sizes.eps_edge[interior])
                   * j2_sq[interior])
    else:
        j2_term = sizes.edge_size[interior] / sizes.eps_edge[interior] * j2_sq[interior]

    j1 = np.zeros(mesh.num_triangles)
    j2 = np.zeros(mesh.num_triangles)
    for side in (0, 1):  # full edge term credited to both neighbours
        np.add.at(j1, mesh.edge_tris[interior, side], j1_term)
        np.add.at(j2, mesh.edge_tris[interior, side], j2_term)
    return IndicatorBreakdown(kind=kind, r1=r1, r2=r2, j1=j1, j2=j2)


def oscillations(solution, problem, quad_degree=6, n_edge_points=4):
    """Data oscillations: distance of R1, R2, J1, J2 from their piecewise
    constant L2 projections, in the weighted norms of the two estimator
    families."""
    mesh = solution.mesh
    coeffs = problem.coefficients
    sizes = weighted_sizes(mesh, coeffs)
    wts, areas, r1_vals, r2_vals = _residual_data(solution, problem,
                                                  triangle_rule(quad_degree))

    r1_mean = np.einsum("q,tq->t", wts, r1_vals)
    r1_dev_sq = np.einsum("q,tq,t->t", wts, (r1_vals - r1_mean[:, None]) ** 2, areas)
    r2_mean = np.einsum("q,tqe->te", wts, r2_vals)
    r2_dev_sq = np.einsum("q,tq,t->t", wts,
                          ((r2_vals - r2_mean[:, None, :]) ** 2).sum(-1), areas)
    element_part1 = sizes.element_size ** 2 * r1_dev_sq
    element_part2 = sizes.hbar_element ** 2 * r2_dev_sq

    _, _, interior, j1_vals, s_wts = _jump_data(solution, problem, n_edge_points)
    edge_part1 = np.zeros(mesh.num_edges)
    edge_part2 = np.zeros(mesh.num_edges)  # J2 is constant per edge: projection exact
    if len(interior):
        mean = (s_wts[None, :] * j1_vals).sum(1)
        dev_sq = mesh.edge_lengths[interior] * (s_wts[None, :]
                                                * (j1_vals - mean[:, None]) ** 2).sum(1)
        edge_part1[interior] = sizes.edge_size[interior] * dev_sq

    osc1 = float(np.sqrt(element_part1.sum()) + np.sqrt(edge_part1.sum()))
    osc2 = float(np.sqrt(element_part2.sum()) + np.sqrt(edge_part2.sum()))
    return Oscillations(osc1=osc1, osc2=osc2,
                        element_part1=element_part1, edge_part1=edge_part1,
                        element_part2=element_part2, edge_part2=edge_part2)


def dump_indicators(breakdown, path):
    """Write per-element indicator parts as CSV lines
    ``element_id, r1, r2, j1, j2, total``."""
    total = breakdown.total
    with open(path, "w") as fh:
        fh.write("element_id,r1,r2,j1,j2,total\n")
        for t in range(len(total)):
            fh.write(f"{t},{float(breakdown.r1[t])!r},{float(breakdown.r2[t])!r},"
                     f"{float(breakdown.j1[t])!r},{float(breakdown.j2[t])!r},"
                     f"{float(total[t])!r}\n")
