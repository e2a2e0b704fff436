"""Energy ledger, conserved quantities, negative-order norms and pattern metrics."""
import logging
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from membrane.core.exceptions import PreconditionException
from membrane.domain.params import ModelParams
from membrane.domain.potential import DEFAULT_POTENTIAL
from membrane.domain.state import (
    DissipationLedger,
    EnergyBreakdown,
    PatternMetrics,
    PatternRules,
    SimState,
)
from membrane.services.operators import SchemeMatrices
from membrane.services.potentials import potential as potential_value

logger = logging.getLogger(__name__)

MEAN_FREE_TOL = 1e-10


# -- energy -------------------------------------------------------------------

def energy_terms(u, h, g, params: ModelParams, matrices: SchemeMatrices, potential=DEFAULT_POTENTIAL) -> EnergyBreakdown:
    """Discrete energy of the nodal fields (u, h, g), term by term."""
    e_potential = float(matrices.M_lumped @ potential_value(potential, u)) / params.eps
    e_grad_u = 0.5 * params.eps * matrices.K.quadratic_form(u)
    e_surface = 0.5 * matrices.K_G.quadratic_form(h)
    e_bend = 0.5 * params.kappa * matrices.M.quadratic_form(g)
    e_coupling = -float(u @ (matrices.K_L @ h))
    e_total = e_potential + e_grad_u + e_surface + e_bend + e_coupling
    return EnergyBreakdown(
        e_potential=e_potential,
        e_grad_u=e_grad_u,
        e_surface=e_surface,
        e_bend=e_bend,
        e_coupling=e_coupling,
        e_total=e_total,
    )


def discrete_energy(state: SimState, params: ModelParams, matrices: SchemeMatrices, potential=DEFAULT_POTENTIAL) -> EnergyBreakdown:
    return energy_terms(state.u, state.h, state.g, params, matrices, potential)


def step_dissipation(
    prev: SimState,
    nxt: SimState,
    params: ModelParams,
    matrices: SchemeMatrices,
    potential=DEFAULT_POTENTIAL,
    slack: float = 0.0,
) -> DissipationLedger:
    """Both sides of E(next) + numerical + physical <= E(prev).

    The numerical part omits the nonnegative convexity remainder of the
    potential, so the inequality may hold with room to spare.
    """
    before = discrete_energy(prev, params, matrices, potential).e_total
    after = discrete_energy(nxt, params, matrices, potential).e_total
    du = nxt.u - prev.u
    dh = nxt.h - prev.h
    dg = nxt.g - prev.g
    numerical = (
        0.5 * params.eps * matrices.K.quadratic_form(du)
        + 0.5 * matrices.K_G.quadratic_form(dh)
        + 0.5 * params.kappa * matrices.M.quadratic_form(dg)
    )
    physical = params.tau * matrices.K.quadratic_form(nxt.mu) + matrices.M.quadratic_form(dh) / params.tau
    return DissipationLedger(
        energy_before=before,
        energy_after=after,
        numerical_dissipation=numerical,
        physical_dissipation=physical,
        slack=slack,
        holds=after + numerical + physical <= before + slack,
    )


def coupling_instability(params: ModelParams) -> bool:
    """Whether a homogeneous state can be destabilized by the coupling.

    Isotropic: Lambda^2 > sigma*eps. Otherwise the conservative variant with
    the smallest coupling and largest tension eigenvalues.
    """
    if params.is_isotropic:
        return params.Lambda ** 2 > params.sigma * params.eps
    _, g_upper, l_lower, _ = params.coefficient_bounds()
    return l_lower ** 2 > g_upper * params.eps


# -- norms --------------------------------------------------------------------

def l2_norm_h(v: np.ndarray, matrices: SchemeMatrices) -> float:
    return float(np.sqrt(max(matrices.M.quadratic_form(v), 0.0)))


def h_minus_one_norm(v: np.ndarray, matrices: SchemeMatrices, tol: Optional[float] = None) -> float:
    """Discrete H^-1 norm sqrt(v^T M K^+ M v) of a mean-free nodal field."""
    v = np.asarray(v, dtype=float)
    mean = matrices.integral(v)
    if abs(mean) > MEAN_FREE_TOL:
        raise PreconditionException(f"H^-1 norm needs a mean-free field, got <v,1>_h = {mean:.3e}")
    Mv = matrices.M @ v
    z, _ = matrices.poisson.solve(Mv, tol=tol)
    return float(np.sqrt(max(float(Mv @ z), 0.0)))


# -- pattern metrics ----------------------------------------------------------

def _periodic_adjacency(mask: np.ndarray) -> Tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """4-neighbour graph on the selected pixels of a periodic grid.

    Returns the graph, its edge list and the unit step (di, dj) of each edge.
    """
    n = mask.shape[0]
    k = np.arange(n * n).reshape(n, n)
    rows, cols, steps = [], [], []
    for axis, step in ((1, (1, 0)), (0, (0, 1))):
        nbr = np.roll(k, -1, axis=axis)
        both = mask & np.roll(mask, -1, axis=axis)
        rows.append(k[both])
        cols.append(nbr[both])
        steps.append(np.tile(step, (int(both.sum()), 1)))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    steps = np.concatenate(steps)
    graph = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n * n, n * n)).tocsr()
    return graph, np.stack([rows, cols], axis=1), steps


def _unwrap_component(graph: sp.csr_matrix, root: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unwrapped (i, j) coordinates of the component containing root, by tree walk."""
    order, predecessors = breadth_first_order(graph, root, directed=False, return_predecessors=True)
    pos = {int(root): np.array([root % n, root // n])}
    for node in order[1:]:
        parent = int(predecessors[node])
        delta = np.array([node % n - parent % n, node // n - parent // n])
        delta = (delta + 1) % n - 1
        pos[int(node)] = pos[parent] + delta
    return order, np.array([pos[int(node)] for node in order])


def _feret_ratio(cells: np.ndarray) -> float:
    """Max over min Feret diameter of a union of unit grid cells."""
    corners = (cells[:, None, :] + np.array([[0, 0], [1, 0], [0, 1], [1, 1]])[None, :, :]).reshape(-1, 2)
    corners = np.unique(corners, axis=0).astype(float)
    hull = corners[ConvexHull(corners).vertices]
    d_max = float(pdist(hull).max())
    widths = []
    for a, b in zip(hull, np.roll(hull, -1, axis=0)):
        edge = b - a
        normal = np.array([-edge[1], edge[0]]) / np.hypot(*edge)
        widths.append(float(np.abs((hull - a) @ normal).max()))
    return d_max / min(widths)


def _component_elongations(mask: np.ndarray, rules: PatternRules) -> List[float]:
    n = mask.shape[0]
    graph, edges, steps = _periodic_adjacency(mask)
    _, labels = connected_components(graph, directed=False)
    selected = mask.ravel()

    elongations = []
    unwrapped = np.zeros((n * n, 2), dtype=int)
    for label in np.unique(labels[selected]):
        members = np.flatnonzero((labels == label) & selected)
        order, coords = _unwrap_component(graph, int(members[0]), n)
        unwrapped[order] = coords
        in_comp = np.isin(edges[:, 0], order)
        a, b = edges[in_comp, 0], edges[in_comp, 1]
        # an edge disagreeing with the tree embedding closes a non-contractible loop
        wraps = bool(np.any(unwrapped[b] - unwrapped[a] != steps[in_comp]))
        if wraps:
            elongations.append(rules.wrap_elongation)
        else:
            elongations.append(min(_feret_ratio(coords), rules.wrap_elongation))
    return elongations


def pattern_metrics(u: np.ndarray, threshold: float = 0.0, rules: Optional[PatternRules] = None) -> PatternMetrics:
    """Classify the thresholded order parameter by its connected components.

    area_fraction is always that of {u > threshold}.

    The minority phase is analyzed when the upper phase covers more than half
    of the torus but is not yet homogeneous, so dots of the lower phase are
    counted as dots.
    """
    rules = rules or PatternRules()
    u = np.asarray(u, dtype=float)
    n = int(round(np.sqrt(u.size)))
    if n * n != u.size:
        raise PreconditionException(f"nodal array of length {u.size} is not a square grid")

    mask = u.reshape(n, n) > threshold
    upper_area = float(mask.mean())
    phase = "upper"
    area = upper_area
    if 0.5 < area < rules.homogeneous_upper:
        mask = ~mask
        phase = "lower"
        area = float(mask.mean())

    elongations = _component_elongations(mask, rules) if mask.any() else []
    count = len(elongations)
    mean_elongation = float(np.mean(elongations)) if elongations else 0.0

    if count == 0 or (count == 1 and (area > rules.homogeneous_upper or area < rules.homogeneous_lower)):
        label = "homogeneous"
    elif count >= rules.dots_min_count and mean_elongation < rules.dots_max_elongation:
        label = "dots"
    elif mean_elongation >= rules.stripes_min_elongation:
        label = "stripes"
    else:
        label = "mixed"

    return PatternMetrics(
        component_count=count,
        area_fraction=upper_area,
        mean_elongation=mean_elongation,
        label=label,
        analyzed_phase=phase,
    )
