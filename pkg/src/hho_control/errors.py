"""Error norms and experimental orders of convergence.

Per-cell contributions are sorted before summation, so every functional is
bitwise reproducible and invariant under cell reordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import poly
from .hho_core import h1h_seminorm_sq, reconstruct_all, reduce_function


def _sorted_sum(contribs):
    return float(np.sum(np.sort(np.asarray(contribs))))


def energy_error(space, vec, v_exact):
    """Discrete H1-like distance || I_h v - v_h ||_{1,h}."""
    ref = reduce_function(space, v_exact, include_boundary=True)
    return math.sqrt(h1h_seminorm_sq(space, vec - ref))


def l2_error_cells(space, vec, v_exact):
    """L2 distance between the exact function and the cell polynomials."""
    contribs = np.empty(space.mesh.n_cells)
    for op in space.local_ops():
        d = v_exact(op.qpoints()) - op.cell_vals @ vec.cell_block(op.cell_id)
        contribs[op.cell_id] = op.qweights @ d ** 2
    return math.sqrt(_sorted_sum(contribs))


def l2_error_reconstruction(space, vec, v_exact):
    """L2 distance between the exact function and the reconstruction R v."""
    recon = reconstruct_all(space, vec)
    contribs = np.empty(space.mesh.n_cells)
    for op in space.local_ops():
        d = v_exact(op.qpoints()) - op.recon_vals @ recon[op.cell_id]
        contribs[op.cell_id] = op.qweights @ d ** 2
    return math.sqrt(_sorted_sum(contribs))


def l2_error_control(solution, u_exact, kink_aware=None):
    """L2 error of the scheme's control against the exact control.

    For the variational-discretization clamp (wc2) the cells crossed by the
    active-set boundary are integrated with a rule of four times the standard
    exactness to limit the quadrature crime near the free boundary.
    """
    control = solution.control
    space = control.space
    if kink_aware is None:
        kink_aware = type(control).__name__ == "ClampedAdjointControl"
    contribs = np.empty(space.mesh.n_cells)
    for op in space.local_ops():
        pts, w = op.qpoints(), op.qweights
        ue = u_exact(pts)
        uh = control.eval(op, pts)
        if kink_aware:
            # the active-set interface kinks the clamp: refine crossed cells
            box = control.box
            phi_vals = op.cell_vals @ control.phi.cell_block(op.cell_id)
            unclamped = -phi_vals / control.lam
            crosses = (unclamped.min() < box.u_a < unclamped.max()) or \
                      (unclamped.min() < box.u_b < unclamped.max())
            if crosses:
                cell = space.mesh.cells[op.cell_id]
                fine = poly.polygon_quadrature(
                    cell.polygon, 8 * (space.face_degree + 2),
                    centroid=cell.centroid)
                pts, w = fine.points, fine.weights
                ue = u_exact(pts)
                uh = control.eval(op, pts)
        d = ue - uh
        contribs[op.cell_id] = w @ d ** 2
    return math.sqrt(_sorted_sum(contribs))


def eoc(errors, hs):
    """Rates log(e_i / e_{i+1}) / log(h_i / h_{i+1}) between consecutive levels."""
    errors = list(errors)
    hs = list(hs)
    if len(errors) != len(hs):
        raise ValueError("errors and hs must have equal length")
    if any(h2 >= h1 for h1, h2 in zip(hs, hs[1:])):
        raise ValueError("mesh sizes must be strictly decreasing")
    rates = []
    for (e1, e2), (h1, h2) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
        if e1 < 0 or e2 < 0:
            raise ValueError("errors must be nonnegative")
        if e2 == 0.0 or e1 == 0.0:
            rates.append(math.inf)
        else:
            rates.append(math.log(e1 / e2) / math.log(h1 / h2))
    return rates


QUANTITIES = ("err_u_l2", "err_y_energy", "err_phi_energy",
              "err_y_l2_recon", "err_phi_l2_recon")


@dataclass
class ErrorRecord:
    """Errors of one refinement level."""

    level: int
    h: float
    n_cells: int
    err_u_l2: float
    err_y_energy: float
    err_phi_energy: float
    err_y_l2_recon: float
    err_phi_l2_recon: float
    iters: int | None = None


@dataclass
class ConvergenceReport:
    """Per-level errors plus experimental convergence orders."""

    records: list
    rates: dict = field(default_factory=dict)

    def __post_init__(self):
        hs = [r.h for r in self.records]
        self.rates = {}
        for q in QUANTITIES:
            errs = [getattr(r, q) for r in self.records]
            self.rates[q] = eoc(errs, hs) if len(errs) > 1 else []

    def final_rate(self, quantity):
        return self.rates[quantity][-1]
