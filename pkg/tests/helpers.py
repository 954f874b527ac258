"""Shared oracles and cached meshes for the test suite.

The oracles here deliberately avoid the library's quadrature and assembly
paths: polygon moments go through the divergence theorem with 1D Gauss rules,
dense reference systems are solved with numpy, and expected values are
computed from closed forms.
"""

import functools
import math

import numpy as np

from hho_control import make_cartesian, make_voronoi


@functools.lru_cache(maxsize=None)
def cached_voronoi(seeds, rng_seed=42, lloyd_iters=10):
    return make_voronoi(seeds, rng_seed=rng_seed, lloyd_iters=lloyd_iters)


@functools.lru_cache(maxsize=None)
def cached_cartesian(n):
    return make_cartesian(n)


def polygon_monomial_integral(poly, a, b):
    """Divergence-theorem moment: integral of x^a y^b over a CCW polygon.

    Uses int x^a y^b dA = boundary-int x^{a+1}/(a+1) y^b dy, integrating the
    degree-(a+b+1) edge integrand exactly with a 1D Gauss rule.
    """
    poly = np.asarray(poly, dtype=float)
    npts = math.ceil((a + b + 2) / 2)
    t, w = np.polynomial.legendre.leggauss(npts)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    total = 0.0
    m = len(poly)
    for i in range(m):
        p0, p1 = poly[i], poly[(i + 1) % m]
        x = p0[0] + t * (p1[0] - p0[0])
        y = p0[1] + t * (p1[1] - p0[1])
        dy = p1[1] - p0[1]
        total += dy * np.sum(w * x ** (a + 1) * y ** b / (a + 1))
    return float(total)


def segment_monomial_integral(p0, p1, f, degree):
    """Exact 1D Gauss integral of f along the segment p0-p1."""
    npts = math.ceil((degree + 1) / 2)
    t, w = np.polynomial.legendre.leggauss(max(npts, 1))
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    length = float(np.hypot(*(p1 - p0)))
    return length * float(np.sum(w * f(pts)))


def dense_stiffness(space):
    """Reference assembly: scatter each local matrix into a dense array."""
    A = np.zeros((space.n_dofs, space.n_dofs))
    for op in space.local_ops():
        d = op.dofs
        A[np.ix_(d, d)] += op.A
    return A


def dense_cell_mass(space):
    M = np.zeros((space.n_dofs, space.n_dofs))
    for op in space.local_ops():
        d = space.cell_dofs(op.cell_id)
        M[np.ix_(d, d)] += op.M_cell
    return M


def dense_recon_mass(space):
    B = np.zeros((space.n_dofs, space.n_dofs))
    for op in space.local_ops():
        d = op.dofs
        B[np.ix_(d, d)] += op.G.T @ op.M_recon @ op.G
    return B


def regular_polygon(n_sides, radius=1.0, center=(0.3, 0.4)):
    ang = 2 * np.pi * np.arange(n_sides) / n_sides
    return np.column_stack([center[0] + radius * np.cos(ang),
                            center[1] + radius * np.sin(ang)])
