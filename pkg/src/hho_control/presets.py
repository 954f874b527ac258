"""Manufactured-solution presets and the inline expression grammar.

A preset prescribes the exact state y and adjoint phi in closed form (values
and Laplacians); the remaining data follow from the optimality system:
u = -phi/lambda (clamped onto the box when bounds are given), f = -dy - u and
y_d = y + dphi, where d denotes the Laplacian.  Construction self-checks the
two PDEs at random sample points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy

from .control_unconstrained import ControlProblem, ExactTriple


class PresetError(ValueError):
    """Unknown preset id or invalid inline expression."""


@dataclass(frozen=True)
class SmoothFunction:
    """Closed-form scalar field with its Laplacian."""

    value: callable
    laplacian: callable

    def __call__(self, points):
        return self.value(points)


def _field(value, laplacian):
    return SmoothFunction(
        lambda p: value(np.atleast_2d(p)[:, 0], np.atleast_2d(p)[:, 1]),
        lambda p: laplacian(np.atleast_2d(p)[:, 0], np.atleast_2d(p)[:, 1]))


_PI = np.pi


def _exp_sin_sin(scale):
    # scale * exp(x1+x2) sin(pi x1) sin(pi x2) and its Laplacian
    def value(x, y):
        return scale * np.exp(x + y) * np.sin(_PI * x) * np.sin(_PI * y)

    def lap(x, y):
        e = scale * np.exp(x + y)
        s1, s2 = np.sin(_PI * x), np.sin(_PI * y)
        c1, c2 = np.cos(_PI * x), np.cos(_PI * y)
        return e * ((2.0 - 2.0 * _PI ** 2) * s1 * s2
                    + 2.0 * _PI * (c1 * s2 + s1 * c2))

    return _field(value, lap)


def _sin2pi_sin2pi(scale):
    def value(x, y):
        return scale * np.sin(2 * _PI * x) * np.sin(2 * _PI * y)

    def lap(x, y):
        return -8.0 * _PI ** 2 * value(x, y)

    return _field(value, lap)


def _exp_sum(scale):
    def value(x, y):
        return scale * np.exp(x + y)

    def lap(x, y):
        return 2.0 * scale * np.exp(x + y)

    return _field(value, lap)


@dataclass(frozen=True)
class Preset:
    """Exact (y, phi) pair with the default weight and optional box."""

    id: str
    y: SmoothFunction
    phi: SmoothFunction
    lam: float
    bounds: tuple | None = None
    description: str = ""


_PRESETS = {
    "uc1-default": Preset(
        "uc1-default", _exp_sum(100.0), _exp_sin_sin(1.0), 1e-2,
        description="exponential state, exp*sine adjoint, lambda = 1e-2"),
    "uc31-default": Preset(
        "uc31-default", _sin2pi_sin2pi(20.0), _exp_sin_sin(5.0), 1e-1,
        description="double-frequency sine state, lambda = 1e-1"),
    "uc32-default": Preset(
        "uc32-default", _sin2pi_sin2pi(1.0), _exp_sin_sin(1.0), 1e-2,
        description="double-frequency sine state, lambda = 1e-2"),
    "wc-default": Preset(
        "wc-default", _sin2pi_sin2pi(1.0), _exp_sin_sin(1.0), 1e-2,
        bounds=(-250.0, -10.0),
        description="box-constrained variant, bounds (-250, -10), lambda = 1e-2"),
}
_ALIASES = {
    "uc2-default": "uc1-default",
    "wc1-default": "wc-default",
    "wc2-default": "wc-default",
}


def preset_ids():
    return sorted(_PRESETS)


def get_preset(preset_id):
    key = _ALIASES.get(preset_id, preset_id)
    if key not in _PRESETS:
        raise PresetError(f"unknown preset {preset_id!r}; see `hho-control presets`")
    return _PRESETS[key]


_ALLOWED_FUNCS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp,
                  "pi": sympy.pi}


def parse_expression(text):
    """Closed-form expression in x1, x2 (sums/products/sin/cos/exp/powers).

    The Laplacian is computed symbolically; anything outside the whitelist is
    rejected so configs cannot smuggle arbitrary code.
    """
    x1, x2 = sympy.symbols("x1 x2")
    local = {"x1": x1, "x2": x2, **_ALLOWED_FUNCS}
    try:
        expr = sympy.sympify(text, locals=local, rational=False)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise PresetError(f"cannot parse expression {text!r}: {exc}") from None
    allowed_types = (sympy.sin, sympy.cos, sympy.exp, sympy.Pow, sympy.Add,
                     sympy.Mul, sympy.Symbol, sympy.Number)
    for node in sympy.preorder_traversal(expr):
        if node is sympy.pi or isinstance(node, allowed_types):
            continue
        raise PresetError(f"disallowed term {node!r} in expression {text!r}")
    lap = sympy.diff(expr, x1, 2) + sympy.diff(expr, x2, 2)
    f_val = sympy.lambdify((x1, x2), expr, "numpy")
    f_lap = sympy.lambdify((x1, x2), lap, "numpy")
    return _field(lambda x, y: np.broadcast_to(f_val(x, y), np.shape(x)).astype(float),
                  lambda x, y: np.broadcast_to(f_lap(x, y), np.shape(x)).astype(float))


def make_problem(y, phi, lam, bounds=None, seed=42):
    """Derive (f, y_d, u) from exact (y, phi) and self-check the PDEs."""
    if lam <= 0:
        raise PresetError("lambda must be positive")

    def u_exact(p):
        raw = -phi.value(p) / lam
        if bounds is None:
            return raw
        return np.minimum(bounds[1], np.maximum(bounds[0], raw))

    def f(p):
        return -y.laplacian(p) - u_exact(p)

    def y_d(p):
        return y.value(p) + phi.laplacian(p)

    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.05, 0.95, size=(32, 2))
    state_res = np.abs(-y.laplacian(pts) - f(pts) - u_exact(pts))
    adj_res = np.abs(-phi.laplacian(pts) - y.value(pts) + y_d(pts))
    scale = 1.0 + np.abs(y.value(pts)).max()
    if state_res.max() > 1e-8 * scale or adj_res.max() > 1e-8 * scale:
        raise PresetError("manufactured data failed the PDE self-check")

    boundary = _state_boundary(y)
    return ControlProblem(f=f, y_d=y_d, lam=lam, bounds=bounds,
                          exact=ExactTriple(y=y.value, phi=phi.value, u=u_exact),
                          state_boundary=boundary)


def _state_boundary(y):
    # Nonhomogeneous manufactured traces need lifting onto boundary faces.
    t = np.linspace(0.0, 1.0, 33)
    edges = [np.column_stack([t, np.zeros_like(t)]),
             np.column_stack([t, np.ones_like(t)]),
             np.column_stack([np.zeros_like(t), t]),
             np.column_stack([np.ones_like(t), t])]
    trace = max(np.abs(y.value(e)).max() for e in edges)
    return y.value if trace > 1e-12 else None


def problem_from_preset(preset_id, lam=None, bounds=None):
    p = get_preset(preset_id)
    lam = p.lam if lam is None else lam
    bounds = p.bounds if bounds is None else bounds
    return make_problem(p.y, p.phi, lam, bounds=bounds)
