"""Quasimodes concentrated in the undamped half of the circle.

Set s = h**(2/(2+beta)).  Past the damping edge the profile solves the
half-line problem

    -v'' - i (y**beta + h**(-2 beta/(2+beta))) v - h**(4/(2+beta)) z v = 0,  v'(0) = 1,

in the stretched variable y = t/s, t = |x| - pi/2.  On the undamped side it is
sin(eta x).  Matching logarithmic derivatives at the edge gives

    F_h(mu) = eta v(0) - tan(pi eta/2) / s = 0,   eta = 2 + s mu,  z = eta**2,

whose root makes eta**2 an approximate eigenvalue: eta -> 2 as h -> 0, and
the residual of (-d^2/dx^2 - i lam W - 4) on the glued profile is of order
|eta - 2|.  The constant 4 is the first Dirichlet eigenvalue of an interval
of length pi/2, the undamped half-window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .damping import sharp_damping
from .discretize import Grid, damping_on_grid, laplacian_matrix

LIMIT_EIGENVALUE = 4.0
FAR_FIELD_DECAY = 1e-10
HALFLINE_NODES = 20000
GRADING = 2.0
CUTOFF_BAND = (math.pi / 4, 3 * math.pi / 8)


class TanPoleError(ValueError):
    pass


class RootNotFound(RuntimeError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


def stretch(h: float, beta: float) -> float:
    """s = h**(2/(2+beta)), the width of the boundary layer at the damping edge."""
    return h ** (2.0 / (2.0 + beta))


def _coefficients(h: float, beta: float):
    eps = h ** (-2.0 * beta / (2.0 + beta))
    delta = h ** (4.0 / (2.0 + beta))
    return eps, delta


def far_field_rate(h: float, z: complex, beta: float) -> complex:
    """kappa = sqrt(-i eps - delta z) with Re kappa > 0 (frozen-coefficient decay)."""
    eps, delta = _coefficients(h, beta)
    kappa = np.sqrt(complex(-1j * eps - delta * z))
    return kappa if kappa.real > 0 else -kappa


@dataclass
class HalflineSolution:
    h: float
    z: complex
    beta: float
    y: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    kappa: complex
    Y: float

    @property
    def v0(self) -> complex:
        return complex(self.v[0])

    def h1_norm(self) -> float:
        """sqrt(int |v|^2 + |v'|^2) over (0, Y) by the trapezoid and midpoint rules."""
        dy = np.diff(self.y)
        mass = np.sum(0.5 * (np.abs(self.v[1:]) ** 2 + np.abs(self.v[:-1]) ** 2) * dy)
        grad = np.sum(np.abs(np.diff(self.v)) ** 2 / dy)
        return float(math.sqrt(mass + grad))

    def neumann_derivative(self) -> complex:
        """v'(0) reconstructed from the first nodes.

        The solution behaves like v0 + y + c1 y**(beta+2) + c2 y**2 + c3 y**(beta+3)
        near 0.  The non-polynomial terms are subtracted with their exact
        coefficients, then a 3-point one-sided difference is applied.
        """
        eps, delta = _coefficients(self.h, self.beta)
        b = self.beta
        v0 = self.v[0]
        y = self.y[:3]
        c1 = -1j * v0 / ((b + 1) * (b + 2))
        c3 = -1j / ((b + 2) * (b + 3))
        w = self.v[:3] - c1 * y ** (b + 2) - c3 * y ** (b + 3)
        h0, h1 = y[1] - y[0], y[2] - y[1]
        return complex(
            -(2 * h0 + h1) / (h0 * (h0 + h1)) * w[0]
            + (h0 + h1) / (h0 * h1) * w[1]
            - h0 / (h1 * (h0 + h1)) * w[2]
        )


def solve_halfline(
    h: float,
    z: complex,
    beta: float,
    Y: Optional[float] = None,
    n: int = HALFLINE_NODES,
    grading: float = GRADING,
    h_max: float = 0.5,
) -> HalflineSolution:
    """Finite-volume solve of the half-line problem on (0, Y).

    Nodes are y_j = Y0 (j/n)**grading, clustering at the singular point, where
    Y0 is the default truncation length for (h, z, beta).  A longer Y only
    appends far-field nodes, so changing Y isolates the truncation error.  The
    potential y**beta is averaged exactly over each dual cell, the flux at 0
    is the Neumann datum 1, and v'(Y) = -kappa_Y v(Y) closes the far field
    with the decay rate frozen at Y.
    """
    if not 0 < h <= h_max:
        raise ValueError(f"h must lie in (0, {h_max}], got {h}")
    if abs(z) > 0.5 / h**2:
        raise ValueError(f"|z| = {abs(z):.3g} exceeds 1/(2 h^2) = {0.5 / h**2:.3g}")
    eps, delta = _coefficients(h, beta)
    kappa = far_field_rate(h, z, beta)
    y_ref = math.log(1.0 / FAR_FIELD_DECAY) / kappa.real
    if Y is None:
        Y = y_ref
    elif math.exp(-kappa.real * Y) > FAR_FIELD_DECAY:
        raise ValueError("truncation length too short for the far-field decay")
    for attempt in range(2):
        try:
            v, y = _halfline_system(eps, delta, z, beta, _halfline_nodes(y_ref, Y, n, grading))
            return HalflineSolution(h=h, z=complex(z), beta=beta, y=y, v=v, kappa=kappa, Y=Y)
        except (sla.LinAlgError, ValueError) as exc:
            last = exc
            # near an interior resonance of the truncated problem: move the far end
            Y *= 1.0 + 1e-3
    raise RuntimeError(f"half-line system singular near an interior resonance: {last}")


def _halfline_nodes(y_ref, Y, n, grading):
    count = max(int(math.ceil(n * (Y / y_ref) ** (1.0 / grading))), 2)
    y = y_ref * (np.arange(count + 1) / n) ** grading
    y = y[y < Y]
    if Y - y[-1] < 0.5 * (y[-1] - y[-2]):
        y = y[:-1]
    return np.append(y, Y)


def _halfline_system(eps, delta, z, beta, y):
    n = y.size - 1
    Y = y[-1]
    hh = np.diff(y)
    left = np.concatenate([[0.0], y[1:] - hh / 2])
    right = np.concatenate([y[:-1] + hh / 2, [Y]])
    vol = right - left
    mean_pot = eps + (right ** (beta + 1) - left ** (beta + 1)) / ((beta + 1) * vol)
    main = ((-1j * mean_pot - delta * z) * vol).astype(complex)
    main[:-1] += 1.0 / hh
    main[1:] += 1.0 / hh
    upper = np.zeros(n + 1, dtype=complex)
    lower = np.zeros(n + 1, dtype=complex)
    upper[1:] = -1.0 / hh
    lower[:-1] = -1.0 / hh
    # Robin closure with the decay rate frozen at Y
    kappa_far = np.sqrt(complex(-1j * (Y**beta + eps) - delta * z))
    main[-1] += kappa_far if kappa_far.real > 0 else -kappa_far
    rhs = np.zeros(n + 1, dtype=complex)
    # the cell at 0 receives the boundary flux -v'(0) = -1
    rhs[0] = -1.0
    # Near 0, v = smooth + c1 y**(beta+2) with c1 = -i v(0)/((beta+1)(beta+2)).
    # The two-point flux misses the slope of that term at the cell faces by
    # defect_j; adding c1 * defect_j to each flux couples every row to v(0).
    mid = 0.5 * (y[:-1] + y[1:])
    defect = (beta + 2) * mid ** (beta + 1) - np.diff(y ** (beta + 2)) / hh
    column = np.zeros(n + 1, dtype=complex)
    # rows are -F_{j+1/2} + F_{j-1/2}, so row j gains -c1 (defect_j - defect_{j-1})
    column[:-1] += defect
    column[1:] -= defect
    column *= 1j / ((beta + 1) * (beta + 2))
    bands = np.array([upper, main, lower])
    base = sla.solve_banded((1, 1), bands, rhs)
    shift = sla.solve_banded((1, 1), bands, column)
    v = base - shift * base[0] / (1.0 + shift[0])
    if not np.all(np.isfinite(v)):
        raise sla.LinAlgError("non-finite half-line solution")
    return v, y


def matching_objective(h: float, mu: complex, beta: float, n: int = HALFLINE_NODES) -> complex:
    """F_h(mu) = eta v(0) - tan(pi eta / 2) / s with eta = 2 + s mu."""
    s = stretch(h, beta)
    eta = 2.0 + s * mu
    if abs(np.cos(math.pi * eta / 2)) < 1e-8:
        raise TanPoleError(f"eta = {eta} is at a pole of tan(pi eta/2)")
    v0 = solve_halfline(h, eta * eta, beta, n=n).v0
    return complex(eta * v0 - np.tan(math.pi * eta / 2) / s)


def calibrate_k_bound(beta: float, hs: Sequence[float] = tuple(2.0**-k for k in range(3, 10))) -> float:
    """K_bound = 2 max_h |v(0)| at z = 4 over a coarse h grid."""
    return 2.0 * max(abs(solve_halfline(h, LIMIT_EIGENVALUE, beta).v0) for h in hs)


@dataclass(frozen=True)
class MuRoot:
    h: float
    beta: float
    mu: complex
    eta: complex
    objective: float  # |F_h(mu)|
    iterations: int
    method: str
    k_bound: float


def _newton(func, mu, tol, max_iter, trace):
    f = func(mu)
    for it in range(1, max_iter + 1):
        if abs(f) < tol:
            return mu, f, it - 1
        step = 1e-7 * (1.0 + abs(mu))
        deriv = (func(mu + step) - f) / step
        mu = mu - f / deriv
        f = func(mu)
        trace.append((it, complex(mu), abs(f)))
    if abs(f) < tol:
        return mu, f, max_iter
    return None


def _argument_principle_seed(func, radius, points=16):
    """Zero estimate (1/2 pi i) \\oint mu F'/F dmu by the trapezoid rule on |mu| = radius."""
    theta = 2 * math.pi * np.arange(points) / points
    nodes = radius * np.exp(1j * theta)
    vals = np.array([func(m) for m in nodes])
    step = 1e-6 * radius
    derivs = (np.array([func(m + step) for m in nodes]) - vals) / step
    weights = nodes / points  # dmu / (2 pi i) = mu dtheta / (2 pi)
    count = np.sum(derivs / vals * weights)
    centre = np.sum(nodes * derivs / vals * weights)
    if abs(count) < 0.5:
        raise RootNotFound("argument principle finds no zero in the disc")
    return complex(centre / count)


def find_mu(
    h: float,
    beta: float,
    k_bound: Optional[float] = None,
    max_iter: int = 50,
    n: int = HALFLINE_NODES,
) -> MuRoot:
    """Root of F_h in the disc |mu| <= 9 K / pi, seeded at (4/pi) v(0) for z = 4."""
    if k_bound is None:
        k_bound = calibrate_k_bound(beta)
    radius = 9.0 * k_bound / math.pi
    s = stretch(h, beta)

    def func(mu):
        return matching_objective(h, mu, beta, n)

    f0 = func(0.0)
    boundary = min(abs(func(radius * np.exp(2j * math.pi * j / 16))) for j in range(16))
    if not boundary > abs(f0):
        raise ValueError(f"h = {h} too large: boundary modulus {boundary:.3g} <= |F(0)| = {abs(f0):.3g}")
    tol = 1e-10 / s
    seed = 4.0 / math.pi * solve_halfline(h, LIMIT_EIGENVALUE, beta, n=n).v0
    trace = []
    found = _newton(func, seed, tol, max_iter, trace)
    method = "newton"
    if found is None or abs(found[0]) > radius:
        method = "argument-principle"
        seed = _argument_principle_seed(func, radius)
        found = _newton(func, seed, tol, max_iter, trace)
        if found is None or abs(found[0]) > radius:
            raise RootNotFound(f"no root of F_h for h = {h}", trace)
    mu, f, its = found
    return MuRoot(h=h, beta=beta, mu=complex(mu), eta=complex(2 + s * mu), objective=float(abs(f)),
                  iterations=its, method=method, k_bound=k_bound)


def matching_residual(root: MuRoot, n: int = HALFLINE_NODES) -> float:
    """|v-(0)/v-'(0) - v+(0)/v+'(0)| at the edge, in x units."""
    eta = root.eta
    s = stretch(root.h, root.beta)
    inner = np.tan(math.pi * eta / 2) / eta
    outer = s * solve_halfline(root.h, eta * eta, root.beta, n=n).v0
    return float(abs(inner - outer))


def smooth_cutoff(t: np.ndarray, band=CUTOFF_BAND) -> np.ndarray:
    """1 for t <= band[0], 0 for t >= band[1], C-infinity in between."""
    a, b = band
    s = np.clip((np.asarray(t, dtype=float) - a) / (b - a), 0.0, 1.0)

    def psi(r):
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = np.exp(-1.0 / r[pos])
        return out

    return psi(1.0 - s) / (psi(1.0 - s) + psi(s))


@dataclass
class QuasimodeSolution:
    h: float
    beta: float
    mu: complex
    eta: complex
    eta_discrete: float
    v_plus: HalflineSolution = field(repr=False)
    v0: complex
    glue_coefficient: complex
    grid: Grid = field(repr=False)
    circle_profile: np.ndarray = field(repr=False)
    lam: float
    residual: float
    k: Optional[int] = None

    @property
    def relative_residual(self) -> float:
        # the profile has unit L2 norm
        return self.residual


def _discrete_matching(grid: Grid, w: np.ndarray, lam: float, eta0: complex, max_iter: int = 40):
    """Refine eta so that sin(eta x) glues to the discrete damped solution exactly.

    On the damped side the grid function g solves the stencil equation with
    g = 1 at the edge node and g = 0 at x = pi.  The remaining unknown eta is
    fixed by the stencil equation at the edge node, solved by complex Newton
    from the continuous root.
    """
    n, dx = grid.n, grid.dx
    j0 = 3 * n // 4
    idx = np.arange(j0 + 1, n)
    m = idx.size
    off = np.full(m, -1.0 / dx**2, dtype=complex)
    rhs = np.zeros(m, dtype=complex)
    rhs[0] = 1.0 / dx**2

    def edge_equation(eta):
        energy = 2.0 / dx**2 * (1.0 - np.cos(eta * dx))
        main = 2.0 / dx**2 - 1j * lam * w[idx] - energy
        g = sla.solve_banded((1, 1), np.array([off, main, off]), rhs)
        amp = np.sin(eta * math.pi / 2)
        inner = np.sin(eta * (math.pi / 2 - dx))
        val = -(amp * g[0] - 2 * amp + inner) / dx**2 - 1j * lam * w[j0] * amp - energy * amp
        return val, g

    eta = complex(eta0)
    for _ in range(max_iter):
        f, _ = edge_equation(eta)
        step = 1e-7
        f2, _ = edge_equation(eta + step)
        delta = f * step / (f2 - f)
        eta -= delta
        if abs(delta) < 1e-13:
            break
    else:
        raise RootNotFound("discrete edge matching did not converge")
    _, g = edge_equation(eta)
    return eta, g, j0, idx


def build_circle_quasimode(
    h: float,
    beta: float,
    grid: Grid,
    k_bound: Optional[float] = None,
    root: Optional[MuRoot] = None,
) -> QuasimodeSolution:
    """Odd quasimode on the circle at frequency lam = h**-2 for the sharpness damping.

    sin(eta x) on [0, pi/2] is glued to the damped-side solution, cut off
    smoothly before x = pi, reflected oddly and normalized in L2.  The
    glue uses the grid equations (eta refined from the continuous root) so
    the edge node carries no matching error.
    """
    if not grid.periodic:
        raise ValueError("circle quasimodes need a periodic grid")
    if grid.n % 4:
        raise ValueError("the grid size must be divisible by 4 so that x = 0, pi/2 are nodes")
    s = stretch(h, beta)
    if not grid.dx < s / 8:
        raise ValueError(f"dx = {grid.dx:.4g} does not resolve the layer width {s:.4g} (need dx < s/8)")
    lam = h**-2
    if root is None:
        root = find_mu(h, beta, k_bound)
    spec = sharp_damping(beta)
    w = damping_on_grid(spec, grid)
    eta_d, g, j0, idx = _discrete_matching(grid, w, lam, root.eta)
    n, x = grid.n, grid.nodes
    u = np.zeros(n, dtype=complex)
    centre = n // 2
    inner = np.arange(centre, j0 + 1)
    u[inner] = np.sin(eta_d * x[inner])
    u[idx] = np.sin(eta_d * math.pi / 2) * g
    u *= smooth_cutoff(np.abs(x) - math.pi / 2)
    # odd reflection: the node mirrored from x_j is x_{(n - j) mod n}
    neg = np.arange(1, centre)
    u[neg] = -u[n - neg]
    u[0] = 0.0
    u /= math.sqrt(float(np.sum(np.abs(u) ** 2)) * grid.dx)
    op = laplacian_matrix(grid) - 1j * lam * sp.diags(w) - LIMIT_EIGENVALUE * sp.identity(n)
    residual = math.sqrt(float(np.sum(np.abs(op @ u) ** 2)) * grid.dx)
    v_plus = solve_halfline(h, root.eta**2, beta)
    glue = root.eta * np.cos(root.eta * math.pi / 2) * s
    return QuasimodeSolution(
        h=h,
        beta=beta,
        mu=root.mu,
        eta=root.eta,
        eta_discrete=eta_d,
        v_plus=v_plus,
        v0=v_plus.v0,
        glue_coefficient=complex(glue),
        grid=grid,
        circle_profile=u,
        lam=lam,
        residual=residual,
    )


def torus_frequency(k: int) -> float:
    """lam_k with lam_k**2 - k**2 equal to the limiting eigenvalue 4."""
    return math.sqrt(LIMIT_EIGENVALUE + k * k)


def build_torus_quasimode(k: int, beta: float, grid: Grid, k_bound: Optional[float] = None) -> QuasimodeSolution:
    """u_k(x) sin(k y) at lam_k = sqrt(4 + k**2).

    For the y-mode k the torus operator reduces to -d^2/dx^2 + k**2 - i lam W - lam**2,
    which equals the circle operator with the constant 4, so the relative
    residual is the circle residual of the unit-norm profile.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    lam = torus_frequency(k)
    sol = build_circle_quasimode(lam**-0.5, beta, grid, k_bound)
    sol.k = k
    return sol


@dataclass(frozen=True)
class EtaSample:
    h: float
    mu: complex
    eta: complex
    objective: float
    matching_residual: float

    @property
    def abs_eta_minus_2(self) -> float:
        return float(abs(self.eta - 2.0))


def eta_sweep(beta: float, hs: Sequence[float], k_bound: Optional[float] = None) -> list:
    if k_bound is None:
        k_bound = calibrate_k_bound(beta)
    out = []
    for h in sorted(hs, reverse=True):
        root = find_mu(h, beta, k_bound)
        out.append(EtaSample(h, root.mu, root.eta, root.objective, matching_residual(root)))
    return out


def residual_sweep(beta: float, ks: Sequence[int], grid: Grid, k_bound: Optional[float] = None) -> list:
    """Torus quasimodes for each k; returns the QuasimodeSolutions."""
    if k_bound is None:
        k_bound = calibrate_k_bound(beta)
    return [build_torus_quasimode(k, beta, grid, k_bound) for k in sorted(ks)]
