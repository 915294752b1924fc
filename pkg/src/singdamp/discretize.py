"""Uniform grids, finite-difference operators and discrete norms.

The circle grid has nodes x_j = -pi + j*dx, j = 0..n-1.  Operators are kept
sparse (they are tridiagonal up to the periodic corners); ``dense()`` gives
the matrix for SVD and eigenvalue work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .damping import DampingSpec, cell_average

BOUNDARY_KINDS = ("dirichlet", "neumann", "robin")


@dataclass(frozen=True)
class Periodic:
    """The circle [-pi, pi) with endpoints identified."""


@dataclass(frozen=True)
class Interval:
    a: float
    b: float
    left: str = "dirichlet"
    right: str = "dirichlet"
    # u'(b) = -robin * u(b) when right == "robin"
    robin: complex = 0.0

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("interval needs a < b")
        for side in (self.left, self.right):
            if side not in BOUNDARY_KINDS:
                raise ValueError(f"unknown boundary condition {side!r}")
        if self.left == "robin":
            raise ValueError("Robin conditions are supported at the right end only")


Domain = Union[Periodic, Interval]


@dataclass(frozen=True)
class Grid:
    domain: Domain
    n: int
    dx: float
    nodes: np.ndarray = field(repr=False, compare=False)

    @property
    def periodic(self) -> bool:
        return isinstance(self.domain, Periodic)


def build_grid(domain: Domain, n: int) -> Grid:
    if n < 16:
        raise ValueError(f"need at least 16 nodes, got {n}")
    if isinstance(domain, Periodic):
        dx = 2.0 * math.pi / n
        nodes = -math.pi + dx * np.arange(n)
    elif isinstance(domain, Interval):
        dx = (domain.b - domain.a) / (n - 1)
        nodes = domain.a + dx * np.arange(n)
    else:
        raise TypeError(f"unknown domain {domain!r}")
    return Grid(domain=domain, n=n, dx=dx, nodes=nodes)


def circle_grid(n: int) -> Grid:
    return build_grid(Periodic(), n)


@dataclass
class ComplexOperator:
    """A discrete operator together with what it represents.

    role is one of "laplacian", "stationary" (params lam, mu2) or "generator".
    """

    matrix: sp.csr_matrix
    grid: Grid
    role: str
    params: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        return self.matrix @ other


@dataclass
class State:
    """Displacement u and velocity v on a grid."""

    u: np.ndarray
    v: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=complex)
        self.v = np.asarray(self.v, dtype=complex)
        if self.u.shape != (self.grid.n,) or self.v.shape != (self.grid.n,):
            raise ValueError("state components must match the grid size")

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    @classmethod
    def from_stacked(cls, vec, grid: Grid) -> "State":
        return cls(vec[: grid.n], vec[grid.n :], grid)


def damping_on_grid(spec_or_values, grid: Grid) -> np.ndarray:
    """Cell averages of W over [x_j - dx/2, x_j + dx/2].

    A raw array is passed through unchanged, which lets tests feed
    coefficients that no DampingSpec can produce (for instance negative ones).
    """
    if isinstance(spec_or_values, DampingSpec):
        x = grid.nodes
        a = x - grid.dx / 2
        b = x + grid.dx / 2
        if not grid.periodic:
            a = np.maximum(a, grid.domain.a)
            b = np.minimum(b, grid.domain.b)
        return cell_average(spec_or_values, a, b)
    w = np.asarray(spec_or_values, dtype=float)
    if w.shape != (grid.n,):
        raise ValueError(f"damping array has shape {w.shape}, grid has {grid.n} nodes")
    return w


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Second-order stencil for -d^2/dx^2.

    Interval ends: Dirichlet nodes are decoupled (row and column replaced by
    a diagonal 1/dx^2 entry, so the matrix stays symmetric and the interior
    block is the Dirichlet Laplacian); Neumann and Robin ends use a ghost node.
    """
    n, dx = grid.n, grid.dx
    main = np.full(n, 2.0, dtype=complex)
    off = -np.ones(n - 1, dtype=complex)
    upper = off.copy()
    lower = off.copy()
    if grid.periodic:
        mat = sp.diags([main, lower, upper], [0, -1, 1], format="lil")
        mat[0, n - 1] = -1.0
        mat[n - 1, 0] = -1.0
        return (mat.tocsr().real / dx**2).astype(float)
    dom = grid.domain
    if dom.left == "neumann":
        upper[0] = -2.0
    if dom.right in ("neumann", "robin"):
        lower[-1] = -2.0
        if dom.right == "robin":
            main[-1] += 2.0 * dx * dom.robin
    if dom.left == "dirichlet":
        main[0], upper[0] = 1.0, 0.0
        lower[0] = 0.0
    if dom.right == "dirichlet":
        main[-1], lower[-1] = 1.0, 0.0
        upper[-1] = 0.0
    mat = sp.diags([main, lower, upper], [0, -1, 1], format="csr") / dx**2
    if np.all(mat.data.imag == 0):
        mat = mat.real.astype(float)
    return mat.tocsr()


def assemble_laplacian(grid: Grid) -> ComplexOperator:
    return ComplexOperator(laplacian_matrix(grid), grid, "laplacian")


def assemble_P(grid: Grid, spec, lam: complex, mu2: Optional[complex] = None) -> ComplexOperator:
    """P = -d^2/dx^2 - i lam W - mu2, with mu2 = lam**2 unless given."""
    if mu2 is None:
        mu2 = lam**2
    w = damping_on_grid(spec, grid)
    mat = laplacian_matrix(grid) - 1j * lam * sp.diags(w) - mu2 * sp.identity(grid.n)
    return ComplexOperator(mat.tocsr(), grid, "stationary", {"lam": lam, "mu2": mu2})


def assemble_A(grid: Grid, spec, mode_shift: float = 0.0, viscosity: float = 0.0) -> ComplexOperator:
    """Generator [[0, I], [d^2/dx^2 - mode_shift, -W]] on stacked (u, v).

    ``mode_shift`` adds m**2 to the Laplacian for a Fourier mode e^{imy} on the torus.
    ``viscosity`` > 0 adds -viscosity * dx**2 * L to the velocity block.  This
    numerical viscosity damps the grid-scale modes, whose group velocity
    vanishes so that they never reach the damping region; it is off by default.
    """
    n = grid.n
    w = damping_on_grid(spec, grid)
    lap0 = laplacian_matrix(grid)
    lap = lap0 + mode_shift * sp.identity(n)
    damp = sp.diags(w)
    if viscosity:
        damp = damp + viscosity * grid.dx**2 * lap0
    mat = sp.bmat([[None, sp.identity(n)], [-lap, -damp]], format="csr")
    params = {"mode_shift": mode_shift, "viscosity": viscosity}
    return ComplexOperator(mat.astype(complex), grid, "generator", params)


def fourier_weight(grid: Grid, s: float) -> np.ndarray:
    """(1 + k^2)^(s/2) for the FFT ordering of a periodic grid."""
    k = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    return (1.0 + k**2) ** (s / 2)


def apply_fourier_multiplier(u: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Multiply the discrete Fourier coefficients of u (along axis 0) by weight."""
    shape = (-1,) + (1,) * (np.ndim(u) - 1)
    return np.fft.ifft(weight.reshape(shape) * np.fft.fft(u, axis=0), axis=0)


def fourier_multiplier_matrix(grid: Grid, s: float) -> np.ndarray:
    """Dense matrix of (1 - d^2/dx^2)^(s/2) on a periodic grid (Hermitian)."""
    return apply_fourier_multiplier(np.eye(grid.n), fourier_weight(grid, s))


def discrete_norm(obj, kind: str, spec=None, s: float = 1.0, mode_shift: float = 0.0) -> float:
    """Norms of grid functions and states.

    kinds: "L2", "H1", "Hs" for a grid function given as (values, grid);
    "Dnorm" (graph norm of the generator, needs spec) and "Energy" for a State.
    H1 uses centered differences.  The energy uses the stencil form <Lu, u>,
    i.e. the forward-difference gradient, so it matches the Laplacian exactly.
    """
    if kind in ("L2", "H1", "Hs"):
        values, grid = obj
        values = np.asarray(values)
        dx = grid.dx
        l2sq = float(np.sum(np.abs(values) ** 2) * dx)
        if kind == "L2":
            return math.sqrt(l2sq)
        if kind == "H1":
            if grid.periodic:
                grad = (np.roll(values, -1) - np.roll(values, 1)) / (2 * dx)
            else:
                grad = np.gradient(values, dx)
            return math.sqrt(l2sq + float(np.sum(np.abs(grad) ** 2) * dx))
        if not grid.periodic:
            raise ValueError("Hs norms are defined on periodic grids only")
        hat = np.fft.fft(values)
        # Parseval: sum |u_j|^2 dx = dx/n sum |hat_k|^2
        return math.sqrt(float(np.sum(fourier_weight(grid, s) ** 2 * np.abs(hat) ** 2)) * dx / grid.n)
    if kind == "Dnorm":
        if spec is None:
            raise ValueError("Dnorm needs the damping")
        st = obj
        image = laplacian_matrix(st.grid) @ st.u + damping_on_grid(spec, st.grid) * st.v
        return math.sqrt(
            discrete_norm((st.u, st.grid), "H1") ** 2
            + discrete_norm((st.v, st.grid), "H1") ** 2
            + discrete_norm((image, st.grid), "L2") ** 2
        )
    if kind == "Energy":
        return state_energy(obj, mode_shift=mode_shift)
    raise ValueError(f"unknown norm kind {kind!r}")


def state_energy(state: State, mode_shift: float = 0.0) -> float:
    """E = (<(L + mode_shift) u, u> + ||v||^2) / 2 with L the discrete -d^2/dx^2."""
    grid = state.grid
    lu = laplacian_matrix(grid) @ state.u + mode_shift * state.u
    pot = float(np.real(np.vdot(state.u, lu))) * grid.dx
    kin = float(np.sum(np.abs(state.v) ** 2)) * grid.dx
    return 0.5 * (pot + kin)
