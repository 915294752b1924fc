"""Crank-Nicolson evolution of the damped wave equation on the circle and the torus.

Torus runs use the y-Fourier reduction: mode m evolves under the circle
generator with the Laplacian shifted by m**2, and energies add up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .damping import DampingSpec
from .discretize import (
    Grid,
    State,
    assemble_A,
    damping_on_grid,
    discrete_norm,
    laplacian_matrix,
    state_energy,
)
from .resolvent import fit_loglog

EXTINCTION_FLOOR = 1e-14


@dataclass
class EnergyTrace:
    times: np.ndarray
    energies: np.ndarray
    dnorm0: float
    spec_hash: str = ""
    dt: float = 0.0
    n: int = 0
    final: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.energies = np.asarray(self.energies, dtype=float)

    @property
    def sqrt_energy(self) -> np.ndarray:
        return np.sqrt(np.clip(self.energies, 0.0, None))


def _spec_hash(spec) -> str:
    return spec.spec_hash() if isinstance(spec, DampingSpec) else "array"


def riesz_project(state: State, spec):
    """Split a state into its kernel part (c, 0) and the complementary part.

    c = Av(W u + v) / Av(W).  The left null vector of the discrete generator
    is (W, 1), so this is the exact spectral projector of the scheme.
    """
    w = damping_on_grid(spec, state.grid)
    mass = float(np.sum(w))
    if mass == 0.0:
        raise ValueError("the projection is undefined when W averages to zero")
    c = np.sum(w * state.u + state.v) / mass
    pi0 = State(np.full(state.grid.n, c, dtype=complex), np.zeros(state.grid.n, dtype=complex), state.grid)
    pidot = State(state.u - pi0.u, state.v.copy(), state.grid)
    return pi0, pidot


def dnorm(state: State, spec) -> float:
    """Graph norm: ||u||_{H1}^2 + ||v||_{H1}^2 + ||-u'' + W v||^2, square-rooted."""
    return discrete_norm(state, "Dnorm", spec)


def h_norm(state: State, mode_shift: float = 0.0) -> float:
    """sqrt(||u||^2 + <(L + mode_shift) u, u> + ||v||^2), the H1 x L2 norm matched to the stencil."""
    grid = state.grid
    l2 = float(np.sum(np.abs(state.u) ** 2)) * grid.dx
    return math.sqrt(l2 + 2.0 * state_energy(state, mode_shift))


class CrankNicolson:
    """Caches the LU factors of I - dt/2 A for repeated steps."""

    def __init__(self, generator: sp.spmatrix, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        size = generator.shape[0]
        eye = sp.identity(size, format="csc", dtype=complex)
        gen = sp.csc_matrix(generator, dtype=complex)
        self.dt = dt
        self.explicit = (eye + 0.5 * dt * gen).tocsr()
        self.lu = spla.splu((eye - 0.5 * dt * gen).tocsc())

    def step(self, vec: np.ndarray) -> np.ndarray:
        return self.lu.solve(self.explicit @ vec)


def step_cn(state: State, op, dt: float) -> State:
    """One Crank-Nicolson step (I - dt/2 A)^{-1} (I + dt/2 A)."""
    gen = op.matrix if hasattr(op, "matrix") else op
    vec = CrankNicolson(gen, dt).step(state.stacked())
    return State.from_stacked(vec, state.grid)


def _step_count(T: float, dt: float) -> int:
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T={T} is not a whole number of steps of dt={dt}")
    return steps


def evolve(
    state0: State,
    spec,
    T: float,
    dt: float,
    stride: int = 1,
    project: bool = True,
    mode_shift: float = 0.0,
    viscosity: float = 0.0,
) -> EnergyTrace:
    """Energy trace of the Crank-Nicolson solution, sampled every `stride` steps.

    The initial state is replaced by its projection off the kernel unless
    project=False.  dt <= dx is the accuracy guideline; the scheme itself is
    unconditionally stable.
    """
    grid = state0.grid
    if project:
        _, state0 = riesz_project(state0, spec)
    steps = _step_count(T, dt)
    gen = assemble_A(grid, spec, mode_shift, viscosity).matrix
    cn = CrankNicolson(gen, dt)
    vec = state0.stacked()
    times, energies = [0.0], [state_energy(state0, mode_shift)]
    for i in range(1, steps + 1):
        vec = cn.step(vec)
        if i % stride == 0 or i == steps:
            times.append(i * dt)
            energies.append(state_energy(State.from_stacked(vec, grid), mode_shift))
    return EnergyTrace(
        times=np.array(times),
        energies=np.array(energies),
        dnorm0=dnorm(state0, spec),
        spec_hash=_spec_hash(spec),
        dt=dt,
        n=grid.n,
        final=vec,
    )


@dataclass
class TorusTrace:
    modes: tuple
    modal: dict
    aggregate: EnergyTrace


def evolve_torus(
    spec,
    grid: Grid,
    modes: Sequence[int],
    data: dict,
    T: float,
    dt: float,
    stride: int = 1,
    viscosity: float = 0.0,
) -> TorusTrace:
    """Evolve the y-modes listed in `modes` together.

    ``data`` maps a mode to its initial State; missing modes start at rest.
    All modes are stacked into one block-diagonal system so each time step is
    a single sparse solve.  Mode 0 is projected off the kernel; the other
    modes have a trivial kernel.
    """
    modes = tuple(int(m) for m in modes)
    n = grid.n
    starts = []
    for m in modes:
        st = data.get(m)
        if st is None:
            st = State(np.zeros(n), np.zeros(n), grid)
        if m == 0:
            _, st = riesz_project(st, spec)
        starts.append(st.stacked())
    gen = sp.block_diag([assemble_A(grid, spec, float(m * m), viscosity).matrix for m in modes], format="csc")
    cn = CrankNicolson(gen, dt)
    steps = _step_count(T, dt)
    vec = np.concatenate(starts)
    lap = laplacian_matrix(grid)
    size = 2 * n

    def modal_energies(v):
        out = []
        for j, m in enumerate(modes):
            block = v[j * size : (j + 1) * size]
            u, vel = block[:n], block[n:]
            pot = np.real(np.vdot(u, lap @ u + m * m * u))
            out.append(0.5 * (pot + np.sum(np.abs(vel) ** 2)) * grid.dx)
        return out

    times = [0.0]
    rows = [modal_energies(vec)]
    for i in range(1, steps + 1):
        vec = cn.step(vec)
        if i % stride == 0 or i == steps:
            times.append(i * dt)
            rows.append(modal_energies(vec))
    rows = np.array(rows)
    times = np.array(times)
    tag = _spec_hash(spec)
    modal = {
        m: EnergyTrace(times, rows[:, j], dnorm(State.from_stacked(starts[j], grid), spec), tag, dt, n)
        for j, m in enumerate(modes)
    }
    dnorm0 = math.sqrt(sum(tr.dnorm0**2 for tr in modal.values()))
    aggregate = EnergyTrace(times, rows.sum(axis=1), dnorm0, tag, dt, n, final=vec)
    return TorusTrace(modes=modes, modal=modal, aggregate=aggregate)


@dataclass(frozen=True)
class DecayFit:
    model: str
    value: float  # rate for "exponential", exponent for "polynomial"
    fit_residual: float
    window: tuple
    samples: int


def fit_decay(trace: EnergyTrace, model: str = "exponential", window=None, min_samples: int = 20) -> DecayFit:
    """Exponential: log E = a - rate t.  Polynomial: log sqrt(E) = b - exponent log t."""
    t = trace.times
    if window is None:
        window = (t[-1] / 10.0, t[-1])
    lo, hi = float(window[0]), float(window[1])
    keep = (t >= lo) & (t <= hi)
    if keep.sum() < min_samples:
        raise ValueError(f"need {min_samples} samples in window ({lo:g}, {hi:g}), got {int(keep.sum())}")
    e = trace.energies[keep]
    if np.any(e <= 0):
        raise ValueError("nonpositive energy in the fit window")
    if model == "exponential":
        design = np.column_stack([t[keep], np.ones(keep.sum())])
        ly = np.log(e)
        coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
        resid = ly - design @ coef
        return DecayFit(model, float(-coef[0]), float(np.sqrt(np.mean(resid**2))), (lo, hi), int(keep.sum()))
    if model == "polynomial":
        if lo <= 0:
            raise ValueError("polynomial fits need a window away from t = 0")
        fit = fit_loglog(t[keep], np.sqrt(e))
        return DecayFit(model, -fit.slope, fit.fit_residual, (lo, hi), int(keep.sum()))
    raise ValueError(f"unknown decay model {model!r}")


def windowed_exponents(trace: EnergyTrace, fractions=(0.1, 0.25, 0.5)) -> dict:
    """Polynomial exponents fitted on [f T, T] for each fraction f."""
    T = trace.times[-1]
    return {f: fit_decay(trace, "polynomial", (f * T, T)).value for f in fractions}


@dataclass(frozen=True)
class ExtinctionReport:
    min_ratio: float
    status: str  # "pass", "inconclusive" or "fail"


def extinction_probe(trace: EnergyTrace, floor: float = EXTINCTION_FLOOR, max_drop: float = 1e6) -> ExtinctionReport:
    """min E(t)/E(0) over the trace.

    Below the floor the run is "inconclusive" when the energy got there
    gradually (ordinary decay into round-off) and "fail" when a single
    sample interval drops by more than `max_drop`.
    """
    e0 = trace.energies[0]
    if not e0 > 0:
        raise ValueError("extinction probe needs positive initial energy")
    ratios = trace.energies / e0
    low = float(ratios.min())
    if low > floor:
        return ExtinctionReport(low, "pass")
    prev = np.clip(ratios[:-1], 1e-300, None)
    nxt = np.clip(ratios[1:], 1e-300, None)
    abrupt = np.any((prev > floor) & (prev / nxt > max_drop))
    return ExtinctionReport(low, "fail" if abrupt else "inconclusive")


def random_state(grid: Grid, spec, seed: int = 0, cutoff: int = 16) -> State:
    """Random band-limited state, projected off the kernel, unit graph norm."""
    rng = np.random.default_rng(seed)
    n = grid.n
    x = grid.nodes
    ks = np.arange(-cutoff, cutoff + 1)
    basis = np.exp(1j * np.outer(x, ks))

    def draw():
        coef = (rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)) / (1.0 + ks**2)
        return np.real(basis @ coef)

    st = State(draw(), draw(), grid)
    _, st = riesz_project(st, spec)
    scale = dnorm(st, spec)
    return State(st.u / scale, st.v / scale, grid)
