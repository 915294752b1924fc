"""Spectrum of the discrete generator and checks on its pole structure.

Convention: mu is an eigenvalue of the generator A, and the stationary
operator at lam = i*mu is P = L + mu*W + mu**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .discretize import Grid, assemble_A, assemble_P, damping_on_grid

ZERO_RTOL = 1e-8
MAX_DENSE_N = 1024


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    spectral_abscissa: float
    kernel_dim: int
    kernel_vectors: np.ndarray = field(repr=False)
    symmetry_defect: float
    trace_defect: float
    matrix_norm: float
    tol_zero: float
    correspondence_defect: Optional[float] = None

    def resolved_abscissa(self, grid: Grid, fraction: float = 0.5) -> float:
        """Largest Re mu over eigenvalues with |Im mu| <= fraction * (2/dx).

        2/dx is the top frequency of the stencil.  Modes near it have almost
        zero group velocity and are a property of the grid, not of W.
        """
        rest = self.nonzero()
        band = rest[np.abs(rest.imag) <= fraction * 2.0 / grid.dx]
        return float(band.real.max()) if band.size else -math.inf

    def nonzero(self) -> np.ndarray:
        return self.eigenvalues[np.abs(self.eigenvalues) >= self.tol_zero]

    def with_correspondence(self, defect: float) -> "SpectrumReport":
        return SpectrumReport(**{**self.__dict__, "correspondence_defect": defect})


def _symmetry_defect(evals: np.ndarray) -> float:
    # distance from each eigenvalue to the nearest conjugate of another one
    conj = np.conj(evals)
    worst = 0.0
    for mu in evals:
        worst = max(worst, float(np.min(np.abs(conj - mu))))
    return worst


def eig_A(grid: Grid, spec, rtol_zero: float = ZERO_RTOL, viscosity: float = 0.0) -> SpectrumReport:
    """Full eigendecomposition of the 2n x 2n generator."""
    if not grid.periodic:
        raise ValueError("eig_A needs a periodic grid")
    if grid.n > MAX_DENSE_N:
        raise ValueError(f"dense eigensolve limited to n <= {MAX_DENSE_N}")
    a = assemble_A(grid, spec, viscosity=viscosity).dense().real
    try:
        evals, evecs = sla.eig(a)
    except sla.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    norm = float(np.linalg.norm(a, 2))
    tol = rtol_zero * norm
    zero = np.abs(evals) < tol
    rest = evals[~zero]
    abscissa = float(rest.real.max()) if rest.size else -math.inf
    trace = float(np.trace(a))
    trace_defect = abs(complex(evals.sum()) - trace) / max(abs(trace), 1.0)
    return SpectrumReport(
        eigenvalues=evals,
        eigenvectors=evecs,
        spectral_abscissa=abscissa,
        kernel_dim=int(zero.sum()),
        kernel_vectors=evecs[:, zero],
        symmetry_defect=_symmetry_defect(evals),
        trace_defect=float(trace_defect),
        matrix_norm=norm,
        tol_zero=tol,
    )


@dataclass(frozen=True)
class HalfplaneCheck:
    passed: bool
    marginal: bool
    max_real: float
    witnesses: tuple


def check_upper_halfplane(report: SpectrumReport, tol: Optional[float] = None) -> HalfplaneCheck:
    """Every nonzero eigenvalue must satisfy Re mu < tol.

    Eigenvalues within tol of the imaginary axis make the result "marginal"
    (the undamped case sits exactly there).
    """
    if tol is None:
        tol = report.tol_zero
    rest = report.nonzero()
    if rest.size == 0:
        return HalfplaneCheck(True, False, -math.inf, ())
    bad = rest[rest.real >= tol]
    max_real = float(rest.real.max())
    return HalfplaneCheck(
        passed=bad.size == 0,
        marginal=bool(abs(max_real) < tol),
        max_real=max_real,
        witnesses=tuple(complex(v) for v in bad),
    )


@dataclass(frozen=True)
class KernelCheck:
    kernel_dim: int
    generalized_kernel_dim: int


def _nullity(mat: np.ndarray, rtol: float) -> int:
    svals = sla.svdvals(mat)
    return int(np.sum(svals < rtol * svals[0]))


def check_kernel_simplicity(grid: Grid, spec, rtol: float = ZERO_RTOL) -> KernelCheck:
    """Nullities of A and A**2 from SVD ranks; both are 1 when W is not zero.

    Rank decisions are only reliable while rtol separates the zero cluster
    from the smallest nonzero singular value, so keep n modest (<= 256).
    """
    a = assemble_A(grid, spec).dense().real
    return KernelCheck(kernel_dim=_nullity(a, rtol), generalized_kernel_dim=_nullity(a @ a, rtol))


def pole_defect(grid: Grid, spec, mu: complex) -> float:
    """sigma_min(P_{i mu}) / ||P_{i mu}||; zero exactly when mu is an eigenvalue."""
    lam = 1j * mu
    p = assemble_P(grid, spec, lam, lam * lam).dense()
    svals = sla.svdvals(p)
    return float(svals[-1] / svals[0])


def check_pole_correspondence(report: SpectrumReport, grid: Grid, spec, samples: int = 10) -> float:
    """Largest pole defect over the `samples` nonzero eigenvalues of smallest modulus."""
    rest = report.nonzero()
    order = np.argsort(np.abs(rest), kind="stable")
    return max(pole_defect(grid, spec, complex(mu)) for mu in rest[order[:samples]])


@dataclass(frozen=True)
class LowerRegionCheck:
    k_empirical: float
    violations: tuple
    k_configured: Optional[float]


def check_lower_region(
    report: SpectrumReport,
    p: float,
    m: float,
    delta: float,
    k: Optional[float] = None,
) -> LowerRegionCheck:
    """Eigenvalues inside the cusp {|Im mu| < m |Re mu|**(p - delta), Re mu <= -K}.

    k_empirical is the smallest K leaving the cusp empty.  The inequality is
    strict so that m = 0 describes an empty region.
    """
    if not p > 1:
        raise ValueError("the region check needs p > 1")
    rest = report.nonzero()
    left = rest[rest.real < 0]
    inside = left[np.abs(left.imag) < m * np.abs(left.real) ** (p - delta)]
    k_emp = float((-inside.real).max()) if inside.size else 0.0
    violations = ()
    if k is not None:
        violations = tuple(complex(v) for v in inside if v.real <= -k)
    return LowerRegionCheck(k_empirical=k_emp, violations=violations, k_configured=k)


def kernel_alignment(report: SpectrumReport, grid: Grid) -> float:
    """|cos| of the angle between the kernel eigenvector and (1, 0)."""
    if report.kernel_dim == 0:
        return 0.0
    target = np.concatenate([np.ones(grid.n), np.zeros(grid.n)])
    target /= np.linalg.norm(target)
    vec = report.kernel_vectors[:, 0]
    return float(abs(np.vdot(target, vec)) / np.linalg.norm(vec))


def trace_of_generator(grid: Grid, spec) -> float:
    return -float(np.sum(damping_on_grid(spec, grid)))
