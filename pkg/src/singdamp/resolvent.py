"""Stationary resolvent norms, torus mode reduction and log-log exponent fits."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from .damping import DampingSpec, predict_rates
from .discretize import (
    ComplexOperator,
    Grid,
    assemble_A,
    assemble_P,
    circle_grid,
    damping_on_grid,
    fourier_multiplier_matrix,
    laplacian_matrix,
)

SINGULAR_RTOL = 1e-14
# matrices up to this size go through a dense SVD under method="auto"
DENSE_LIMIT = 256
JITTER = 0.137


class NumericallySingular(ArithmeticError):
    """Raised when sigma_min is below 1e-14 times the operator norm."""

    def __init__(self, message, sigma_min=0.0, vector=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.vector = vector


class UnderResolved(ValueError):
    pass


def _as_matrix(op):
    if isinstance(op, ComplexOperator):
        return op.matrix
    return op


def _norm_estimate(mat) -> float:
    if sp.issparse(mat):
        # max absolute row sum bounds the 2-norm from above, within sqrt(n) of it
        return float(abs(mat).sum(axis=1).max())
    return float(np.linalg.norm(mat, 2))


def smallest_singular(op, method: str = "auto"):
    """Smallest singular value and a unit right singular vector.

    "dense" runs a full SVD.  "sparse" factors the matrix once and finds the
    largest eigenvalue of (M^H M)^{-1} by Lanczos.
    """
    mat = _as_matrix(op)
    n = mat.shape[0]
    if mat.shape[0] != mat.shape[1]:
        raise ValueError("operator must be square")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT or not sp.issparse(mat) else "sparse"
    if method == "dense":
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        _, svals, vh = np.linalg.svd(dense)
        sigma, vec = float(svals[-1]), vh[-1].conj()
        scale = float(svals[0])
    elif method == "sparse":
        csc = sp.csc_matrix(mat, dtype=complex)
        try:
            lu = spla.splu(csc)
        except RuntimeError as exc:
            raise NumericallySingular(f"factorization failed: {exc}") from exc

        def apply(x):
            return lu.solve(lu.solve(x, trans="H"))

        gram_inv = spla.LinearOperator((n, n), matvec=apply, dtype=complex)
        start = np.cos(np.arange(n) * 0.7) + 1.0 + 0j
        vals, vecs = spla.eigsh(gram_inv, k=1, which="LM", v0=start, tol=1e-12, maxiter=20 * n)
        top = float(vals[0].real)
        if not np.isfinite(top) or top <= 0:
            raise NumericallySingular("inverse Gram operator is not positive")
        sigma = 1.0 / math.sqrt(top)
        vec = vecs[:, 0]
        vec = lu.solve(vec)
        vec /= np.linalg.norm(vec)
        scale = _norm_estimate(csc)
    else:
        raise ValueError(f"unknown method {method!r}")
    if sigma < SINGULAR_RTOL * scale:
        raise NumericallySingular(
            f"sigma_min={sigma:.3e} below {SINGULAR_RTOL:g} * ||op||", sigma_min=sigma, vector=vec
        )
    return sigma, vec


def resolvent_norm(op, method: str = "auto") -> float:
    """1 / sigma_min(op): the discrete L2 -> L2 norm of the inverse."""
    sigma, _ = smallest_singular(op, method)
    return 1.0 / sigma


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    fit_residual: float
    window: tuple
    n: int


@dataclass
class SweepRecord:
    parameter: str
    samples: list
    fit: Optional[Fit] = None
    meta: dict = field(default_factory=dict)
    singular: list = field(default_factory=list)

    def arrays(self):
        arr = np.array(self.samples, dtype=float).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]


def fit_loglog(x, y, window=None) -> Fit:
    """Ordinary least squares of log y on log x; fit_residual is the RMS residual."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is None:
        window = (float(x.min()), float(x.max()))
    lo, hi = window
    keep = (x >= lo) & (x <= hi)
    if keep.sum() < 5:
        raise ValueError(f"need at least 5 samples in window {window}, got {int(keep.sum())}")
    if np.any(y[keep] <= 0) or np.any(x[keep] <= 0):
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ np.array([slope, intercept])
    return Fit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))), (float(lo), float(hi)), int(keep.sum()))


def fit_exponent(record: SweepRecord, window=None) -> Fit:
    x, y = record.arrays()
    return fit_loglog(x, y, window)


def geometric_lambdas(lo: float, hi: float, per_decade: int = 24, jitter: float = JITTER) -> np.ndarray:
    count = int(math.floor(per_decade * math.log10(hi / lo) + 1e-9)) + 1
    return lo * 10.0 ** (np.arange(count) / per_decade) + jitter


def layer_width(lam: float, beta: float) -> float:
    """Width lam**(-1/(2+beta)) of the boundary layer at the damping edge."""
    return abs(lam) ** (-1.0 / (2.0 + beta))


def check_wave_resolution(grid: Grid, lam_max: float):
    if grid.dx * lam_max > 0.5:
        raise UnderResolved(f"dx*lambda_max = {grid.dx * lam_max:.3f} exceeds 1/2; refine the grid")


def check_layer_resolution(grid: Grid, spec: DampingSpec, lam_max: float):
    beta = predict_rates(spec).beta if not spec.is_empty else 0.0
    width = layer_width(lam_max, beta)
    if grid.dx > width / 2:
        raise UnderResolved(f"dx = {grid.dx:.4g} exceeds half the boundary layer width {width:.4g}")


def _norm_or_flag(args):
    spec, n, lam, mu2, method = args
    grid = circle_grid(n)
    try:
        return resolvent_norm(assemble_P(grid, spec, lam, mu2), method)
    except NumericallySingular:
        return None


def _parallel_map(func, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _finish(record: SweepRecord, values, lams, window=None) -> SweepRecord:
    for lam, val in sorted(zip(lams, values), key=lambda t: t[0]):
        if val is None:
            record.singular.append(float(lam))
        else:
            record.samples.append((float(lam), float(val)))
    if len(record.samples) >= 5:
        record.fit = fit_exponent(record, window)
    return record


def sweep_1d(
    spec: DampingSpec,
    lams: Sequence[float],
    n: int,
    lam_min: float = 5.0,
    workers: int = 1,
    method: str = "auto",
) -> SweepRecord:
    """lambda -> ||P_lambda^{-1}|| on the circle with mu2 = lambda**2."""
    lams = sorted(float(v) for v in lams)
    if lams[0] < lam_min:
        raise ValueError(f"lambda values must be >= {lam_min}")
    grid = circle_grid(n)
    check_wave_resolution(grid, lams[-1])
    values = _parallel_map(_norm_or_flag, [(spec, n, lam, lam * lam, method) for lam in lams], workers)
    record = SweepRecord("lambda", [], meta={"n": n, "spec_hash": spec.spec_hash(), "kind": "circle"})
    return _finish(record, values, lams)


@dataclass(frozen=True)
class TorusResolvent:
    norm: float
    mode: int
    modal: tuple  # (mode, norm) pairs; singular modes are skipped


def default_mode_cutoff(lam: float) -> int:
    return int(math.ceil(abs(lam))) + 5


def torus_resolvent(
    spec: DampingSpec,
    lam: float,
    n_modes: Optional[int] = None,
    n: int = 512,
    method: str = "auto",
) -> float:
    """max over y-modes m in [0, n_modes] of ||P^{-1}|| with mu2 = lam**2 - m**2."""
    return torus_modal_norms(spec, lam, n_modes, n, method).norm


def torus_modal_norms(
    spec: DampingSpec,
    lam: float,
    n_modes: Optional[int] = None,
    n: int = 512,
    method: str = "auto",
) -> TorusResolvent:
    """Per-mode resolvent norms on the torus and the maximizing mode."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if n_modes is None:
        n_modes = default_mode_cutoff(lam)
    if n_modes < default_mode_cutoff(lam):
        raise ValueError(f"n_modes must be at least ceil(lambda)+5 = {default_mode_cutoff(lam)}")
    grid = circle_grid(n)
    w = damping_on_grid(spec, grid)
    lap = laplacian_matrix(grid)
    base = (lap - 1j * lam * sp.diags(w)).tocsr()
    eye = sp.identity(n, format="csr")
    modal = []
    for m in range(n_modes + 1):
        modal.append((m, resolvent_norm(base - (lam * lam - m * m) * eye, method)))
    best = max(modal, key=lambda t: t[1])
    return TorusResolvent(norm=best[1], mode=best[0], modal=tuple(modal))


def peak_mu2(spec: DampingSpec, lam: float, n: int, candidates: int = 8):
    """Locate the maximum of mu2 -> ||(L - i lam W - mu2)^{-1}|| over mu2 <= lam**2.

    The peak sits next to a low eigenvalue E of L - i lam W (at mu2 ~ Re E,
    height ~ 1/|Im E|); the few eigenvalues nearest the origin are refined
    by a bounded scalar search.
    """
    grid = circle_grid(n)
    w = damping_on_grid(spec, grid)
    base = (laplacian_matrix(grid) - 1j * lam * sp.diags(w)).tocsc()
    eye = sp.identity(n, format="csc")
    k = min(candidates, n - 2)
    start = np.cos(np.arange(n) * 0.3) + 1.0 + 0j
    evals = spla.eigs(base, k=k, sigma=0.0, which="LM", v0=start, return_eigenvectors=False)
    evals = evals[(evals.real > -1.0) & (evals.real <= lam * lam)]
    if evals.size == 0:
        raise ValueError("no eigenvalue of L - i*lam*W below lam**2")

    def neg_norm(mu2):
        try:
            return -resolvent_norm(base - mu2 * eye, "sparse")
        except NumericallySingular:
            return -np.inf

    best = (-np.inf, None)
    for e in evals:
        width = max(abs(e.imag), 1e-8)
        lo, hi = e.real - 3 * width, min(e.real + 3 * width, lam * lam)
        res = minimize_scalar(neg_norm, bounds=(lo, hi), method="bounded", options={"xatol": width * 1e-4})
        if -res.fun > best[0]:
            best = (-res.fun, float(res.x))
    return best[1], best[0]


def resonant_lambda(spec: DampingSpec, lam0: float, n: int, iterations: int = 2) -> float:
    """Move lam0 to the nearby frequency where some integer mode m has lam**2 - m**2 = peak mu2."""
    lam = lam0
    mu2, _ = peak_mu2(spec, lam, n)
    m = int(round(math.sqrt(max(lam0 * lam0 - mu2, 0.0))))
    for _ in range(iterations):
        lam = math.sqrt(m * m + mu2)
        mu2, _ = peak_mu2(spec, lam, n)
    return math.sqrt(m * m + mu2)


def _torus_task(args):
    spec, lam, n, method = args
    return torus_modal_norms(spec, lam, n=n, method=method)


def _resonant_task(args):
    spec, lam0, n = args
    return resonant_lambda(spec, lam0, n)


def sweep_torus(
    spec: DampingSpec,
    lams: Sequence[float],
    n: int,
    sampling: str = "resonant",
    workers: int = 1,
    method: str = "auto",
) -> SweepRecord:
    """lambda -> torus resolvent norm.

    The torus norm is a spiky function of lambda: it peaks when some integer
    mode m puts lam**2 - m**2 on the one-dimensional resonance.  With
    sampling="resonant" every nominal lambda is shifted to the nearest such
    peak, so the fit follows the upper envelope; "given" uses lams as is.
    """
    lams = sorted(float(v) for v in lams)
    if lams[0] <= 0:
        raise ValueError("lambda values must be positive")
    grid = circle_grid(n)
    check_layer_resolution(grid, spec, max(lams))
    if sampling == "resonant":
        lams = _parallel_map(_resonant_task, [(spec, lam, n) for lam in lams], workers)
        lams = sorted(set(round(v, 12) for v in lams))
    elif sampling != "given":
        raise ValueError(f"unknown sampling {sampling!r}")
    results = _parallel_map(_torus_task, [(spec, lam, n, method) for lam in lams], workers)
    record = SweepRecord(
        "lambda",
        [],
        meta={
            "n": n,
            "spec_hash": spec.spec_hash(),
            "kind": "torus",
            "sampling": sampling,
            "modes": {f"{lam:.12g}": r.mode for lam, r in zip(lams, results)},
        },
    )
    return _finish(record, [r.norm for r in results], lams)


@dataclass(frozen=True)
class CrosscheckReport:
    lam: float
    lhs: float
    lower_bound: float
    rhs_bound: float
    slack: float
    lower_holds: bool
    upper_holds: bool


def _inverse_norm_into_h1(p_dense: np.ndarray, inv_weight: np.ndarray) -> float:
    # ||G P^{-1}|| = 1 / sigma_min(P G^{-1})
    return 1.0 / sla.svdvals(p_dense @ inv_weight)[-1]


def a_resolvent_crosscheck(
    spec,
    lam: float,
    n: int = 256,
    slack: float = 10.0,
    constant: float = 1.0,
) -> CrosscheckReport:
    """Compare ||(A + i lam)^{-1}|| on H1 x L2 with bounds built from P_lambda.

    The H1 norm is the flat Fourier one, ||(1 + k^2)^{1/2} u_hat||.  The
    upper bound's unknown constant is set to ``constant`` and absorbed by
    ``slack``.
    """
    if lam == 0 or not np.isreal(lam):
        raise ValueError("lambda must be real and nonzero")
    lam = float(lam)
    grid = circle_grid(n)
    weight = fourier_multiplier_matrix(grid, 1.0)
    inv_weight = fourier_multiplier_matrix(grid, -1.0)
    gen = assemble_A(grid, spec).dense() + 1j * lam * np.eye(2 * n)
    sim = np.block([[weight, np.zeros((n, n))], [np.zeros((n, n)), np.eye(n)]])
    sim_inv = np.block([[inv_weight, np.zeros((n, n))], [np.zeros((n, n)), np.eye(n)]])
    lhs = 1.0 / sla.svdvals(sim @ gen @ sim_inv)[-1]
    p_plus = assemble_P(grid, spec, lam).dense()
    p_minus = assemble_P(grid, spec, -lam).dense()
    plus_l2 = resolvent_norm(p_plus, "dense")
    plus_h1 = _inverse_norm_into_h1(p_plus, inv_weight)
    minus_h1 = _inverse_norm_into_h1(p_minus, inv_weight)
    japanese = math.sqrt(1.0 + lam * lam)
    a = abs(lam)
    rhs = a * plus_l2 + plus_h1 + (1.0 + constant * japanese / a) * minus_h1 + constant / a
    lower = a * plus_l2
    return CrosscheckReport(
        lam=lam,
        lhs=float(lhs),
        lower_bound=float(lower),
        rhs_bound=float(rhs),
        slack=slack,
        lower_holds=bool(lower <= lhs * (1 + 1e-10)),
        upper_holds=bool(lhs <= rhs * (1 + slack)),
    )
