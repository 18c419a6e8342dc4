"""Sample covariance, D-trace precision estimation, and divergence scoring.

Both the target-only and the transferred estimates minimize the same composite
objective

    0.5 * tr(Theta' Sigma Theta) - tr(M' Theta) + lam * ||Theta||_{1,off}

with M = I for the target-only estimate and M = Delta + I for the transferred
one, where Delta is the (soft-thresholded) divergence of the selected
auxiliary domain. The smooth part has gradient Sigma @ Theta - M and Lipschitz
constant L = lambda_max(Sigma), so proximal gradient with fixed step 1/L is
monotone; off-diagonal entries are soft-thresholded each step and the diagonal
is left unpenalized.

The iterates are deliberately not symmetrized: the objective decouples over
columns, so column j of the solution is node j's own penalized whitening
regression, while row j collects the entries the other columns estimated
about j. The two reads carry different information and downstream code picks
per use (regressions read columns, the residual screen reads rows).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneratePrecision,
    EmptySubset,
    InvalidData,
    NoAuxiliaryDomains,
    ShapeError,
    SolverDiverged,
    TooFewSamples,
)

# Diagonal entries below this floor are clamped before any division.
DIAG_FLOOR = 1e-8

PROVENANCE_TARGET = "target-only"
PROVENANCE_TRANSFER = "transferred"


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 10_000
    rel_tol: float = 1e-7
    power_iter: int = 200
    power_tol: float = 1e-10
    keep_trace: bool = False


@dataclass
class SampleMatrix:
    """Centered n x p observation matrix (rows = observations)."""

    values: np.ndarray
    centered: bool = False

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass
class PrecisionEstimate:
    """Estimated precision over an ordered index subset.

    provenance is "target-only" or "transferred"; source holds the auxiliary
    domain index for transferred estimates. n_clamped counts diagonal entries
    that had to be lifted to the jitter floor.
    """

    indices: np.ndarray
    theta: np.ndarray
    provenance: str
    source: int | None = None
    n_clamped: int = 0
    trace: list[float] | None = None
    iterations: int = 0

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int)
        k = self.indices.size
        if self.theta.shape != (k, k):
            raise ShapeError(f"theta shape {self.theta.shape} does not match |S| = {k}")

    def local_index(self, j: int) -> int:
        pos = np.nonzero(self.indices == j)[0]
        if pos.size != 1:
            raise ShapeError(f"node {j} not in index subset")
        return int(pos[0])


@dataclass
class DivergenceMatrix:
    delta: np.ndarray
    norm_score: float | None = None

    def __post_init__(self):
        if self.norm_score is None:
            self.norm_score = divergence_norm_score(self.delta)


def divergence_norm_score(delta: np.ndarray) -> float:
    """Max column absolute sum plus max row absolute sum."""
    a = np.abs(np.asarray(delta, dtype=float))
    if a.size == 0:
        return 0.0
    return float(a.sum(axis=0).max() + a.sum(axis=1).max())


def center_columns(raw) -> SampleMatrix:
    """Subtract each column mean; the SEM convention assumes zero-mean nodes."""
    values = np.array(raw, dtype=float)
    if values.ndim != 2:
        raise ShapeError(f"expected an n x p matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidData("input matrix contains non-finite entries")
    if values.shape[0] < 2:
        raise TooFewSamples(f"need at least 2 observations, got {values.shape[0]}")
    values -= values.mean(axis=0)
    return SampleMatrix(values=values, centered=True)


def sample_covariance(x: SampleMatrix, subset=None) -> np.ndarray:
    """Sigma_hat = X'X / n restricted to the subset; divisor is n, not n-1."""
    if not x.centered:
        raise InvalidData("sample_covariance requires centered data")
    if subset is None:
        v = x.values
    else:
        subset = np.asarray(subset, dtype=int)
        if subset.size == 0:
            raise EmptySubset("empty index subset")
        v = x.values[:, subset]
    sigma = v.T @ v / x.n
    return 0.5 * (sigma + sigma.T)


def _lipschitz(sigma: np.ndarray, opts: SolverOptions, v0: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    If the iteration cap is hit before the Rayleigh quotient settles, the max
    absolute row sum is returned instead: it always dominates the spectral
    radius, so the step size stays valid.
    """
    k = sigma.shape[0]
    if v0 is None or v0.shape != (k,):
        v = np.ones(k) / np.sqrt(k)
    else:
        v = v0 / np.linalg.norm(v0)
    lam = 0.0
    for _ in range(opts.power_iter):
        w = sigma @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, v
        v_new = w / norm
        lam_new = float(v_new @ (sigma @ v_new))
        if abs(lam_new - lam) <= opts.power_tol * max(abs(lam_new), 1.0):
            return lam_new, v_new
        lam, v = lam_new, v_new
    return float(np.abs(sigma).sum(axis=1).max()), v


def _soft_threshold(a: np.ndarray, t: float) -> np.ndarray:
    return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)


def _dtrace_objective(theta: np.ndarray, sigma: np.ndarray, m_lin: np.ndarray, lam: float) -> float:
    quad = 0.5 * float(np.tensordot(theta, sigma @ theta))
    lin = float(np.tensordot(m_lin, theta))
    off_l1 = float(np.abs(theta).sum() - np.abs(np.diag(theta)).sum())
    return quad - lin + lam * off_l1


def solve_dtrace(
    sigma: np.ndarray,
    m_lin: np.ndarray,
    lam: float,
    opts: SolverOptions = SolverOptions(),
    warm: np.ndarray | None = None,
) -> tuple[np.ndarray, list[float] | None, int]:
    """Proximal gradient on the D-trace objective with fixed step 1/L.

    Stops when the relative objective change drops below opts.rel_tol; raises
    SolverDiverged (carrying the last iterate and gap) if the budget runs out.
    """
    sigma = np.asarray(sigma, dtype=float)
    k = sigma.shape[0]
    if sigma.shape != (k, k) or m_lin.shape != (k, k):
        raise ShapeError(f"conformability failure: sigma {sigma.shape}, linear term {m_lin.shape}")
    lip, _ = _lipschitz(sigma, opts)
    if lip <= 0.0:
        raise ShapeError("covariance has no positive eigenvalue; cannot set a step size")
    step = 1.0 / lip
    if warm is not None and warm.shape == (k, k):
        theta = warm.copy()
    else:
        diag = np.clip(np.diag(sigma), DIAG_FLOOR, None)
        theta = np.diag(1.0 / diag)
    obj = _dtrace_objective(theta, sigma, m_lin, lam)
    trace = [obj] if opts.keep_trace else None
    thr = step * lam
    gap = np.inf
    shrinks = 0
    for it in range(1, opts.max_iter + 1):
        grad = sigma @ theta - m_lin
        cand = theta - step * grad
        diag = np.diag(cand).copy()
        cand = _soft_threshold(cand, thr)
        np.fill_diagonal(cand, diag)
        new_obj = _dtrace_objective(cand, sigma, m_lin, lam)
        if not np.isfinite(new_obj) or new_obj > obj + 1e-12 * max(abs(obj), 1.0):
            # ascent means the curvature estimate undershot; halve and retry
            if shrinks >= 60:
                raise SolverDiverged(
                    f"objective not descending after {shrinks} step reductions",
                    last_iterate=theta,
                    gap=gap,
                )
            step *= 0.5
            thr = step * lam
            shrinks += 1
            continue
        theta = cand
        if trace is not None:
            trace.append(new_obj)
        gap = abs(obj - new_obj) / max(abs(obj), 1e-12)
        obj = new_obj
        if gap < opts.rel_tol:
            return theta, trace, it
    raise SolverDiverged(
        f"no convergence after {opts.max_iter} iterations (relative gap {gap:g})",
        last_iterate=theta,
        gap=gap,
    )


def _clamp_diagonal(theta: np.ndarray) -> tuple[np.ndarray, int]:
    d = np.diag(theta)
    below = d < DIAG_FLOOR
    if below.any():
        theta = theta.copy()
        np.fill_diagonal(theta, np.where(below, DIAG_FLOOR, d))
    return theta, int(below.sum())


def estimate_precision_from_cov(
    sigma: np.ndarray,
    lam: float,
    opts: SolverOptions = SolverOptions(),
    indices=None,
    warm: np.ndarray | None = None,
) -> PrecisionEstimate:
    """Target-only-style D-trace estimate for an already-computed covariance."""
    if lam < 0:
        raise ValueError(f"penalty must be nonnegative, got {lam}")
    k = sigma.shape[0]
    theta, trace, iters = solve_dtrace(sigma, np.eye(k), lam, opts, warm=warm)
    theta, n_clamped = _clamp_diagonal(theta)
    if indices is None:
        indices = np.arange(k)
    return PrecisionEstimate(
        indices=np.asarray(indices, dtype=int),
        theta=theta,
        provenance=PROVENANCE_TARGET,
        n_clamped=n_clamped,
        trace=trace,
        iterations=iters,
    )


def estimate_precision_target(
    x: SampleMatrix,
    subset,
    lam: float,
    opts: SolverOptions = SolverOptions(),
) -> PrecisionEstimate:
    """D-trace estimate of the precision of x restricted to the subset."""
    subset = np.arange(x.p) if subset is None else np.asarray(subset, dtype=int)
    sigma = sample_covariance(x, subset)
    return estimate_precision_from_cov(sigma, lam, opts, indices=subset)


def divergence_matrix(theta, sigma_aux: np.ndarray) -> DivergenceMatrix:
    """Delta = Theta @ Sigma_aux - I with its combined row/column norm score."""
    th = theta.theta if isinstance(theta, PrecisionEstimate) else np.asarray(theta, dtype=float)
    sigma_aux = np.asarray(sigma_aux, dtype=float)
    if th.shape[1] != sigma_aux.shape[0] or th.shape[0] != sigma_aux.shape[1]:
        raise ShapeError(f"conformability failure: {th.shape} vs {sigma_aux.shape}")
    delta = th @ sigma_aux - np.eye(th.shape[0])
    return DivergenceMatrix(delta=delta)


def select_parameter_informative(theta0, aux_covs) -> int:
    """Index of the auxiliary covariance with the smallest divergence norm score.

    Ties break toward the lowest domain index.
    """
    if len(aux_covs) == 0:
        raise NoAuxiliaryDomains("no auxiliary covariance matrices supplied")
    scores = [divergence_matrix(theta0, s).norm_score for s in aux_covs]
    return int(np.argmin(scores))


def soft_threshold_delta(delta_hat: DivergenceMatrix, lam1: float) -> DivergenceMatrix:
    """Entrywise soft threshold of the divergence, the closed-form minimizer of
    0.5*tr(D'D) - tr(Dhat'D) + lam1*||D||_1 (all entries penalized)."""
    if lam1 < 0:
        raise ValueError(f"penalty must be nonnegative, got {lam1}")
    return DivergenceMatrix(delta=_soft_threshold(delta_hat.delta, lam1))


def estimate_precision_transfer(
    sigma_aux: np.ndarray,
    delta: DivergenceMatrix,
    lam2: float,
    opts: SolverOptions = SolverOptions(),
    indices=None,
    source: int | None = None,
    warm: np.ndarray | None = None,
) -> PrecisionEstimate:
    """D-trace solve on the auxiliary covariance with linear term Delta + I."""
    if lam2 < 0:
        raise ValueError(f"penalty must be nonnegative, got {lam2}")
    sigma_aux = np.asarray(sigma_aux, dtype=float)
    k = sigma_aux.shape[0]
    if sigma_aux.shape != (k, k):
        raise ShapeError(f"covariance must be square, got {sigma_aux.shape}")
    if np.max(np.abs(sigma_aux - sigma_aux.T)) > 1e-8:
        raise ShapeError("auxiliary covariance is not symmetric within 1e-8")
    # The divergence satisfies theta_target = (delta + I) @ inv(sigma_aux), an
    # inversion from the right; the solver's stationarity sigma @ theta = m
    # inverts from the left. Because the population theta and sigma are both
    # symmetric the same target equals inv(sigma_aux) @ (delta + I)^T, so
    # transposing the correction alone keeps the solver's column orientation,
    # where each column is that variable's own penalized regression.
    m_lin = delta.delta.T + np.eye(k)
    theta, trace, iters = solve_dtrace(sigma_aux, m_lin, lam2, opts, warm=warm)
    theta, n_clamped = _clamp_diagonal(theta)
    if indices is None:
        indices = np.arange(k)
    return PrecisionEstimate(
        indices=np.asarray(indices, dtype=int),
        theta=theta,
        provenance=PROVENANCE_TRANSFER,
        source=source,
        n_clamped=n_clamped,
        trace=trace,
        iterations=iters,
    )


def residual_matrix(values: np.ndarray, est: PrecisionEstimate) -> np.ndarray:
    """All expected residuals at once: column j is X_S theta_{j.}^T / theta_{jj}.

    This is the row read of the estimate: entry (j, l) was produced inside
    column l's regression, so the residual for j aggregates what every other
    node's regression learned about j. With a symmetric estimate it coincides
    with residual_vector; the independence screen in the engine relies on the
    row read because it is the more sensitive one for non-sinks.
    """
    theta = est.theta
    d = np.clip(np.diag(theta), DIAG_FLOOR, None)
    return values @ (theta.T / d[None, :])


def residual_vector(x_s, est: PrecisionEstimate, j: int) -> np.ndarray:
    """Expected residual of node j given the subset: X_S theta_{.j} / theta_{jj}.

    x_s may be a SampleMatrix restricted to the subset or a plain n x |S| array
    whose column order matches est.indices; j is the global node id.
    """
    values = x_s.values if isinstance(x_s, SampleMatrix) else np.asarray(x_s, dtype=float)
    pos = est.local_index(j)
    if values.shape[1] != est.indices.size:
        raise ShapeError(f"data has {values.shape[1]} columns but subset has {est.indices.size}")
    djj = est.theta[pos, pos]
    if djj < DIAG_FLOOR:
        raise DegeneratePrecision(f"theta[{j},{j}] = {djj:g} is below the {DIAG_FLOOR:g} floor")
    return values @ est.theta[:, pos] / djj


def symmetric_support_view(theta: np.ndarray) -> np.ndarray:
    """Per unordered pair, keep the smaller-magnitude entry (conservative support)."""
    mags = np.abs(theta)
    keep = np.minimum(mags, mags.T)
    return np.sign(theta) * keep
