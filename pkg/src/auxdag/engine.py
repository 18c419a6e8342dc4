"""Bottom-up layer reconstruction driver with optional auxiliary-domain transfer.

The driver peels one layer per round: estimate the precision of the remaining
suffix, test every remaining node's expected residual for independence from the
other remaining variables, collect the accepted nodes as the next layer, then
read their parents and coefficients off the precision matrix. The three modes
differ only in which data the tests and the precision estimate draw on:

* single: target data everywhere.
* global: one auxiliary domain is picked once by divergence score and supplies
  every independence test; the per-layer precision is the transferred estimate.
* local: every auxiliary domain is swept per layer, each node picks the domain
  whose strongest dependence signal is closest to the target's, and that
  domain's test decides the node (optionally a thresholded majority vote).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .dcov import DistanceMatrixCache, normal_quantile_threshold, sweep_grid
from .errors import DegeneratePrecision, EmptySubset, NoAuxiliaryDomains
from .precision import (
    DIAG_FLOOR,
    PrecisionEstimate,
    SampleMatrix,
    SolverOptions,
    center_columns,
    divergence_matrix,
    estimate_precision_from_cov,
    estimate_precision_transfer,
    residual_matrix,
    soft_threshold_delta,
    symmetric_support_view,
)
from .similarity import LayerPartition

MODES = ("single", "global", "local")

PROVENANCE_ORACLE = "oracle"


@dataclass(frozen=True)
class TransferConfig:
    """Fitting options; penalty constants scale as c * sqrt(log p / sample size)."""

    mode: str = "single"
    alpha: float = 0.01
    c0: float = 0.5
    c1: float = 0.5
    c2: float = 0.5
    c_aux: float | None = None
    lambda0: float | None = None
    lambda1: float | None = None
    lambda2: float | None = None
    xi: float | None = None
    voting: bool = False
    h_param: float | None = None
    support_tol: float = 1e-6
    solver: SolverOptions = field(default_factory=SolverOptions)
    seed: int | None = None
    sweep_dtype: str = "float32"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        for name in ("c0", "c1", "c2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.c_aux is not None and self.c_aux < 0:
            raise ValueError(f"c_aux must be nonnegative when set, got {self.c_aux}")
        for name in ("lambda0", "lambda1", "lambda2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative when set")
        if self.xi is not None and self.xi < 0:
            raise ValueError(f"xi must be nonnegative when set, got {self.xi}")
        if self.h_param is not None and self.h_param <= 0:
            raise ValueError(f"h_param must be positive when set, got {self.h_param}")
        if self.support_tol < 0:
            raise ValueError(f"support_tol must be nonnegative, got {self.support_tol}")
        if self.sweep_dtype not in ("float32", "float64"):
            raise ValueError(f"sweep_dtype must be float32 or float64, got {self.sweep_dtype!r}")

    # ---- effective penalties ----
    def lam_target(self, p: int, n: int) -> float:
        if self.lambda0 is not None:
            return self.lambda0
        return self.c0 * math.sqrt(math.log(p) / n)

    def lam_aux(self, p: int, n_k: int) -> float:
        """Penalty for an auxiliary domain's own estimate at its sample size.

        The larger auxiliary samples tolerate (and reward) a lighter penalty
        than the target fit, so the constant can be set separately; it falls
        back to c0 when c_aux is unset.
        """
        if self.lambda0 is not None:
            return self.lambda0
        c = self.c0 if self.c_aux is None else self.c_aux
        return c * math.sqrt(math.log(p) / n_k)

    def lam_shrink(self, p: int, n_tilde: int) -> float:
        if self.lambda1 is not None:
            return self.lambda1
        return self.c1 * math.sqrt(math.log(p) / n_tilde)

    def lam_refit(self, p: int, n_tilde: int, n: int) -> float:
        if self.lambda2 is not None:
            return self.lambda2
        return self.c2 * math.sqrt(math.log(p) / (n_tilde + n))

    @staticmethod
    def default_xi(p: int, n: int) -> float:
        return math.sqrt(math.log(p) / n)


@dataclass
class MultiDomainDataset:
    """Centered target samples plus any number of auxiliary domains, same p."""

    target: SampleMatrix
    aux: tuple[SampleMatrix, ...] = ()

    def __post_init__(self):
        self.aux = tuple(self.aux)
        for k, a in enumerate(self.aux):
            if a.p != self.target.p:
                raise EmptySubset(
                    f"auxiliary domain {k} has p={a.p}, target has p={self.target.p}"
                )

    @classmethod
    def from_arrays(cls, target, aux=()) -> "MultiDomainDataset":
        return cls(target=center_columns(target), aux=tuple(center_columns(a) for a in aux))

    @property
    def p(self) -> int:
        return self.target.p

    @property
    def n(self) -> int:
        return self.target.n

    @property
    def n_aux(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.aux)

    @property
    def n_tilde(self) -> int:
        if not self.aux:
            raise NoAuxiliaryDomains("no auxiliary domains present")
        return min(self.n_aux)


@dataclass(frozen=True)
class OracleHooks:
    """Test-injection points: exact precision per subset and/or exact layer calls.

    precision(subset) returns the true precision of the subset's marginal;
    accept(j, subset) returns whether node j belongs to the current bottom layer.
    """

    precision: Callable[[np.ndarray], np.ndarray] | None = None
    accept: Callable[[int, np.ndarray], bool] | None = None


class SweepStats(NamedTuple):
    max_dcov: np.ndarray
    max_scaled: np.ndarray
    argmax: np.ndarray
    n_skipped: int
    threshold: float


class LayerTestResult(NamedTuple):
    nodes: tuple[int, ...]
    stats: SweepStats


class Selection(NamedTuple):
    domains: tuple[int, ...]
    gap: float | None
    fallback: bool


@dataclass
class NodeDecision:
    node: int
    source: str  # "target" | "aux" | "vote" | "oracle" | "trivial"
    domains: tuple[int, ...]
    gap: float | None
    statistic: float
    threshold: float
    accepted: bool
    votes_for: int = 0
    votes_total: int = 0


@dataclass
class LayerRecord:
    index: int
    nodes: tuple[int, ...]
    accepted: tuple[int, ...]
    precision_provenance: str
    precision_domain: int | None
    divergence_score: float | None
    forced_node: int | None
    degenerate_pairs: int
    decisions: tuple[NodeDecision, ...]


@dataclass
class Diagnostics:
    mode: str
    global_domain: int | None = None
    global_score: float | None = None
    layers: list[LayerRecord] = field(default_factory=list)
    clamped_diagonals: int = 0
    solver_iterations: int = 0
    forced_nodes: int = 0
    fallback_decisions: int = 0
    aux_decisions: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def fallback_fraction(self) -> float:
        """Share of per-node local decisions the safeguard sent back to target data."""
        total = self.fallback_decisions + self.aux_decisions
        return self.fallback_decisions / total if total else 0.0

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return _jsonable(asdict(self) | {"fallback_fraction": self.fallback_fraction})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


@dataclass
class DagEstimate:
    layers: LayerPartition
    b_hat: np.ndarray
    parent_sets: tuple[tuple[int, ...], ...]
    diagnostics: Diagnostics

    def edges(self) -> list[tuple[int, int, float]]:
        """(parent, child, weight) triples sorted by child then parent."""
        out = []
        for child in range(self.b_hat.shape[0]):
            for parent in self.parent_sets[child]:
                out.append((parent, child, float(self.b_hat[child, parent])))
        return sorted(out, key=lambda e: (e[1], e[0]))


# ==== per-layer test machinery ====


def _trivial_stats(alpha: float) -> SweepStats:
    return SweepStats(
        max_dcov=np.zeros(1),
        max_scaled=np.zeros(1),
        argmax=np.array([-1]),
        n_skipped=0,
        threshold=normal_quantile_threshold(alpha),
    )


def _layer_test(
    values_s: np.ndarray,
    theta_s: PrecisionEstimate,
    m: int,
    alpha: float,
    dtype=np.float64,
    cand_cache: DistanceMatrixCache | None = None,
    cand_subset: np.ndarray | None = None,
) -> LayerTestResult:
    indices = theta_s.indices
    if indices.size == 1:
        return LayerTestResult(nodes=(int(indices[0]),), stats=_trivial_stats(alpha))
    resid = residual_matrix(values_s, theta_s)
    resid_cache = DistanceMatrixCache.from_matrix(resid, dtype=dtype)
    if cand_cache is None:
        cand_cache = DistanceMatrixCache.from_matrix(values_s, dtype=dtype)
    excl = [(i, i) for i in range(indices.size)]
    stats = SweepStats(
        *sweep_grid(resid_cache, cand_cache, m, alpha, exclude_pairs=excl, cand_subset=cand_subset)
    )
    accepted = tuple(int(indices[i]) for i in np.flatnonzero(stats.max_scaled <= stats.threshold))
    return LayerTestResult(nodes=accepted, stats=stats)


def construct_layer_single(x_s, theta_s: PrecisionEstimate, alpha: float) -> LayerTestResult:
    """Bottom-layer candidates from target data only: a node is kept when the
    scaled dependence statistic of its expected residual against every other
    remaining variable stays below the quantile threshold."""
    values = x_s.values if isinstance(x_s, SampleMatrix) else np.asarray(x_s, dtype=float)
    return _layer_test(values, theta_s, values.shape[0], alpha)


def construct_layer_global(x_aux_s, theta_aux_s: PrecisionEstimate, alpha: float) -> LayerTestResult:
    """Same residual-independence screen, run entirely on the chosen auxiliary
    domain's samples and its own precision estimate (scaled by its sample size)."""
    values = x_aux_s.values if isinstance(x_aux_s, SampleMatrix) else np.asarray(x_aux_s, dtype=float)
    return _layer_test(values, theta_aux_s, values.shape[0], alpha)


def select_node_informative(
    j: int,
    target_max_dcov: float,
    aux_max_dcovs: Sequence[float],
    xi: float | None,
    voting: bool,
) -> Selection:
    """Pick the auxiliary domain(s) whose strongest dependence signal over the
    remaining variables is closest to the target's for this node.

    Without voting: the argmin-gap domain, demoted to a target-only fallback
    when xi is set and even the best gap exceeds it. With voting: all domains
    within xi (fallback when none qualify). Ties break to the lowest index.
    """
    gaps = np.abs(np.asarray(aux_max_dcovs, dtype=float) - float(target_max_dcov))
    if gaps.size == 0:
        raise NoAuxiliaryDomains(f"no auxiliary statistics supplied for node {j}")
    if voting:
        if xi is None:
            raise ValueError("voting requires a gap threshold")
        members = tuple(int(k) for k in np.flatnonzero(gaps <= xi))
        if not members:
            return Selection(domains=(), gap=float(gaps.min()), fallback=True)
        return Selection(domains=members, gap=float(gaps.min()), fallback=False)
    best = int(np.argmin(gaps))
    if xi is not None and gaps[best] > xi:
        return Selection(domains=(), gap=float(gaps[best]), fallback=True)
    return Selection(domains=(best,), gap=float(gaps[best]), fallback=False)


def construct_layer_local(
    nodes: np.ndarray,
    selections: Sequence[Selection],
    target_stats: SweepStats,
    aux_stats: Sequence[SweepStats],
    threshold: float,
) -> tuple[tuple[int, ...], list[NodeDecision]]:
    """Apply each node's selected domain test (or vote, or target fallback)."""
    accepted = []
    decisions: list[NodeDecision] = []
    for i, j in enumerate(int(v) for v in nodes):
        sel = selections[i]
        if sel.fallback:
            stat = float(target_stats.max_scaled[i])
            ok = stat <= threshold
            decisions.append(
                NodeDecision(
                    node=j, source="target", domains=(), gap=sel.gap,
                    statistic=stat, threshold=threshold, accepted=ok,
                )
            )
        elif len(sel.domains) > 1:
            stats_k = [float(aux_stats[k].max_scaled[i]) for k in sel.domains]
            votes = sum(1 for s in stats_k if s <= threshold)
            ok = votes > len(sel.domains) / 2.0
            decisions.append(
                NodeDecision(
                    node=j, source="vote", domains=sel.domains, gap=sel.gap,
                    statistic=min(stats_k), threshold=threshold, accepted=ok,
                    votes_for=votes, votes_total=len(sel.domains),
                )
            )
        else:
            k = sel.domains[0]
            stat = float(aux_stats[k].max_scaled[i])
            ok = stat <= threshold
            decisions.append(
                NodeDecision(
                    node=j, source="aux", domains=(k,), gap=sel.gap,
                    statistic=stat, threshold=threshold, accepted=ok,
                )
            )
        if decisions[-1].accepted:
            accepted.append(j)
    return tuple(accepted), decisions


def estimate_parents(
    theta_s: PrecisionEstimate,
    a_t: Sequence[int],
    s_t: Sequence[int],
    support_tol: float = 1e-6,
    scale: np.ndarray | None = None,
) -> tuple[dict[int, tuple[int, ...]], dict[tuple[int, int], float]]:
    """Parents and coefficients of the freshly accepted nodes.

    Both are read from node j's own column of theta, i.e. from j's penalized
    whitening regression: the candidate coefficient for parent l is
    -theta_lj / theta_jj, mapped back through the per-variable scale factors
    when the caller solved on rescaled data. Support is every candidate whose
    back-transformed coefficient magnitude exceeds support_tol, so the cut is
    expressed in the units the coefficients are reported in. On a symmetric
    estimate the column read equals the row read -theta_jl / theta_jj.
    """
    s_t = np.asarray(list(s_t), dtype=int)
    candidates = np.setdiff1d(s_t, np.asarray(list(a_t), dtype=int))
    theta = theta_s.theta
    parents: dict[int, tuple[int, ...]] = {}
    betas: dict[tuple[int, int], float] = {}
    for j in a_t:
        lj = theta_s.local_index(j)
        if theta[lj, lj] <= DIAG_FLOOR:
            raise DegeneratePrecision(f"diagonal of node {j} sits at the clamp floor")
        pa = []
        for l in candidates:
            ll = theta_s.local_index(int(l))
            beta = -float(theta[ll, lj] / theta[lj, lj])
            if scale is not None:
                beta *= float(scale[j] / scale[int(l)])
            if abs(beta) > support_tol:
                pa.append(int(l))
                betas[(j, int(l))] = beta
        parents[j] = tuple(sorted(pa))
    return parents, betas


# ==== fit driver ====


def _studentize(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale each column to unit sample standard deviation (constant columns pass through)."""
    sd = values.std(axis=0)
    scale = np.where(sd > 0.0, sd, 1.0)
    return values / scale, scale


def _positions(indices: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.searchsorted(indices, s)


def _shrink_warm(prev: PrecisionEstimate | None, s: np.ndarray) -> np.ndarray | None:
    if prev is None:
        return None
    pos = _positions(prev.indices, s)
    return prev.theta[np.ix_(pos, pos)]


def _test_view(est: PrecisionEstimate) -> PrecisionEstimate:
    """Symmetric min-magnitude view of an auxiliary estimate for residual tests.

    At the auxiliary sample sizes the independence test is powerful enough to
    notice the one-sided noise the column-decoupled solver leaves in rows, and
    that noise stalls true leaves for whole extra rounds. Keeping, per pair,
    the smaller-magnitude entry removes one-sided noise while preserving (and
    sharpening, through the stronger shrinkage bias) the aggregated signal
    that exposes nodes which still have children in the suffix.
    """
    return PrecisionEstimate(
        indices=est.indices,
        theta=symmetric_support_view(est.theta),
        provenance=est.provenance,
        source=est.source,
        n_clamped=est.n_clamped,
        trace=est.trace,
        iterations=est.iterations,
    )


class _LayerPrecision(NamedTuple):
    estimate: PrecisionEstimate
    initial: PrecisionEstimate
    domain: int | None
    score: float | None
    declared: bool


def _remark_precision(
    sigma_t: np.ndarray,
    aux_sigmas_t: list[np.ndarray],
    s: np.ndarray,
    config: TransferConfig,
    p: int,
    n: int,
    n_tilde: int,
    warm0: np.ndarray | None,
    warm_tr: np.ndarray | None,
    track,
) -> _LayerPrecision:
    """Initial target-only estimate, divergence-scored domain choice, then the
    shrunken-divergence transfer refit (or the initial estimate when the best
    score misses the h_param bar).

    Every matrix here lives on the target's per-variable scale: the auxiliary
    covariances arrive rescaled by the target's standard deviations, so the
    population identity theta @ sigma_aux = I + divergence holds unchanged and
    the refit output feeds the same downstream reads as a target-only estimate.

    Divergences are computed from the symmetrized initial estimate. The
    column-decoupled solution carries its estimation error in rows assembled
    from many independent columns, and that error correlates with the
    covariance it multiplies; averaging with the transpose cancels enough of
    it that informative and uninformative domains separate again.
    """
    theta0 = track(
        estimate_precision_from_cov(
            sigma_t, config.lam_target(p, n), config.solver, indices=s, warm=warm0
        )
    )
    theta0_sym = (theta0.theta + theta0.theta.T) / 2.0
    divs = [divergence_matrix(theta0_sym, sig) for sig in aux_sigmas_t]
    scores = np.array([d.norm_score for d in divs])
    k = int(np.argmin(scores))
    score = float(scores[k])
    if config.h_param is not None and score > config.h_param:
        return _LayerPrecision(theta0, theta0, None, score, False)
    shrunk = soft_threshold_delta(divs[k], config.lam_shrink(p, n_tilde))
    # warm-start only from an earlier refit, never from the target estimate:
    # the proximal solver's relative-objective stop can fire before it has
    # flushed a foreign starting point's entries out of the nearly flat
    # directions, and whatever survives there ends up in the parent reads
    theta = track(
        estimate_precision_transfer(
            aux_sigmas_t[k],
            shrunk,
            config.lam_refit(p, n_tilde, n),
            config.solver,
            indices=s,
            source=k,
            warm=warm_tr,
        )
    )
    return _LayerPrecision(theta, theta0, k, score, True)


def fit(data: MultiDomainDataset, config: TransferConfig, oracle: OracleHooks | None = None) -> DagEstimate:
    """Run the full bottom-up reconstruction and return layers, B, and diagnostics.

    Every domain is studentized internally (each column scaled to unit sample
    standard deviation) so the penalties act on a correlation-scale problem;
    the returned coefficients are mapped back to the original data scale.
    """
    p, n = data.p, data.n
    mode = config.mode
    if mode in ("global", "local") and not data.aux:
        raise NoAuxiliaryDomains(f"mode {mode!r} needs at least one auxiliary domain")
    alpha = config.alpha
    threshold = normal_quantile_threshold(alpha)
    dtype = np.float32 if config.sweep_dtype == "float32" else np.float64
    diag = Diagnostics(mode=mode)

    def track(est: PrecisionEstimate) -> PrecisionEstimate:
        diag.solver_iterations += est.iterations
        diag.clamped_diagonals += est.n_clamped
        return est

    use_aux = mode in ("global", "local")
    xt, scale_t = _studentize(data.target.values)
    aux_vals: list[np.ndarray] = []
    # full-set covariances once; per-layer restrictions are plain submatrices
    sigma_target_full = xt.T @ xt / n
    sigma_target_full = (sigma_target_full + sigma_target_full.T) / 2.0
    aux_sigma_full: list[np.ndarray] = []
    # divergence scoring and the transfer refit compare every auxiliary
    # covariance against the target precision estimate, so both must sit on
    # one scale: rescale the auxiliary covariances by the target's standard
    # deviations (an exact congruence of the original-scale identity)
    aux_sigma_t_full: list[np.ndarray] = []
    if use_aux:
        d_out_t = np.outer(scale_t, scale_t)
        for a in data.aux:
            xa, _ = _studentize(a.values)
            aux_vals.append(xa)
            sig = xa.T @ xa / a.n
            aux_sigma_full.append((sig + sig.T) / 2.0)
            sig_raw = a.values.T @ a.values / a.n
            aux_sigma_t_full.append((sig_raw + sig_raw.T) / 2.0 / d_out_t)
        n_tilde = data.n_tilde

    xi_eff = config.xi
    if mode == "local" and config.voting and xi_eff is None:
        xi_eff = TransferConfig.default_xi(p, n)
        diag.notes.append(f"voting enabled without xi; using default {xi_eff!r}")

    # candidate distance caches over all p variables, reused at every layer
    target_cand_cache = None
    aux_cand_caches: dict[int, DistanceMatrixCache] = {}
    if oracle is None or oracle.accept is None:
        if mode in ("single", "local"):
            target_cand_cache = DistanceMatrixCache.from_matrix(xt, dtype=dtype)
        if mode == "local":
            for k in range(len(data.aux)):
                aux_cand_caches[k] = DistanceMatrixCache.from_matrix(aux_vals[k], dtype=dtype)

    # global mode: pick the test domain once, on the full variable set
    global_k: int | None = None
    theta0_full: PrecisionEstimate | None = None
    if mode == "global":
        theta0_full = track(
            estimate_precision_from_cov(
                sigma_target_full, config.lam_target(p, n), config.solver, indices=np.arange(p)
            )
        )
        theta0_sym = (theta0_full.theta + theta0_full.theta.T) / 2.0
        g_scores = [divergence_matrix(theta0_sym, sig).norm_score for sig in aux_sigma_t_full]
        global_k = int(np.argmin(g_scores))
        diag.global_domain = global_k
        diag.global_score = float(g_scores[global_k])
        if oracle is None or oracle.accept is None:
            aux_cand_caches[global_k] = DistanceMatrixCache.from_matrix(
                aux_vals[global_k], dtype=dtype
            )

    remaining = np.arange(p)
    layers_out: list[tuple[int, ...]] = []
    b_hat = np.zeros((p, p))
    parent_sets: list[tuple[int, ...]] = [()] * p
    prev_theta0: PrecisionEstimate | None = theta0_full
    prev_transfer: PrecisionEstimate | None = None
    prev_aux_own: dict[int, PrecisionEstimate] = {}
    t = 0

    while remaining.size > 1:
        s = remaining
        sigma_t_s = sigma_target_full[np.ix_(s, s)]
        aux_sigmas_s = [sig[np.ix_(s, s)] for sig in aux_sigma_full] if use_aux else []
        aux_sigmas_t_s = (
            [sig[np.ix_(s, s)] for sig in aux_sigma_t_full] if use_aux else []
        )

        # ---- precision of the current suffix ----
        if oracle is not None and oracle.precision is not None:
            # hook answers on the original data scale; fold the studentizing in
            d = scale_t[s]
            theta_oracle = np.asarray(oracle.precision(s), dtype=float) * np.outer(d, d)
            theta_layer = PrecisionEstimate(indices=s, theta=theta_oracle, provenance=PROVENANCE_ORACLE)
            theta_target_test = theta_layer
            layer_domain, layer_score, declared = None, None, False
        elif mode == "single":
            theta_layer = track(
                estimate_precision_from_cov(
                    sigma_t_s,
                    config.lam_target(p, n),
                    config.solver,
                    indices=s,
                    warm=_shrink_warm(prev_theta0, s),
                )
            )
            prev_theta0 = theta_layer
            theta_target_test = theta_layer
            layer_domain, layer_score, declared = None, None, False
        else:
            lp = _remark_precision(
                sigma_t_s,
                aux_sigmas_t_s,
                s,
                config,
                p,
                n,
                n_tilde,
                _shrink_warm(prev_theta0, s),
                _shrink_warm(prev_transfer, s),
                track,
            )
            theta_layer = lp.estimate
            # the domain-comparison statistics must mirror what the target's own
            # test would report, so they are computed from the target-only
            # estimate; the transfer refit serves the parent reads below
            theta_target_test = lp.initial
            prev_theta0 = lp.initial
            prev_transfer = lp.estimate if lp.declared else prev_transfer
            layer_domain, layer_score, declared = lp.domain, lp.score, lp.declared

        # ---- layer membership decisions ----
        forced_node: int | None = None
        degenerate = 0
        if oracle is not None and oracle.accept is not None:
            accepted = tuple(int(j) for j in s if oracle.accept(int(j), s))
            decisions = [
                NodeDecision(
                    node=int(j), source="oracle", domains=(), gap=None,
                    statistic=0.0, threshold=threshold, accepted=int(j) in accepted,
                )
                for j in s
            ]
        elif mode == "single":
            result = _layer_test(
                xt[:, s], _test_view(theta_layer), n, alpha, dtype,
                cand_cache=target_cand_cache, cand_subset=s,
            )
            accepted = result.nodes
            degenerate = result.stats.n_skipped
            decisions = [
                NodeDecision(
                    node=int(j), source="target", domains=(), gap=None,
                    statistic=float(result.stats.max_scaled[i]), threshold=threshold,
                    accepted=int(j) in set(accepted),
                )
                for i, j in enumerate(s)
            ]
        elif mode == "global":
            k = global_k
            theta_test = track(
                estimate_precision_from_cov(
                    aux_sigmas_s[k],
                    config.lam_aux(p, data.aux[k].n),
                    config.solver,
                    indices=s,
                    warm=_shrink_warm(prev_aux_own.get(k), s),
                )
            )
            prev_aux_own[k] = theta_test
            result = _layer_test(
                aux_vals[k][:, s], _test_view(theta_test), data.aux[k].n, alpha, dtype,
                cand_cache=aux_cand_caches.get(k), cand_subset=s,
            )
            accepted = result.nodes
            degenerate = result.stats.n_skipped
            decisions = [
                NodeDecision(
                    node=int(j), source="aux", domains=(k,), gap=None,
                    statistic=float(result.stats.max_scaled[i]), threshold=threshold,
                    accepted=int(j) in set(accepted),
                )
                for i, j in enumerate(s)
            ]
        else:  # local
            target_result = _layer_test(
                xt[:, s], _test_view(theta_target_test), n, alpha, dtype,
                cand_cache=target_cand_cache, cand_subset=s,
            )
            degenerate += target_result.stats.n_skipped
            aux_results: list[SweepStats] = []
            for k, a in enumerate(data.aux):
                theta_k = track(
                    estimate_precision_from_cov(
                        aux_sigmas_s[k],
                        config.lam_aux(p, a.n),
                        config.solver,
                        indices=s,
                        warm=_shrink_warm(prev_aux_own.get(k), s),
                    )
                )
                prev_aux_own[k] = theta_k
                res_k = _layer_test(
                    aux_vals[k][:, s], _test_view(theta_k), a.n, alpha, dtype,
                    cand_cache=aux_cand_caches[k], cand_subset=s,
                )
                aux_results.append(res_k.stats)
                degenerate += res_k.stats.n_skipped
            selections = [
                select_node_informative(
                    int(j),
                    float(target_result.stats.max_dcov[i]),
                    [st.max_dcov[i] for st in aux_results],
                    xi_eff,
                    config.voting,
                )
                for i, j in enumerate(s)
            ]
            accepted, decisions = construct_layer_local(
                s, selections, target_result.stats, aux_results, threshold
            )
            for d in decisions:
                if d.source == "target":
                    diag.fallback_decisions += 1
                else:
                    diag.aux_decisions += 1

        # ---- deadlock guard: force the node closest to acceptance ----
        if not accepted:
            best = min(decisions, key=lambda d: (d.statistic, d.node))
            best.accepted = True
            accepted = (best.node,)
            forced_node = best.node
            diag.forced_nodes += 1
            diag.notes.append(f"layer {t}: forced node {best.node} (stat {best.statistic:.4g})")

        accepted = tuple(sorted(accepted))
        rest = np.setdiff1d(s, np.asarray(accepted, dtype=int))

        # ---- parents of the accepted nodes ----
        if rest.size:
            parents, betas = estimate_parents(
                theta_layer, accepted, s, config.support_tol, scale=scale_t
            )
            for j, pa in parents.items():
                parent_sets[j] = pa
                for l in pa:
                    b_hat[j, l] = betas[(j, l)]

        diag.layers.append(
            LayerRecord(
                index=t,
                nodes=tuple(int(v) for v in s),
                accepted=accepted,
                precision_provenance=theta_layer.provenance,
                precision_domain=layer_domain,
                divergence_score=layer_score,
                forced_node=forced_node,
                degenerate_pairs=degenerate,
                decisions=tuple(decisions),
            )
        )
        layers_out.append(accepted)
        remaining = rest
        t += 1

    if remaining.size == 1:
        j = int(remaining[0])
        layers_out.append((j,))
        diag.layers.append(
            LayerRecord(
                index=t,
                nodes=(j,),
                accepted=(j,),
                precision_provenance="none",
                precision_domain=None,
                divergence_score=None,
                forced_node=None,
                degenerate_pairs=0,
                decisions=(
                    NodeDecision(
                        node=j, source="trivial", domains=(), gap=None,
                        statistic=0.0, threshold=threshold, accepted=True,
                    ),
                ),
            )
        )

    return DagEstimate(
        layers=LayerPartition(tuple(layers_out)),
        b_hat=b_hat,
        parent_sets=tuple(parent_sets),
        diagnostics=diag,
    )
