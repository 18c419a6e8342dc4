"""Benchmark generators: hub and scale-free targets, auxiliary suites, SEM sampling.

Every auxiliary DAG is emitted together with a role label (global / parameter /
node / decoy) and is checked against the similarity module before emission, so
a mislabeled graph is a generator bug (GeneratorInvariantViolation), never data.

Noise is heteroskedastic and non-Gaussian by design: node j (1-based in the
formulas) gets either uniform noise on [-(1+2j/p), 1+2j/p] or a student-t with
9 degrees of freedom scaled so its variance is (2+4j)^2/12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeneratorInvariantViolation, InvalidScenario, NotADag
from .precision import SampleMatrix, center_columns
from .similarity import (
    WeightedDag,
    is_global_informative,
    is_node_informative,
    is_parameter_informative,
    topological_layers,
)

NOISE_FAMILIES = ("uniform", "student_t9")

# Definition-1 acceptance bound used for generator self-validation, chosen from
# the measured population-score separation between the tiny-weight informative
# constructions (scores well under 1) and strong-coefficient decoys (scores in
# the tens to thousands). One order of magnitude of slack on each side.
PARAM_SCORE_BOUND = {"hub": 5.0, "scalefree": 5.0}

_MAX_REDRAWS = 50


@dataclass(frozen=True)
class NoiseSpec:
    """Per-node noise descriptor; node index j runs 1..p in the formulas."""

    family: str = "uniform"

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise InvalidScenario(f"unknown noise family {self.family!r}")

    def variances(self, p: int) -> np.ndarray:
        j = np.arange(1, p + 1, dtype=float)
        if self.family == "uniform":
            half_width = 1.0 + 2.0 * j / p
            return half_width**2 / 3.0
        return (2.0 + 4.0 * j) ** 2 / 12.0

    def sample(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        j = np.arange(1, p + 1, dtype=float)
        if self.family == "uniform":
            half_width = 1.0 + 2.0 * j / p
            return rng.uniform(-1.0, 1.0, size=(n, p)) * half_width[None, :]
        # t9 variance is 9/7; rescale to (2+4j)^2/12.
        scale = (2.0 + 4.0 * j) / math.sqrt(12.0 * 9.0 / 7.0)
        return rng.standard_t(9, size=(n, p)) * scale[None, :]


@dataclass(frozen=True)
class ScenarioSpec:
    example: str = "hub"
    case: str = "aux1"
    noise: str = "uniform"
    n: int = 100
    p: int = 100
    omega: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.example not in ("hub", "scalefree"):
            raise InvalidScenario(f"unknown example {self.example!r}")
        if self.case not in ("aux1", "aux2"):
            raise InvalidScenario(f"unknown case {self.case!r}")
        if self.noise not in NOISE_FAMILIES:
            raise InvalidScenario(f"unknown noise family {self.noise!r}")
        if self.n < 2:
            raise InvalidScenario(f"n must be at least 2, got {self.n}")
        if self.p < 4:
            raise InvalidScenario(f"p must be at least 4, got {self.p}")
        if self.omega < 1:
            raise InvalidScenario(f"omega must be at least 1, got {self.omega}")

    @property
    def aux_n(self) -> int:
        return self.omega * self.n

    def added_edge_width(self) -> float:
        """Half-width of the uniform weights on edges added to informative DAGs."""
        return 0.1 * math.sqrt(math.log(self.p) / self.n)


@dataclass(frozen=True)
class AuxLabel:
    role: str  # "global" | "parameter" | "node" | "decoy"
    nodes: tuple[int, ...] = field(default_factory=tuple)


def _draw_coefficients(rng: np.random.Generator, size) -> np.ndarray:
    """Magnitudes uniform on [0.5, 1.5] with random signs."""
    mags = rng.uniform(0.5, 1.5, size=size)
    signs = rng.choice([-1.0, 1.0], size=size)
    return mags * signs


def hub_child_count(p: int) -> int:
    return math.ceil(math.log(p) ** 2)


def gen_hub_target(p: int, rng: np.random.Generator) -> WeightedDag:
    """Two-layer hub DAG: nodes 0..2 are hubs, each with ceil((log p)^2) children."""
    if p < 4:
        raise InvalidScenario(f"hub design needs p >= 4, got {p}")
    n_children = hub_child_count(p)
    if n_children > p - 3:
        raise InvalidScenario(
            f"hub design infeasible: {n_children} children per hub but only {p - 3} non-hub nodes"
        )
    b = np.zeros((p, p))
    for hub in range(3):
        children = rng.choice(np.arange(3, p), size=n_children, replace=False)
        b[children, hub] = _draw_coefficients(rng, n_children)
    return WeightedDag(p=p, b=b)


def _ba_subdag(b: np.ndarray, nodes: np.ndarray, rng: np.random.Generator):
    """Grow one preferential-attachment sub-DAG in place over the given nodes.

    Each new node directs min(2, #existing) edges at distinct existing nodes,
    drawn with probability proportional to in-degree + 1.
    """
    q = nodes.size
    in_deg = np.zeros(q)
    for i in range(1, q):
        m = min(2, i)
        weights = in_deg[:i] + 1.0
        targets = rng.choice(i, size=m, replace=False, p=weights / weights.sum())
        b[nodes[targets], nodes[i]] = _draw_coefficients(rng, m)
        in_deg[targets] += 1.0


def gen_scalefree_target(p: int, rng: np.random.Generator) -> WeightedDag:
    """Two disjoint preferential-attachment sub-DAGs of p/2 nodes each."""
    if p % 2 != 0:
        raise InvalidScenario(f"scale-free design needs even p, got {p}")
    if p < 6:
        raise InvalidScenario(f"scale-free design needs p >= 6, got {p}")
    q = p // 2
    b = np.zeros((p, p))
    _ba_subdag(b, np.arange(0, q), rng)
    _ba_subdag(b, np.arange(q, p), rng)
    return WeightedDag(p=p, b=b)


def sample_sem(dag: WeightedDag, noise: NoiseSpec, n: int, rng: np.random.Generator) -> SampleMatrix:
    """Draw n rows from the linear SEM and center the columns.

    Columns are filled top layer first so every parent is available when its
    children are computed; this equals applying (I - B)^-1 to the noise.
    """
    if n < 2:
        raise InvalidScenario(f"n must be at least 2, got {n}")
    layers = topological_layers(dag)  # raises NotADag on cycles
    eps = noise.sample(rng, n, dag.p)
    x = np.zeros((n, dag.p))
    for t in range(layers.depth - 1, -1, -1):
        for j in layers.layers[t]:
            x[:, j] = x @ dag.b[j, :] + eps[:, j]
    return center_columns(x)


def population_covariance(dag: WeightedDag, noise: NoiseSpec | None = None) -> np.ndarray:
    """Sigma = (I - B)^-1 Omega (I - B)^-T for the dag's noise variances."""
    spec = noise if noise is not None else dag.noise
    if spec is None:
        raise ValueError("dag carries no noise spec and none was supplied")
    a = np.linalg.inv(np.eye(dag.p) - dag.b)
    omega = np.diag(spec.variances(dag.p))
    return a @ omega @ a.T


def population_precision(dag: WeightedDag, subset=None, noise: NoiseSpec | None = None) -> np.ndarray:
    """Exact precision of the marginal of x over the subset (inverse of Sigma_S)."""
    sigma = population_covariance(dag, noise)
    if subset is not None:
        subset = np.asarray(subset, dtype=int)
        sigma = sigma[np.ix_(subset, subset)]
    return np.linalg.inv(sigma)


def marginal_precision(dag: WeightedDag, subset=None, noise: NoiseSpec | None = None) -> np.ndarray:
    """Closed-form precision (I-B_S)' Omega_S^-1 (I-B_S) with exact structural zeros.

    Valid only when the subset is closed under ancestors (then the marginal is
    itself a linear SEM with the restricted coefficients); suffix sets of the
    layer recursion are. Preferred over population_precision in exactness checks
    because no matrix inversion noise enters the off-support entries.
    """
    spec = noise if noise is not None else dag.noise
    if spec is None:
        raise ValueError("dag carries no noise spec and none was supplied")
    s = np.arange(dag.p) if subset is None else np.asarray(subset, dtype=int)
    b_s = dag.b[np.ix_(s, s)]
    # any parent living outside the subset breaks the closed-ancestry premise
    outside = np.setdiff1d(np.arange(dag.p), s)
    if outside.size and dag.b[np.ix_(s, outside)].any():
        raise ValueError("subset is not ancestrally closed; marginal is not the restricted SEM")
    eye = np.eye(s.size)
    omega_inv = np.diag(1.0 / spec.variances(dag.p)[s])
    return (eye - b_s).T @ omega_inv @ (eye - b_s)


def _has_path(b: np.ndarray, src: int, dst: int) -> bool:
    """True if a directed path src -> ... -> dst exists in the edge support of b."""
    if src == dst:
        return True
    seen = {src}
    stack = [src]
    while stack:
        u = stack.pop()
        for c in np.nonzero(b[:, u])[0]:
            if c == dst:
                return True
            if c not in seen:
                seen.add(int(c))
                stack.append(int(c))
    return False


def _uniform_weights(rng: np.random.Generator, size, width: float) -> np.ndarray:
    return rng.uniform(-width, width, size=size)


def _gen_hub_decoy(p: int, rng: np.random.Generator) -> WeightedDag:
    """Hub DAG whose hubs sit in the target's leaf range {3..p-1}."""
    n_children = hub_child_count(p)
    hubs = rng.choice(np.arange(3, p), size=3, replace=False)
    pool = np.setdiff1d(np.arange(p), hubs)
    b = np.zeros((p, p))
    for hub in hubs:
        children = rng.choice(pool, size=n_children, replace=False)
        b[children, hub] = _draw_coefficients(rng, n_children)
    return WeightedDag(p=p, b=b)


def _validate(condition: bool, message: str):
    if not condition:
        raise GeneratorInvariantViolation(message)


def _param_score(target: WeightedDag, aux: WeightedDag) -> float:
    theta0 = population_precision(target)
    sigma_aux = population_covariance(aux, noise=target.noise)
    _, score = is_parameter_informative(theta0, sigma_aux, h=np.inf)
    return score


def _gen_aux_suite_hub(target: WeightedDag, scenario: ScenarioSpec, rng: np.random.Generator):
    p = target.p
    width = scenario.added_edge_width()
    bound = PARAM_SCORE_BOUND["hub"]
    hubs = [0, 1, 2]
    out: list[tuple[WeightedDag, AuxLabel]] = []

    if scenario.case == "aux1":
        for _ in range(3):
            b = target.b.copy()
            for hub in hubs:
                candidates = np.array([v for v in range(3, p) if b[v, hub] == 0.0], dtype=int)
                chosen = candidates[rng.random(candidates.size) < 0.1]
                b[chosen, hub] = _uniform_weights(rng, chosen.size, width)
            aux = WeightedDag(p=p, b=b, noise=target.noise)
            _validate(is_global_informative(aux, target), "added leaf edges changed the layers")
            out.append((aux, AuxLabel(role="global")))
    else:
        iso = [
            j
            for j in range(3, p)
            if not target.b[j, :].any() and not target.b[:, j].any()
        ]
        if len(iso) < 2:
            raise InvalidScenario(f"only {len(iso)} isolated nodes; cannot build the donor set")
        donors = rng.choice(np.array(iso), size=len(iso) // 2, replace=False)
        b = target.b.copy()
        for donor in donors:
            for v in range(p):
                if v == donor or b[v, donor] != 0.0:
                    continue
                if rng.random() < 0.5 and not _has_path(b, v, int(donor)):
                    b[v, donor] = rng.uniform(-width, width)
        aux = WeightedDag(p=p, b=b, noise=target.noise)
        ok, score = is_parameter_informative(
            population_precision(target), population_covariance(aux, noise=target.noise), bound
        )
        _validate(ok, f"divergence score {score:.3f} exceeds the bound {bound}")
        out.append((aux, AuxLabel(role="parameter")))

        n_children = hub_child_count(p)
        for hub in hubs:
            b = np.zeros((p, p))
            children = rng.choice(np.arange(3, p), size=n_children, replace=False)
            b[children, hub] = _draw_coefficients(rng, n_children)
            aux = WeightedDag(p=p, b=b, noise=target.noise)
            _validate(
                is_node_informative(aux, target, hub),
                f"single-hub domain is not node-informative for hub {hub}",
            )
            out.append((aux, AuxLabel(role="node", nodes=(hub,))))

    for _ in range(4):
        for _attempt in range(_MAX_REDRAWS):
            aux = _gen_hub_decoy(p, rng)
            aux.noise = target.noise
            if is_global_informative(aux, target):
                continue
            if any(is_node_informative(aux, target, h) for h in hubs):
                continue
            if _param_score(target, aux) <= bound:
                continue
            break
        else:
            raise GeneratorInvariantViolation("could not draw a valid decoy")
        out.append((aux, AuxLabel(role="decoy")))
    return out


def _gen_aux_suite_scalefree(target: WeightedDag, scenario: ScenarioSpec, rng: np.random.Generator):
    p = target.p
    q = p // 2
    width = scenario.added_edge_width()
    bound = PARAM_SCORE_BOUND["scalefree"]
    layers = topological_layers(target)
    layer_of = {j: layers.layer_of(j) for j in range(p)}
    out: list[tuple[WeightedDag, AuxLabel]] = []

    def fresh_decoy() -> WeightedDag:
        for _attempt in range(_MAX_REDRAWS):
            aux = gen_scalefree_target(p, rng)
            aux.noise = target.noise
            if is_global_informative(aux, target):
                continue
            if _param_score(target, aux) <= bound:
                continue
            return aux
        raise GeneratorInvariantViolation("could not draw a valid decoy")

    if scenario.case == "aux1":
        for direction in (0, 1):
            donors = range(0, q) if direction == 0 else range(q, p)
            receivers = range(q, p) if direction == 0 else range(0, q)
            b = target.b.copy()
            for u in donors:
                for v in receivers:
                    if layer_of[u] == layer_of[v] + 1 and rng.random() < 0.1:
                        b[v, u] = rng.uniform(-width, width)
            aux = WeightedDag(p=p, b=b, noise=target.noise)
            _validate(is_global_informative(aux, target), "cross-layer edges changed the layers")
            out.append((aux, AuxLabel(role="global")))
    else:
        b = target.b.copy()
        for u in range(0, q):
            for v in range(q, p):
                if rng.random() < 0.5:
                    b[v, u] = rng.uniform(-width, width)
        aux = WeightedDag(p=p, b=b, noise=target.noise)
        ok, score = is_parameter_informative(
            population_precision(target), population_covariance(aux, noise=target.noise), bound
        )
        _validate(ok, f"divergence score {score:.3f} exceeds the bound {bound}")
        out.append((aux, AuxLabel(role="parameter")))

        for keep in (0, 1):
            kept = np.arange(0, q) if keep == 0 else np.arange(q, p)
            other = np.arange(q, p) if keep == 0 else np.arange(0, q)
            b = np.zeros((p, p))
            b[np.ix_(kept, kept)] = target.b[np.ix_(kept, kept)]
            _ba_subdag(b, other, rng)
            aux = WeightedDag(p=p, b=b, noise=target.noise)
            for j in kept:
                _validate(
                    is_node_informative(aux, target, int(j)),
                    f"kept-subgraph domain is not node-informative for node {j}",
                )
            out.append((aux, AuxLabel(role="node", nodes=tuple(int(j) for j in kept))))

    for _ in range(4):
        out.append((fresh_decoy(), AuxLabel(role="decoy")))
    return out


def gen_aux_suite(target: WeightedDag, scenario: ScenarioSpec, rng: np.random.Generator):
    """Auxiliary DAGs plus role labels for one benchmark case, self-validated.

    Case aux1 emits the globally informative suite (3 for the hub design, 2 for
    the scale-free design) plus 4 decoys; case aux2 emits 1 parameter-informative
    domain, the node-informative domains (3 single-hub / 2 kept-subgraph), and
    4 decoys.
    """
    if target.noise is None:
        target.noise = NoiseSpec(scenario.noise)
    if scenario.example == "hub":
        return _gen_aux_suite_hub(target, scenario, rng)
    return _gen_aux_suite_scalefree(target, scenario, rng)


def gen_target(scenario: ScenarioSpec, rng: np.random.Generator) -> WeightedDag:
    """Target DAG for the scenario, with the noise spec attached."""
    if scenario.example == "hub":
        dag = gen_hub_target(scenario.p, rng)
    else:
        dag = gen_scalefree_target(scenario.p, rng)
    dag.noise = NoiseSpec(scenario.noise)
    return dag
