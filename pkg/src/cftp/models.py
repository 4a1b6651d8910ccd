"""Worked models, emission families, simulators, and observation generators.

States are 0-based everywhere; builders whose conventional presentation uses
1-based labels record the translation in ``ModelSpec.label_map``.  Observation
records are depth-indexed: entry ``d`` is the value at time ``-d``.

The three named models cover the interesting regimes:

* ``gaussian_three_state``: well-behaved signal with Gaussian emissions;
  coupling on the conditional chain succeeds on almost every record.
* ``degenerate_rotation``: parity-revealing emissions make the conditional
  kernels deterministic, the smoothing law non-unique, and coupling hopeless.
* ``reducible_block``: two never-communicating flat blocks; emissions are
  positive but the conditional chain stays reducible and never coalesces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import KernelSequence, as_distribution
from .hmm import EmissionModel, HmmModel, ObservationStream
from .rng import RngStream


# ---------------------------------------------------------------------------
# emission families


class GaussianEmission(EmissionModel):
    """Per-state normal densities; strictly positive everywhere."""

    positive = True

    def __init__(self, means, variances=None):
        self.means = np.asarray(means, dtype=float)
        if variances is None:
            variances = np.ones_like(self.means)
        self.variances = np.asarray(variances, dtype=float)
        if self.variances.min() <= 0:
            raise ValueError("variances must be positive")
        self._norm = 1.0 / np.sqrt(2.0 * math.pi * self.variances)
        self._sd = np.sqrt(self.variances)

    def density(self, depth: int, state: int, y) -> float:
        return float(self.density_vector(depth, y)[state])

    def density_vector(self, depth: int, y) -> np.ndarray:
        dev = float(y) - self.means
        return self._norm * np.exp(-0.5 * dev * dev / self.variances)

    def density_block(self, depths, ys) -> np.ndarray:
        dev = np.asarray(ys, dtype=float)[:, None] - self.means[None, :]
        return self._norm * np.exp(-0.5 * dev * dev / self.variances)

    def sample(self, depth: int, state: int, rng: RngStream) -> float:
        return rng.normal(self.means[state], self._sd[state])


class ParityEmission(EmissionModel):
    """Noiseless parity readout: density 1 when ``y == state % 2`` else 0."""

    positive = False

    def __init__(self, size: int):
        self._parities = np.arange(size) % 2

    def density(self, depth: int, state: int, y) -> float:
        return 1.0 if int(y) == state % 2 else 0.0

    def density_vector(self, depth: int, y) -> np.ndarray:
        return (self._parities == int(y)).astype(float)

    def sample(self, depth: int, state: int, rng: RngStream) -> int:
        return state % 2


class TabularEmission(EmissionModel):
    """Finite-alphabet emissions given as a (size x alphabet) probability table."""

    def __init__(self, table, alphabet=None):
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim != 2 or self.table.min() < 0:
            raise ValueError("table must be a nonnegative 2-d array")
        if np.abs(self.table.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("table rows must sum to 1")
        if alphabet is None:
            alphabet = list(range(self.table.shape[1]))
        self.alphabet = list(alphabet)
        self._index = {v: i for i, v in enumerate(self.alphabet)}
        self._cdfs = np.cumsum(self.table, axis=1)
        self.positive = bool(self.table.min() > 0)

    def density(self, depth: int, state: int, y) -> float:
        return float(self.table[state, self._index[y]])

    def density_vector(self, depth: int, y) -> np.ndarray:
        col = self._index.get(y)
        if col is None:
            return np.zeros(self.table.shape[0])
        return self.table[:, col].copy()

    def sample(self, depth: int, state: int, rng: RngStream):
        return self.alphabet[rng.index_from_cdf(self._cdfs[state])]


# ---------------------------------------------------------------------------
# named models


@dataclass(frozen=True)
class ModelSpec:
    """How a model was built: registry name, parameters, and label mapping.

    ``label_map`` translates the labels of the model's conventional 1-based
    presentation to the 0-based internal states (identity when absent).
    """

    name: str
    params: dict = field(default_factory=dict)
    label_map: dict | None = None


def gaussian_three_state(delta: float = 0.1) -> HmmModel:
    """Birth-death-like 3-state signal with unit-variance Gaussian emissions.

    The middle state emits around 1, the outer states around 0, so single
    observations cannot tell the outer states apart.  The one-step kernel has
    zero corners (no direct hop between the outer states), hence no one-step
    minorization, but the two-step kernel has one.  Invariant law
    (1/4, 1/2, 1/4).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie strictly between 0 and 1")
    m = np.array(
        [
            [1.0 - delta, delta, 0.0],
            [delta / 2.0, 1.0 - delta, delta / 2.0],
            [0.0, delta, 1.0 - delta],
        ]
    )
    return HmmModel(
        signal=KernelSequence.homogeneous(m),
        emission=GaussianEmission(means=[0.0, 1.0, 0.0]),
        invariant_dist=np.array([0.25, 0.5, 0.25]),
    )


GAUSSIAN_THREE_STATE_SPEC = ModelSpec(
    name="gaussian_three_state",
    params={"delta": 0.1},
    label_map={1: 0, 2: 1, 3: 2},
)


def degenerate_rotation() -> HmmModel:
    """4-state lazy rotation observed through its parity: stay or step down.

    Row ``x`` puts mass 1/2 on ``x`` and 1/2 on ``(x - 1) % 4``; the emission
    reveals ``x % 2`` exactly.  Conditioned on any binary record the kernels
    become deterministic 0/1 matrices whose image always has two states, so
    backward coupling never coalesces and the smoothing law given the whole
    past is genuinely non-unique (see :func:`degenerate_absolute_probs`).
    """
    m = np.zeros((4, 4))
    for x in range(4):
        m[x, x] = 0.5
        m[x, (x - 1) % 4] = 0.5
    return HmmModel(
        signal=KernelSequence.homogeneous(m),
        emission=ParityEmission(4),
        invariant_dist=np.full(4, 0.25),
    )


def degenerate_absolute_probs(w: float, observations) -> list[np.ndarray]:
    """A one-parameter family of smoothing laws for the degenerate rotation.

    For any binary record and any ``w`` in [0, 1], puts mass ``w`` on the
    state matching the parity observation and ``1 - w`` on that state plus 2,
    then solves the flow condition backward exactly (the conditional kernels
    are bijections between consecutive two-point supports, so the masses are
    copied, not mixed).  Entry ``d`` of the result is the law at time ``-d``.
    Every ``w`` gives residual exactly zero, exhibiting the non-uniqueness.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    obs = [int(y) for y in observations]
    if any(y not in (0, 1) for y in obs):
        raise ValueError("the degenerate rotation has binary observations")
    dists = []
    head = np.zeros(4)
    head[obs[0]] = w
    head[obs[0] + 2] = 1.0 - w
    dists.append(head)
    for d in range(1, len(obs)):
        prev = dists[d - 1]
        cur = np.zeros(4)
        for x in (obs[d], obs[d] + 2):
            dest = x if x % 2 == obs[d - 1] else (x - 1) % 4
            cur[x] = prev[dest]
        dists.append(cur)
    return dists


def reducible_block(emission: EmissionModel | None = None) -> HmmModel:
    """Two flat 2-state blocks that never communicate.

    Started from the law (1/2, 1/2, 0, 0) the chain lives in the first block,
    but the conditional kernels remain block-diagonal whatever the (default:
    strictly positive Gaussian) emissions say, so the coupling image always
    straddles both blocks and coalescence is impossible — success requires
    more than positive emission densities.
    """
    m = np.zeros((4, 4))
    m[:2, :2] = 0.5
    m[2:, 2:] = 0.5
    if emission is None:
        emission = GaussianEmission(means=[0.0, 1.0, 0.0, 1.0])
    return HmmModel(
        signal=KernelSequence.homogeneous(m),
        emission=emission,
        invariant_dist=np.array([0.5, 0.5, 0.0, 0.0]),
    )


# ---------------------------------------------------------------------------
# simulation and observation generators


@dataclass(frozen=True)
class SimulatedPath:
    """A jointly simulated signal/observation window, depth-indexed.

    ``states[d]`` and ``observations[d]`` sit at time ``-d``; the deepest
    state is drawn from the invariant law and the rest follow the kernels
    forward in time.
    """

    states: np.ndarray
    observations: np.ndarray

    def stream(self) -> ObservationStream:
        return ObservationStream.from_array(self.observations)


def simulate_hmm(model: HmmModel, depth: int, rng: RngStream) -> SimulatedPath:
    """Simulate states and observations over depths ``0 .. depth``.

    Needs ``model.invariant_dist`` (the deepest state's law) and an emission
    family with a sampler.  Draw order is fixed — deepest state, its
    observation, then each shallower (state, observation) pair — so a given
    stream position always yields the same path.
    """
    if model.invariant_dist is None:
        raise ValueError("simulation needs a model with invariant_dist")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    states = np.empty(depth + 1, dtype=int)
    values = [None] * (depth + 1)
    states[depth] = rng.index_from_cdf(np.cumsum(model.invariant_dist))
    values[depth] = model.emission.sample(depth, states[depth], rng)
    cdf_cache: dict[int, np.ndarray] = {}
    for d in range(depth - 1, -1, -1):
        k = model.signal.at(d)
        cdfs = cdf_cache.get(id(k))
        if cdfs is None:
            cdfs = np.cumsum(k, axis=1)
            cdf_cache[id(k)] = cdfs
        states[d] = rng.index_from_cdf(cdfs[states[d + 1]])
        values[d] = model.emission.sample(d, states[d], rng)
    return SimulatedPath(states=states, observations=np.asarray(values))


class _BackwardWalkProvider:
    """Value at depth d is the depth-(d-1) value plus fresh N(0, sigma2)."""

    def __init__(self, sigma2: float, rng: RngStream):
        self._sd = math.sqrt(sigma2)
        self._rng = rng
        self._values = [0.0]

    def __call__(self, depth: int) -> float:
        while len(self._values) <= depth:
            self._values.append(self._values[-1] + self._rng.normal(0.0, self._sd))
        return self._values[depth]


class _DriftProvider:
    """Independent N(-slope * d, sigma2) value at each depth."""

    def __init__(self, slope: float, sigma2: float, rng: RngStream):
        self._slope = slope
        self._sd = math.sqrt(sigma2)
        self._rng = rng
        self._values: list[float] = []

    def __call__(self, depth: int) -> float:
        while len(self._values) <= depth:
            d = len(self._values)
            self._values.append(-self._slope * d + self._rng.normal(0.0, self._sd))
        return self._values[depth]


def random_walk_obs(rng: RngStream, sigma2: float = 0.25) -> ObservationStream:
    """Unbounded misspecified record: a backward Gaussian random walk from 0.

    Values are generated (and cached) on demand in depth order, so the record
    is a single fixed realization however it is pulled.
    """
    return ObservationStream(_BackwardWalkProvider(sigma2, rng))


def drift_obs(rng: RngStream, slope: float = 0.003, sigma2: float = 0.25) -> ObservationStream:
    """Unbounded misspecified record: linear drift into the past plus noise.

    The value at depth ``d`` is ``-slope * d`` plus independent N(0, sigma2)
    noise; deep history drifts away from anything a stationary signal/emission
    pair would produce, which is what makes coupling struggle.
    """
    return ObservationStream(_DriftProvider(slope, sigma2, rng))


# ---------------------------------------------------------------------------
# registry for config-driven construction


def build_emission(spec: dict) -> EmissionModel:
    """Build an emission family from a config mapping (see README)."""
    family = spec.get("family")
    if family == "gaussian":
        return GaussianEmission(spec["means"], spec.get("variances"))
    if family == "parity":
        size = spec.get("size")
        if size is None:
            raise ValueError("parity emission spec needs 'size'")
        return ParityEmission(int(size))
    if family == "tabular":
        return TabularEmission(spec["table"], spec.get("alphabet"))
    raise ValueError(f"unknown emission family {family!r}")


def build_from_config(spec: dict) -> HmmModel | KernelSequence:
    """Build a named model, or a chain/HMM from matrix literals.

    ``{"name": "gaussian_three_state", "params": {"delta": 0.1}}`` style for
    the named builders; ``{"name": "matrix", "params": {"rows": [[...]], ...}}``
    for literals, returning a bare :class:`KernelSequence` unless the params
    include an ``emission`` spec (plus optional ``invariant``).
    """
    extra = set(spec) - {"name", "params"}
    if extra:
        raise ValueError(
            f"unexpected model keys {sorted(extra)}; builder arguments go under 'params'"
        )
    name = spec.get("name")
    params = dict(spec.get("params", {}))
    if name == "gaussian_three_state":
        return gaussian_three_state(**params)
    if name == "degenerate_rotation":
        return degenerate_rotation(**params)
    if name == "reducible_block":
        emission = params.pop("emission", None)
        if emission is not None:
            emission = build_emission(emission)
        return reducible_block(emission=emission, **params)
    if name == "matrix":
        seq = KernelSequence.homogeneous(np.asarray(params["rows"], dtype=float))
        emission = params.get("emission")
        invariant = params.get("invariant")
        if emission is None:
            return seq
        return HmmModel(
            signal=seq,
            emission=build_emission(emission),
            invariant_dist=as_distribution(invariant) if invariant is not None else None,
        )
    raise ValueError(f"unknown model name {name!r}")
