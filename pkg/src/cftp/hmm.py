"""Exact smoothing-distribution sampling for hidden Markov models.

Given a signal chain on nonpositive times and observations ``y_0, y_{-1}, ...``
pulled lazily backward from the present, the smoothing law of the signal given
the observations is itself a nonhomogeneous Markov chain.  Its one-step
*conditional kernels* are built from the signal kernel, the emission density
at the pulled observation, and a backward likelihood recursion; feeding those
kernels to :func:`cftp.coupling.cftp` yields exact draws from the smoothing
marginal at any time, touching only as many observations as the coupling
actually needs.

The backward likelihood (the probability density of the observations from a
given time to the present, as a function of the state then) is kept
normalized to sum 1 with the log of the discarded scale accumulated
separately; the conditional kernels are invariant to that rescaling.  Mass
below ``UNDERFLOW_FLOOR`` is flushed to zero (and logged) before normalizing.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import coupling
from .chain import (
    KernelSequence,
    as_distribution,
    backward_product,
    dobrushin_coefficient,
    find_minorization,
    total_variation,
)
from .coupling import CouplingCutoffError, CouplingOutcome, _images_from_uniforms
from .rng import RngStream

logger = logging.getLogger(__name__)

#: Backward-likelihood mass below this is flushed to zero before normalizing.
UNDERFLOW_FLOOR = 1e-300


class ObservationExhaustedError(RuntimeError):
    """A finite observation record ran out while coupling walked backward."""

    def __init__(self, depth: int, length: int):
        self.depth = depth
        self.length = length
        super().__init__(
            f"observation record exhausted: depth {depth} requested but only "
            f"depths 0..{length - 1} exist; a finite record cannot drive "
            "unbounded backward coupling — use finite_obs_cftp for an exact "
            "draw that falls back on the invariant law at the record's edge"
        )


class ObservationStream:
    """Backward, on-demand access to observations with a pull counter.

    ``pull(depth)`` returns the observation at time ``-depth``.  Values are
    cached, so repeated pulls at a depth are free and ``pulls_made`` counts
    distinct depths served by this stream.  Several streams may share one
    deterministic provider (e.g. per-replicate views of a single realization);
    each view keeps its own counter.
    """

    def __init__(self, provider: Callable[[int], object], length: int | None = None):
        self._provider = provider
        self._length = length
        self._cache: dict[int, object] = {}

    @classmethod
    def from_array(cls, values: Sequence) -> "ObservationStream":
        vals = list(values)
        return cls(vals.__getitem__, length=len(vals))

    def pull(self, depth: int):
        depth = int(depth)
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        if self._length is not None and depth >= self._length:
            raise ObservationExhaustedError(depth, self._length)
        if depth not in self._cache:
            self._cache[depth] = self._provider(depth)
        return self._cache[depth]

    def pull_block(self, start: int, stop: int) -> list:
        """Observations at depths ``start .. stop - 1``, cached and counted
        exactly as individual :meth:`pull` calls would be."""
        if start < 0 or stop < start:
            raise ValueError("bad depth range")
        if self._length is not None and stop > self._length:
            raise ObservationExhaustedError(stop - 1, self._length)
        cache = self._cache
        provider = self._provider
        out = []
        for d in range(start, stop):
            if d in cache:
                out.append(cache[d])
            else:
                v = provider(d)
                cache[d] = v
                out.append(v)
        return out

    @property
    def pulls_made(self) -> int:
        return len(self._cache)

    @property
    def length(self) -> int | None:
        return self._length

    def fresh_view(self) -> "ObservationStream":
        """A stream over the same provider with an independent pull counter."""
        return ObservationStream(self._provider, self._length)


def as_observation_stream(obs) -> ObservationStream:
    """Pass streams through; wrap sequences as finite records."""
    if isinstance(obs, ObservationStream):
        return obs
    return ObservationStream.from_array(obs)


class EmissionModel:
    """Emission density family ``(depth, state, y) -> nonnegative density``.

    ``positive`` declares whether the family is strictly positive for every
    observation (``True``), known to vanish somewhere (``False``), or unknown
    (``None``); the sufficient-condition diagnostics use it.  Subclasses
    override :meth:`density` and usually the vectorized
    :meth:`density_vector`; :meth:`sample` is optional and only needed to
    simulate data.
    """

    positive: bool | None = None

    def density(self, depth: int, state: int, y) -> float:
        raise NotImplementedError

    def density_vector(self, depth: int, y) -> np.ndarray:
        """Densities at all states, shape (size,); default loops density()."""
        raise NotImplementedError

    def density_block(self, depths, ys) -> np.ndarray:
        """Densities for several (depth, y) pairs, shape (len(ys), size).

        The default stacks :meth:`density_vector` calls; families with a
        closed form override it so bulk consumers stay off the per-call path.
        """
        return np.stack([self.density_vector(d, y) for d, y in zip(depths, ys)])

    def sample(self, depth: int, state: int, rng: RngStream):
        raise NotImplementedError(f"{type(self).__name__} cannot simulate observations")


@dataclass(frozen=True)
class HmmModel:
    """A hidden Markov model: signal kernels plus an emission family.

    ``invariant_dist``, when given, must actually be invariant for the probed
    signal kernels (checked at construction within total variation 1e-10); it
    enables forward simulation and the finite-record fallback sampler.
    """

    signal: KernelSequence
    emission: EmissionModel
    invariant_dist: np.ndarray | None = None

    def __post_init__(self):
        if self.invariant_dist is not None:
            pi = as_distribution(self.invariant_dist, what="invariant_dist")
            pi.flags.writeable = False
            object.__setattr__(self, "invariant_dist", pi)
            for d in range(3):
                if total_variation(pi @ self.signal.at(d), pi) > 1e-10:
                    raise ValueError(f"invariant_dist is not invariant at depth {d}")

    @property
    def size(self) -> int:
        return self.signal.size

    def emission_density(self, depth: int, state: int, y) -> float:
        return self.emission.density(depth, state, y)


@dataclass(frozen=True)
class LikelihoodState:
    """Normalized backward likelihood of the observations from a depth onward.

    ``vector[x]`` is proportional to the density of the observations at
    depths ``depth, depth - 1, ..., 0`` given the state one step before depth
    is ``x``; it sums to 1 unless the record has zero likelihood, in which
    case it is identically zero.  ``log_weight`` is the log of the scale
    divided out so far (``-inf`` in the zero case).  ``depth == -1`` is the
    conventional start: no observations seen, uniform vector.
    """

    vector: np.ndarray
    log_weight: float
    depth: int

    @classmethod
    def initial(cls, size: int) -> "LikelihoodState":
        v = np.full(size, 1.0 / size)
        v.flags.writeable = False
        return cls(v, math.log(size), -1)

    @property
    def is_zero(self) -> bool:
        return not self.vector.any()


def _emission_vector(model: HmmModel, depth: int, y) -> np.ndarray:
    g = np.asarray(model.emission.density_vector(depth, y), dtype=float)
    if g.shape != (model.size,) or not np.all(np.isfinite(g)) or g.min() < 0.0:
        raise ValueError(f"bad emission densities at depth {depth}: {g!r}")
    return g


def _emission_block(model: HmmModel, depths, ys) -> np.ndarray:
    g = np.asarray(model.emission.density_block(depths, ys), dtype=float)
    if g.shape != (len(ys), model.size) or not np.all(np.isfinite(g)) or g.min() < 0.0:
        raise ValueError(f"bad emission densities for depths {depths[0]}..{depths[-1]}")
    return g


def likelihood_backward_step(
    model: HmmModel, depth: int, y, next_state: LikelihoodState
) -> LikelihoodState:
    """Extend the backward likelihood one step deeper into the past.

    ``next_state`` must sit at ``depth - 1``.  An all-zero state propagates
    (once the record is impossible it stays impossible).
    """
    if next_state.depth != depth - 1:
        raise ValueError(
            f"likelihood state at depth {next_state.depth} cannot step to depth {depth}"
        )
    k = model.signal.at(depth)
    raw = k @ (_emission_vector(model, depth, y) * next_state.vector)
    tiny = (raw > 0.0) & (raw < UNDERFLOW_FLOOR)
    if tiny.any():
        logger.warning(
            "flushed %d underflowing likelihood entries to zero at depth %d",
            int(tiny.sum()), depth,
        )
        raw = np.where(tiny, 0.0, raw)
    z = raw.sum()
    if z <= 0.0:
        return LikelihoodState(np.zeros(model.size), float("-inf"), depth)
    v = raw / z
    v.flags.writeable = False
    return LikelihoodState(v, next_state.log_weight + math.log(z), depth)


def conditional_kernel(
    model: HmmModel,
    depth: int,
    y,
    next_state: LikelihoodState,
    current_state: LikelihoodState,
) -> np.ndarray:
    """One-step kernel of the signal conditioned on the observation record.

    Row ``x`` reweights the signal row by the emission density at ``y`` and
    the forward likelihood, normalized by the likelihood at ``x``; rows whose
    likelihood vanishes fall back to the unconditioned signal row (they are
    never reached from a state compatible with the record).  ``current_state``
    must be the step of ``next_state`` at this depth.
    """
    if next_state.depth != depth - 1 or current_state.depth != depth:
        raise ValueError("likelihood states do not bracket the requested depth")
    k = model.signal.at(depth)
    numer = k * (_emission_vector(model, depth, y) * next_state.vector)[None, :]
    rowsum = numer.sum(axis=1)
    live = (current_state.vector > 0.0) & (rowsum > 0.0)
    out = np.array(k)
    out[live] = numer[live] / rowsum[live, None]
    return out


def conditional_kernel_window(model: HmmModel, observations, upto: int | None = None) -> list[np.ndarray]:
    """Conditional kernels at depths ``0 .. upto`` for a fixed record.

    ``observations`` is a stream or a depth-indexed sequence; ``upto``
    defaults to the record length minus one.  Runs the likelihood recursion
    once, so entry ``d`` is exactly what the lazy source would serve at depth
    ``d``.
    """
    stream = as_observation_stream(observations)
    if upto is None:
        if stream.length is None:
            raise ValueError("upto is required for unbounded observation streams")
        upto = stream.length - 1
    state = LikelihoodState.initial(model.size)
    kernels = []
    for d in range(upto + 1):
        y = stream.pull(d)
        prev = state
        state = likelihood_backward_step(model, d, y, prev)
        kernels.append(conditional_kernel(model, d, y, prev, state))
    return kernels


class ConditionalKernelSource:
    """Lazy conditional-kernel view over a model and an observation stream.

    Serves ``at(depth)`` for strictly increasing depths (the access pattern of
    backward coupling), pulling exactly the observations the requested kernel
    needs and advancing the internal likelihood state as it goes.
    """

    def __init__(self, model: HmmModel, stream: ObservationStream):
        self.model = model
        self.stream = stream
        self._state = LikelihoodState.initial(model.size)
        self._last_query: int | None = None

    @property
    def size(self) -> int:
        return self.model.size

    @property
    def likelihood_state(self) -> LikelihoodState:
        return self._state

    @property
    def pulls_made(self) -> int:
        return self.stream.pulls_made

    def advance_likelihood(self) -> None:
        """Step the likelihood one depth deeper (pulling one observation)."""
        d = self._state.depth + 1
        self._state = likelihood_backward_step(self.model, d, self.stream.pull(d), self._state)

    def at(self, depth: int) -> np.ndarray:
        depth = int(depth)
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        if self._last_query is not None and depth <= self._last_query:
            raise ValueError(
                f"conditional kernels must be queried at strictly increasing depths "
                f"(got {depth} after {self._last_query})"
            )
        self._last_query = depth
        while self._state.depth < depth - 1:
            self.advance_likelihood()
        prev = self._state
        self.advance_likelihood()
        return conditional_kernel(self.model, depth, self.stream.pull(depth), prev, self._state)


def make_conditional_source(model: HmmModel, stream: ObservationStream) -> ConditionalKernelSource:
    """The conditional-kernel source driving HMM coupling runs."""
    return ConditionalKernelSource(model, stream)


class CachedConditionalKernels:
    """Pure, cached conditional-kernel sequence for one fixed record.

    Unlike the one-shot :class:`ConditionalKernelSource`, this view can be
    queried in any order and shared across replicates: the kernels for a fixed
    observation record are deterministic, so computing them once is sound.
    """

    def __init__(self, model: HmmModel, observations):
        self.model = model
        self._stream = as_observation_stream(observations)
        self._state = LikelihoodState.initial(model.size)
        self._kernels: list[np.ndarray] = []

    @property
    def size(self) -> int:
        return self.model.size

    def at(self, depth: int) -> np.ndarray:
        depth = int(depth)
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        while len(self._kernels) <= depth:
            d = len(self._kernels)
            y = self._stream.pull(d)
            prev = self._state
            self._state = likelihood_backward_step(self.model, d, y, prev)
            self._kernels.append(conditional_kernel(self.model, d, y, prev, self._state))
        return self._kernels[depth]


@dataclass(frozen=True)
class HmmCouplingOutcome(CouplingOutcome):
    """Coupling outcome plus the number of observations the run touched."""

    observations_used: int = 0


def hmm_cftp(
    model: HmmModel,
    observations,
    target_depth: int,
    rng: RngStream,
    cutoff: int,
) -> HmmCouplingOutcome:
    """Exact draw from the smoothing marginal at time ``-target_depth``.

    Runs backward coupling on the conditional kernels, pulling observations
    lazily.  On coalescence after ``d`` backward steps the run has touched
    exactly the observations at depths ``0 .. target_depth + d`` — the
    likelihood recursion also evaluates the depth reached by the coupling
    before it stops — and the returned state is an exact draw.  On cutoff the
    outcome says so; no sample is returned.
    """
    stream = as_observation_stream(observations)
    source = make_conditional_source(model, stream)
    out = coupling.cftp(source, target_depth, rng, cutoff)
    if out.coalesced:
        source.advance_likelihood()
    return HmmCouplingOutcome(
        sample=out.sample,
        coalescence_depth=out.coalescence_depth,
        steps_used=out.steps_used,
        cutoff=out.cutoff,
        observations_used=stream.pulls_made,
    )


class FiniteObservationSampler:
    """Exact present-time smoothing draws from a *finite* observation record.

    For a homogeneous model started from its invariant law, a record covering
    depths ``0 .. m`` cannot drive coupling past depth ``m``; instead, a run
    that has not coalesced by then draws the depth-``m`` state from the
    invariant law reweighted by the record's likelihood and pushes it through
    the already-composed map.  Every draw is exact.  Kernels and CDFs are
    precomputed once so repeated draws are cheap.
    """

    def __init__(self, model: HmmModel, observations):
        if model.invariant_dist is None:
            raise ValueError("finite-record sampling needs a model with invariant_dist")
        obs = list(observations)
        if not obs:
            raise ValueError("empty observation record")
        self.model = model
        self.size = model.size
        self._edge_depth = len(obs) - 1
        state = LikelihoodState.initial(model.size)
        cdfs = []
        for d in range(self._edge_depth):
            prev = state
            state = likelihood_backward_step(model, d, obs[d], prev)
            kern = conditional_kernel(model, d, obs[d], prev, state)
            cdfs.append(np.cumsum(kern, axis=1))
        self._cdfs = cdfs
        weights = model.invariant_dist * _emission_vector(model, self._edge_depth, obs[-1]) * state.vector
        total = weights.sum()
        if total <= 0.0:
            raise ValueError("observation record has zero likelihood under the model")
        self._edge_cdf = np.cumsum(weights / total)

    def draw(self, rng: RngStream) -> int:
        """One exact draw; consumes ``size`` uniforms per backward step plus
        one more when the record's edge is reached without coalescence."""
        image = np.arange(self.size)
        for cdf in self._cdfs:
            fresh = _images_from_uniforms(cdf, rng.uniforms(self.size))
            image = image[fresh]
            if (image == image[0]).all():
                return int(image[0])
        return int(image[rng.index_from_cdf(self._edge_cdf)])

    def draw_many(self, n: int, rng: RngStream) -> np.ndarray:
        return np.fromiter((self.draw(rng) for _ in range(n)), dtype=int, count=n)


def finite_obs_cftp(model: HmmModel, observations, rng: RngStream) -> int:
    """One exact smoothing draw at the present from a finite record.

    Convenience wrapper over :class:`FiniteObservationSampler`; build the
    sampler directly when many draws from the same record are needed.
    """
    return FiniteObservationSampler(model, observations).draw(rng)


@dataclass(frozen=True)
class SmootherResult:
    """A smoothing-marginal approximation and its start-state sensitivity.

    ``dist`` is the approximation; ``beta`` is the Dobrushin coefficient of
    the conditional-kernel product behind it, which bounds the total
    variation between approximations started from different states.
    """

    dist: np.ndarray
    beta: float


def approximate_smoother(
    model: HmmModel,
    observations,
    target_depth: int,
    span: int = 1000,
    start_state: int = 0,
) -> SmootherResult:
    """Approximate the smoothing marginal at time ``-target_depth``.

    Takes row ``start_state`` of the conditional-kernel product over ``span``
    steps ending at the target depth.  The record must cover depths
    ``0 .. target_depth + span - 1``.
    """
    deepest = target_depth + span
    kernels = conditional_kernel_window(model, observations, upto=deepest - 1)
    seq = KernelSequence.from_list(kernels)
    prod = backward_product(seq, deepest, target_depth)
    return SmootherResult(dist=prod[start_state].copy(), beta=dobrushin_coefficient(prod))


@dataclass(frozen=True)
class MultiSampleResult:
    """N smoothing draws at the present, conditionally independent given one
    exact anchor draw in the past, with the CPU-time split between the two
    steps."""

    samples: np.ndarray
    anchor_state: int
    anchor_depth: int
    coalescence_depth: int
    step1_seconds: float
    step2_seconds: float

    @property
    def step1_share(self) -> float:
        total = self.step1_seconds + self.step2_seconds
        return self.step1_seconds / total if total > 0 else float("nan")


class _SweepKernels:
    """Block-evaluated conditional kernels for one record.

    Serves bit-for-bit the same matrices as :func:`make_conditional_source`
    (pinned in the tests) but runs the likelihood recursion on preallocated
    buffers and forms the kernel matrices in one batched pass per block,
    which keeps the anchor step of :func:`multi_sample` cheap relative to
    the per-draw step.  The small-state shortcut below folds the likelihood
    normalizer in Python floats; that matches ``ndarray.sum`` exactly
    because numpy reduces short contiguous doubles left to right (pinned as
    a property test, so a numpy behaviour change fails loudly).  Block
    prefetch may pull a few observations past the deepest kernel actually
    used, so this view makes no per-pull accounting promises.
    """

    _BLOCK = 16

    def __init__(self, model: HmmModel, stream: ObservationStream):
        self.model = model
        self._stream = stream
        self._kernels: list[np.ndarray] = []
        self._phi = np.full(model.size, 1.0 / model.size)

    @property
    def size(self) -> int:
        return self.model.size

    def at(self, depth: int) -> np.ndarray:
        while len(self._kernels) <= depth:
            self._extend(depth)
        return self._kernels[depth]

    def _extend(self, depth_needed: int) -> None:
        start = len(self._kernels)
        # the first query fills exactly through its depth (the dominant cost
        # is proportional to it anyway); later ones extend by fixed blocks
        stop = depth_needed + 1 if start == 0 else max(depth_needed + 1, start + self._BLOCK)
        if self._stream.length is not None:
            stop = min(stop, self._stream.length)
        if stop <= start:
            raise ObservationExhaustedError(depth_needed, self._stream.length)
        size = self.model.size
        count = stop - start
        g = _emission_block(self.model, range(start, stop), self._stream.pull_block(start, stop))
        signal_at = self.model.signal.at
        ks = [signal_at(d) for d in range(start, stop)]
        weights = np.empty((count, size))
        phis = np.zeros((count, size))
        raw = np.empty(size)
        small = size < 8
        phi = self._phi
        for i in range(count):
            w = weights[i]
            np.multiply(g[i], phi, out=w)
            np.dot(ks[i], w, out=raw)
            if small:
                vals = raw.tolist()
                z = 0.0
                for v in vals:
                    z += v
                degenerate = min(vals) < UNDERFLOW_FLOOR
            else:
                z = float(raw.sum())
                degenerate = float(raw.min()) < UNDERFLOW_FLOOR
            if degenerate:
                tiny = (raw > 0.0) & (raw < UNDERFLOW_FLOOR)
                if tiny.any():
                    logger.warning(
                        "flushed %d underflowing likelihood entries to zero at depth %d",
                        int(tiny.sum()), start + i,
                    )
                    raw = np.where(tiny, 0.0, raw)
                z = float(raw.sum())
            if z > 0.0:
                np.divide(raw, z, out=phis[i])
            phi = phis[i]
        k_blk = np.stack(ks)
        numer = k_blk * weights[:, None, :]
        rowsum = numer.sum(axis=2)
        live = (phis > 0.0) & (rowsum > 0.0)
        out = k_blk.copy()
        if live.all():
            np.divide(numer, rowsum[:, :, None], out=out)
        else:
            out[live] = numer[live] / rowsum[live][:, None]
        self._kernels.extend(out)
        self._phi = phi


def multi_sample(
    model: HmmModel,
    observations,
    target_depth: int,
    n_samples: int,
    rng: RngStream,
    cutoff: int,
) -> MultiSampleResult:
    """Draw ``n_samples`` present-time smoothing samples through one anchor.

    Step 1 draws an exact sample at time ``-target_depth`` by backward
    coupling and computes the conditional transition row from there to the
    present; step 2 draws ``n_samples`` conditionally independent present
    states from that row.  The draws are exchangeable but not jointly
    independent; :func:`pairwise_dependence` quantifies the gap.  Raises
    :class:`~cftp.coupling.CouplingCutoffError` if step 1 hits the cutoff.
    """
    stream = as_observation_stream(observations)
    t0 = _time.perf_counter()
    sweep = _SweepKernels(model, stream)
    out = coupling.cftp(sweep, target_depth, rng, cutoff)
    if not out.coalesced:
        raise CouplingCutoffError(out)
    row = np.zeros(model.size)
    row[out.sample] = 1.0
    for d in range(target_depth - 1, -1, -1):
        row = row @ sweep.at(d)
    cdf = np.cumsum(row)
    t1 = _time.perf_counter()
    samples = np.array([rng.index_from_cdf(cdf) for _ in range(n_samples)], dtype=int)
    t2 = _time.perf_counter()
    return MultiSampleResult(
        samples=samples,
        anchor_state=out.sample,
        anchor_depth=target_depth,
        coalescence_depth=out.coalescence_depth,
        step1_seconds=t1 - t0,
        step2_seconds=t2 - t1,
    )


def pairwise_dependence(
    model: HmmModel,
    observations,
    target_depth: int,
    span: int = 1000,
) -> float:
    """Total variation between a pair of anchored draws' joint law and
    independence.

    Two present-time draws anchored at depth ``target_depth`` (as in
    :func:`multi_sample`) are identically distributed but dependent; this
    returns half the L1 gap between their joint law and the product of the
    marginals, with the anchor law approximated by a ``span``-step
    conditional-kernel product (row of state 0).
    """
    deepest = target_depth + span
    kernels = conditional_kernel_window(model, observations, upto=max(deepest - 1, 0))
    seq = KernelSequence.from_list(kernels)
    anchor = backward_product(seq, deepest, target_depth)[0]
    to_present = backward_product(seq, target_depth, 0)
    present = anchor @ to_present
    joint = np.einsum("z,zx,zw->xw", anchor, to_present, to_present)
    return 0.5 * float(np.abs(joint - np.outer(present, present)).sum())


def beta_bound(cert, model: HmmModel, observations, depths: Sequence[int] | None = None) -> float:
    """Upper bound on the Dobrushin coefficient of a conditional-kernel product.

    ``cert`` must be a minorization certificate for the signal product over
    exactly ``len(observations)`` steps; ``observations`` are the values over
    the product's window in time order (deepest first), with ``depths``
    giving their depths for time-dependent emissions (defaults to all zero,
    which is right for homogeneous families).  For a single step the bound is
    ``1 - eps_minus / eps_plus`` with no emission term; for longer windows
    each observation contributes its worst-to-best emission-density ratio,
    and every emission must be strictly positive at the observed values.
    """
    obs = list(observations)
    if len(obs) != cert.span_steps:
        raise ValueError(
            f"certificate spans {cert.span_steps} steps but window has {len(obs)} observations"
        )
    base = 1.0 - cert.eps_minus / cert.eps_plus
    if len(obs) == 1:
        return base
    if depths is None:
        depths = [0] * len(obs)
    ratio = 1.0
    for y, d in zip(obs, depths):
        g = _emission_vector(model, d, y)
        lo, hi = float(g.min()), float(g.max())
        if lo <= 0.0:
            raise ValueError(
                "emission density vanishes at an observed value; the product bound "
                "needs strictly positive emissions over the window"
            )
        ratio *= lo / hi
    return 1.0 - (cert.eps_minus / cert.eps_plus) * ratio


@dataclass(frozen=True)
class SufficientConditionsReport:
    """What the checkable sufficient conditions say about coupling success.

    ``surely_successful``: every probed signal kernel is entrywise positive
    and every probed observation has positive density under some state, which
    makes the conditional chain coalesce for every record.
    ``as_successful_evidence``: some power of the signal (up to size**2)
    admits a product-form minorization and the emissions are strictly
    positive at the probes, evidence for coalescence on almost every record.
    Both are one-sided: ``False`` means "not established by these probes",
    not "impossible".
    """

    surely_successful: bool
    as_successful_evidence: bool
    details: dict = field(repr=False)


def sufficient_conditions_report(
    model: HmmModel,
    probe_depths: Sequence[int] = (0, 1, 2),
    probe_observations: Sequence = (),
) -> SufficientConditionsReport:
    """Probe the checkable sufficient conditions for coupling success."""
    s = model.size
    min_signal = min(float(model.signal.at(d).min()) for d in probe_depths)

    emission_min = None
    emission_somewhere = None
    if probe_observations:
        mins, maxes = [], []
        for y in probe_observations:
            for d in probe_depths:
                g = _emission_vector(model, d, y)
                mins.append(float(g.min()))
                maxes.append(float(g.max()))
        emission_min = min(mins)
        emission_somewhere = min(maxes) > 0.0

    declared = model.emission.positive
    strictly_positive = emission_min > 0.0 if emission_min is not None else declared is True
    positive_somewhere = emission_somewhere if emission_somewhere is not None else declared is True

    minorization = None
    for span in range(1, s * s + 1):
        for d in probe_depths:
            prod = backward_product(model.signal, d + span, d)
            cert = find_minorization(prod, 1)
            if cert is not None:
                minorization = {
                    "span": span,
                    "base_depth": int(d),
                    "eps_minus": cert.eps_minus,
                    "eps_plus": cert.eps_plus,
                }
                break
        if minorization is not None:
            break

    return SufficientConditionsReport(
        surely_successful=bool(min_signal > 0.0 and positive_somewhere),
        as_successful_evidence=bool(minorization is not None and strictly_positive),
        details={
            "min_signal_entry": min_signal,
            "emission_declared_positive": declared,
            "emission_min_at_probes": emission_min,
            "emission_positive_somewhere_at_probes": emission_somewhere,
            "minorization": minorization,
            "probe_depths": [int(d) for d in probe_depths],
            "probes_used": len(probe_observations),
        },
    )
