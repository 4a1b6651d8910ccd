"""Coupling from the past over independent random maps.

A *random map* at depth ``d`` sends every state ``x`` to an independent draw
from row ``x`` of the kernel at time ``-d``.  Composing the maps for depths
``target .. target + j - 1`` (newest innermost-first) gives the random flow
from time ``-(target + j)`` into time ``-target``; once its image collapses
to a single state, that state is an exact draw from the unique marginal law
at time ``-target`` compatible with the kernel sequence.  Coalescence happens
with probability one exactly when the chain is weakly ergodic, so the driver
takes a mandatory cutoff and reports failure explicitly rather than ever
returning a biased sample.

Variate accounting is deterministic: each random map consumes exactly one
uniform per state, drawn in state order via inverse-CDF sampling, and each
map is sampled exactly once (the backward extension never revisits a depth).
"""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .rng import RngStream

#: Largest state count for which the exact coalescence oracle will enumerate
#: the map space (size ** size composed maps).
MAX_EXACT_SIZE = 5


class CouplingCutoffError(RuntimeError):
    """Raised by callers that need a sample but hit the backward cutoff."""

    def __init__(self, outcome: "CouplingOutcome"):
        self.outcome = outcome
        super().__init__(
            f"no coalescence within cutoff {outcome.cutoff}; "
            "deepen the cutoff or check weak ergodicity of the kernels"
        )


@dataclass(frozen=True)
class RandomMap:
    """One realized map: ``images[x]`` is where state ``x`` moves."""

    images: np.ndarray

    @property
    def size(self) -> int:
        return len(self.images)


@dataclass(frozen=True)
class ComposedMap:
    """A composition of random maps spanning ``span`` backward steps."""

    images: np.ndarray
    span: int

    @classmethod
    def identity(cls, size: int) -> "ComposedMap":
        return cls(np.arange(size), 0)

    @property
    def image_size(self) -> int:
        return len(np.unique(self.images))


def _images_from_uniforms(row_cdfs: np.ndarray, u: np.ndarray) -> np.ndarray:
    # Smallest column index whose cumulative row weight exceeds u, per row.
    # For the small matrices this package lives on, bisecting Python lists
    # beats the vectorized comparison; both count entries <= u, so the two
    # branches agree exactly (see the property test pinning this).
    top = row_cdfs.shape[1] - 1
    if top < 16:
        rows = row_cdfs.tolist()
        us = u.tolist()
        return np.array([min(bisect_right(rows[i], us[i]), top) for i in range(len(rows))])
    idx = (row_cdfs <= u[:, None]).sum(axis=1)
    return np.minimum(idx, top)


def sample_random_map(kernel: np.ndarray, rng: RngStream) -> RandomMap:
    """Draw a random map whose coordinates follow the kernel's rows.

    Consumes exactly ``size`` uniforms, one per state in state order, and
    inverts each row's CDF, so the draw is reproducible from the stream
    position alone.
    """
    k = np.asarray(kernel, dtype=float)
    u = rng.uniforms(k.shape[0])
    return RandomMap(_images_from_uniforms(np.cumsum(k, axis=1), u))


def compose(newer: RandomMap, existing: ComposedMap) -> ComposedMap:
    """Extend a composed map one step further into the past.

    ``newer`` acts first (it is the innermost, most-past map), then
    ``existing``: the result sends ``x`` to ``existing(newer(x))``.
    """
    return ComposedMap(existing.images[newer.images], existing.span + 1)


def is_coalesced(composed: ComposedMap) -> bool:
    """True when the composed map's image is a single state."""
    img = composed.images
    return bool((img == img[0]).all())


@dataclass(frozen=True)
class CouplingOutcome:
    """Result of one backward coupling run.

    On success ``sample`` holds the coalesced state and ``coalescence_depth``
    the number of backward steps taken from the target (so the flow started
    at time ``-(target + coalescence_depth)``).  On failure both are ``None``
    and ``steps_used == cutoff``.
    """

    sample: int | None
    coalescence_depth: int | None
    steps_used: int
    cutoff: int

    @property
    def coalesced(self) -> bool:
        return self.sample is not None


def cftp(kernels, target_depth: int, rng: RngStream, cutoff: int) -> CouplingOutcome:
    """Sample the marginal law at time ``-target_depth`` by coupling from the past.

    ``kernels`` is anything with ``size`` and ``at(depth)`` (a
    :class:`~cftp.chain.KernelSequence`, or a conditional-kernel source whose
    queries must arrive at increasing depths — which is exactly the access
    pattern here).  The flow is extended backward one depth at a time,
    sampling the map at each depth exactly once, until the image coalesces or
    ``cutoff`` maps have been used.  Failure is reported in the outcome, never
    papered over with a partial sample.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    # same composition as compose()/is_coalesced(), kept on bare image arrays
    # because this loop dominates the cost of every sampler in the package
    images = np.arange(kernels.size)
    for step in range(1, cutoff + 1):
        fresh = sample_random_map(kernels.at(target_depth + step - 1), rng)
        images = images[fresh.images]
        flat = images.tolist()
        if flat.count(flat[0]) == len(flat):
            return CouplingOutcome(
                sample=int(flat[0]),
                coalescence_depth=step,
                steps_used=step,
                cutoff=cutoff,
            )
    return CouplingOutcome(sample=None, coalescence_depth=None, steps_used=cutoff, cutoff=cutoff)


def exact_coalescence_cdf(kernels, target_depth: int, max_depth: int) -> np.ndarray:
    """Exact law of the coalescence depth, by enumerating the map space.

    Entry ``j - 1`` of the result is the probability that the composed map
    over depths ``target .. target + j - 1`` has a singleton image, i.e. that
    coalescence needs at most ``j`` backward steps.  The composed map is
    itself a Markov chain on the ``size ** size`` functions of the state
    space, advanced here by exact vector-matrix arithmetic; the state count
    is guarded by ``MAX_EXACT_SIZE``.
    """
    s = kernels.size
    if s > MAX_EXACT_SIZE:
        raise ValueError(f"exact oracle limited to size <= {MAX_EXACT_SIZE}, got {s}")
    maps = np.array(list(itertools.product(range(s), repeat=s)), dtype=int)
    n_maps = len(maps)
    constant = (maps == maps[:, :1]).all(axis=1)
    identity_index = int(np.ravel_multi_index(tuple(range(s)), (s,) * s))

    dist = np.zeros(n_maps)
    dist[identity_index] = 1.0
    eye = np.eye(s)
    out = np.empty(max_depth)
    for j in range(max_depth):
        k = kernels.at(target_depth + j)
        new = np.zeros(n_maps)
        for m in np.nonzero(dist > 0.0)[0]:
            # Given the current composed map g, the next composed map has
            # independent coordinates: coordinate x lands on z with
            # probability sum_w K[x, w] 1{g(w) = z}.
            pg = k @ eye[maps[m]]
            meas = pg[0]
            for x in range(1, s):
                meas = np.multiply.outer(meas, pg[x])
            new += dist[m] * meas.ravel()
        dist = new
        out[j] = dist[constant].sum()
    return out
