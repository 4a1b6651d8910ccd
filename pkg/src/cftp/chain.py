"""Finite-state kernels, backward products, and ergodicity diagnostics.

This module handles nonhomogeneous Markov chains indexed by nonpositive
times.  Throughout the package a time ``n <= 0`` is represented by its
*depth* ``d = -n >= 0``: depth 0 is the present, larger depths lie further in
the past.  A :class:`KernelSequence` maps each depth to the row-stochastic
matrix governing the transition from time ``-d - 1`` to time ``-d`` (i.e. the
kernel "at time -d"), and ``backward_product(seq, a, b)`` multiplies the
kernels from depth ``a`` down to depth ``b``, which is the transition law from
time ``-a`` to time ``-b``.

States are 0-based integers ``0 .. size - 1``.  Distributions and kernels are
plain NumPy arrays validated by :func:`as_distribution` and
:func:`as_kernel`; rows whose sums drift from 1 by more than the tolerance
are renormalized with a logged warning, and anything worse raises.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

#: Row sums / distribution sums must match 1 within this before renormalizing.
ROW_SUM_TOL = 1e-12
#: Drift beyond this is treated as a broken input rather than float noise.
ROW_SUM_HARD_TOL = 1e-8


def _cleaned(arr, what: str) -> np.ndarray:
    a = np.array(arr, dtype=float)
    if a.size == 0:
        raise ValueError(f"{what} is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} has non-finite entries")
    if a.min() < -ROW_SUM_TOL:
        raise ValueError(f"{what} has negative entries (min {a.min():g})")
    return np.clip(a, 0.0, None)


def as_distribution(weights, *, what: str = "distribution") -> np.ndarray:
    """Validate and return a probability vector as a float array.

    Entries must be nonnegative and sum to 1 within ``ROW_SUM_TOL``; a sum
    drifting by at most ``ROW_SUM_HARD_TOL`` is renormalized (and logged),
    anything worse raises ``ValueError``.
    """
    w = _cleaned(weights, what)
    if w.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    drift = abs(w.sum() - 1.0)
    if drift > ROW_SUM_HARD_TOL:
        raise ValueError(f"{what} sums to {w.sum():.12g}, not 1")
    if drift > ROW_SUM_TOL:
        logger.warning("%s sum drifted by %.3g; renormalizing", what, drift)
        w = w / w.sum()
    return w


def as_kernel(rows, *, what: str = "kernel") -> np.ndarray:
    """Validate and return a square row-stochastic matrix as a float array.

    Same tolerance policy as :func:`as_distribution`, applied per row.
    """
    k = _cleaned(rows, what)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {k.shape}")
    sums = k.sum(axis=1)
    drift = np.abs(sums - 1.0)
    if drift.max() > ROW_SUM_HARD_TOL:
        raise ValueError(f"{what} row sums deviate from 1 by {drift.max():.3g}")
    if drift.max() > ROW_SUM_TOL:
        logger.warning("%s row sums drifted by %.3g; renormalizing", what, drift.max())
        k = k / sums[:, None]
    return k


def total_variation(mu, nu) -> float:
    """Total variation distance ``0.5 * sum |mu - nu|`` between two vectors."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return 0.5 * float(np.abs(mu - nu).sum())


def dobrushin_coefficient(kernel) -> float:
    """Dobrushin's ergodic coefficient of a row-stochastic matrix.

    Computed as one minus the minimal overlap ``sum_z min(K[x, z], K[x', z])``
    over all row pairs, which equals the maximal total variation distance
    between two rows.  Lies in [0, 1]; 0 means all rows are identical, 1 means
    two rows have disjoint support.
    """
    k = np.asarray(kernel, dtype=float)
    overlap = np.minimum(k[:, None, :], k[None, :, :]).sum(axis=2)
    return float(np.clip(1.0 - overlap.min(), 0.0, 1.0))


class KernelSequence:
    """Lazy depth-indexed family of row-stochastic matrices.

    ``source`` maps a depth ``d >= 0`` to the kernel at time ``-d``.  Results
    are validated and cached on first access, so repeated queries at the same
    depth always return the identical matrix even if ``source`` is not pure.
    """

    def __init__(self, source: Callable[[int], np.ndarray], size: int):
        self._source = source
        self.size = int(size)
        self._cache: dict[int, np.ndarray] = {}
        self._validated: dict[int, np.ndarray] = {}

    def at(self, depth: int) -> np.ndarray:
        """The kernel at time ``-depth`` (validated, cached, read-only)."""
        depth = int(depth)
        if depth < 0:
            raise ValueError(f"depth must be nonnegative, got {depth}")
        k = self._cache.get(depth)
        if k is None:
            cand = self._source(depth)
            # a source that hands back the same array object at many depths
            # (homogeneous chains) only pays for validation once
            k = self._validated.get(id(cand))
            if k is None or k is not cand:
                k = as_kernel(cand, what=f"kernel at depth {depth}")
                if k.shape[0] != self.size:
                    raise ValueError(
                        f"kernel at depth {depth} has size {k.shape[0]}, expected {self.size}"
                    )
                k.flags.writeable = False
                self._validated[id(k)] = k
            self._cache[depth] = k
        return k

    @classmethod
    def homogeneous(cls, matrix) -> "KernelSequence":
        """Constant sequence: the same kernel at every depth."""
        k = as_kernel(matrix)
        return cls(lambda depth: k, k.shape[0])

    @classmethod
    def from_list(cls, matrices: Sequence) -> "KernelSequence":
        """Finite window of kernels; ``matrices[d]`` is the kernel at depth d.

        Queries beyond the window raise ``ValueError``.
        """
        mats = [np.asarray(m, dtype=float) for m in matrices]
        if not mats:
            raise ValueError("empty kernel window")

        def source(depth: int) -> np.ndarray:
            if depth >= len(mats):
                raise ValueError(
                    f"depth {depth} beyond kernel window of length {len(mats)}"
                )
            return mats[depth]

        return cls(source, mats[0].shape[0])


def backward_product(seq: KernelSequence, from_depth: int, to_depth: int = 0) -> np.ndarray:
    """Transition matrix from time ``-from_depth`` to time ``-to_depth``.

    Multiplies the kernels at depths ``from_depth - 1`` down to ``to_depth``
    left to right.  By convention the product over an empty range
    (``from_depth <= to_depth``) is the identity.  Products accumulate in
    double precision; the result passes the usual row-sum validation.
    """
    if from_depth <= to_depth:
        return np.eye(seq.size)
    prod = np.array(seq.at(from_depth - 1))
    for d in range(from_depth - 2, to_depth - 1, -1):
        prod = prod @ seq.at(d)
    return as_kernel(prod, what=f"product from depth {from_depth} to {to_depth}")


@dataclass(frozen=True)
class AbsoluteProbabilityCheck:
    """Result of :func:`check_absolute_probabilities`."""

    ok: bool
    max_residual: float


def check_absolute_probabilities(
    seq: KernelSequence,
    dists,
    depths: Iterable[int],
    tol: float = 1e-10,
) -> AbsoluteProbabilityCheck:
    """Check that a family of distributions is carried along by the kernels.

    ``dists`` maps a depth to a distribution (callable or indexable).  For
    each depth ``d`` in ``depths`` the residual is the total variation
    between ``dists(d + 1) @ seq.at(d)`` and ``dists(d)``, i.e. how far the
    flow condition "yesterday's law pushed through today's kernel is today's
    law" is from holding.  Passes when the largest residual is at most
    ``tol``.
    """
    get = dists if callable(dists) else dists.__getitem__
    worst = 0.0
    for d in depths:
        pushed = as_distribution(get(d + 1), what=f"distribution at depth {d + 1}") @ seq.at(d)
        worst = max(worst, total_variation(pushed, get(d)))
    return AbsoluteProbabilityCheck(ok=worst <= tol, max_residual=worst)


def stenflo_coefficient(seq: KernelSequence, depths: Iterable[int]) -> float:
    """Smallest column-minimum mass ``sum_z min_x K(x, z)`` over the depths.

    A strictly positive value means every kernel in the range lets all
    starting states reach a common set with uniform probability mass, which
    forces weak ergodicity (and successful coupling) at a geometric rate.
    """
    worst = 1.0
    for d in depths:
        worst = min(worst, float(seq.at(d).min(axis=0).sum()))
    return worst


def weak_ergodicity_series(seq: KernelSequence, checkpoints: Sequence[int]) -> list[float]:
    """Terms ``1 - dobrushin_coefficient`` of consecutive checkpoint products.

    ``checkpoints`` is a strictly increasing list of depths ``d_0 < d_1 < ...``
    (conventionally starting at 0).  Term ``i`` is one minus the Dobrushin
    coefficient of the product from depth ``d_{i+1}`` to depth ``d_i``.  The
    chain is weakly ergodic on the probed timeline exactly when the series
    diverges for some checkpoint choice; partial sums of the returned terms
    are the evidence the diagnostics report.
    """
    cps = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be strictly increasing depths")
    if cps and cps[0] < 0:
        raise ValueError("checkpoints must be nonnegative depths")
    return [
        1.0 - dobrushin_coefficient(backward_product(seq, b, a))
        for a, b in zip(cps, cps[1:])
    ]


@dataclass(frozen=True)
class MinorizationCertificate:
    """Two-sided envelope ``eps_minus * nu <= P <= eps_plus * nu`` for P = K^m.

    ``nu`` is a probability vector, ``0 < eps_minus <= eps_plus``, and
    ``span_steps`` records the power m of the one-step kernel being
    certified.  Such an envelope bounds how fast coupling of the m-step chain
    must succeed and feeds the conditional-chain contraction bounds.
    """

    eps_minus: float
    eps_plus: float
    nu: np.ndarray
    span_steps: int

    def verify(self, matrix, tol: float = 1e-12) -> bool:
        """True if the envelope actually brackets ``matrix`` entrywise."""
        p = np.asarray(matrix, dtype=float)
        if not (0.0 < self.eps_minus <= self.eps_plus):
            return False
        lower = self.eps_minus * self.nu[None, :]
        upper = self.eps_plus * self.nu[None, :]
        return bool(np.all(p >= lower - tol) and np.all(p <= upper + tol))


def find_minorization(kernel, span_steps: int = 1) -> MinorizationCertificate | None:
    """Search for a product-form minorization of the ``span_steps``-power of a kernel.

    Takes ``nu`` proportional to the column minima of ``P = kernel^span_steps``
    and the tightest ``eps_minus``/``eps_plus`` around it.  Returns ``None``
    when no such envelope exists: either all column minima vanish, or some
    column has a zero minimum but positive entries (so no multiple of ``nu``
    can dominate it).
    """
    k = as_kernel(kernel)
    if span_steps < 1:
        raise ValueError("span_steps must be at least 1")
    p = np.linalg.matrix_power(k, span_steps)
    colmin = p.min(axis=0)
    eps_minus = float(colmin.sum())
    if eps_minus <= 0.0:
        return None
    if np.any((colmin == 0.0) & (p.max(axis=0) > 0.0)):
        return None
    nu = colmin / eps_minus
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(nu[None, :] > 0.0, p / nu[None, :], 0.0)
    eps_plus = float(ratios.max())
    cert = MinorizationCertificate(eps_minus, eps_plus, nu, span_steps)
    if not cert.verify(p):  # pragma: no cover - construction guarantees this
        return None
    return cert
