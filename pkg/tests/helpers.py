"""Independent oracles used to freeze expected values in the tests.

Everything here is deliberately written from the definitions, not by calling
the library's own formulas, so tests compare two genuinely different routes:
pairwise row scans instead of the min-overlap formula, a linear solve instead
of known stationary vectors, an unnormalized likelihood recursion instead of
the scaled one, and full path enumeration instead of kernel recursions.
"""

from __future__ import annotations

import itertools

import numpy as np


def dobrushin_by_row_pairs(kernel) -> float:
    """Max total variation over all row pairs, by direct double loop."""
    k = np.asarray(kernel, dtype=float)
    worst = 0.0
    for i in range(k.shape[0]):
        for j in range(i + 1, k.shape[0]):
            worst = max(worst, 0.5 * float(np.abs(k[i] - k[j]).sum()))
    return worst


def stationary_by_solve(kernel) -> np.ndarray:
    """Stationary law via least squares on (K^T - I) pi = 0, sum pi = 1."""
    k = np.asarray(kernel, dtype=float)
    s = k.shape[0]
    a = np.vstack([k.T - np.eye(s), np.ones(s)])
    b = np.concatenate([np.zeros(s), [1.0]])
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi


def random_kernel(gen: np.random.Generator, size: int, floor: float = 0.0) -> np.ndarray:
    """A random row-stochastic matrix; ``floor`` mixes in uniform mass."""
    raw = gen.gamma(1.0, size=(size, size))
    rows = raw / raw.sum(axis=1, keepdims=True)
    return (1.0 - floor) * rows + floor / size


def random_kernel_sequence_source(seed: int, size: int, floor: float = 0.0):
    """Depth -> kernel source that is pure (same depth, same matrix)."""

    def source(depth: int) -> np.ndarray:
        gen = np.random.default_rng([seed, depth])
        return random_kernel(gen, size, floor)

    return source


def raw_likelihoods(signal_mats, emission_vectors) -> list[np.ndarray]:
    """Unnormalized backward likelihood recursion over a window.

    ``signal_mats[d]`` and ``emission_vectors[d]`` sit at depth d.  Returns
    the raw likelihood vectors for depths 0..D (no scaling, no flushing);
    entry d is the density of the observations at depths <= d as a function
    of the state one step deeper.
    """
    out = []
    phi = np.ones(signal_mats[0].shape[0])
    for k, g in zip(signal_mats, emission_vectors):
        phi = np.asarray(k) @ (np.asarray(g) * phi)
        out.append(phi.copy())
    return out


def kernels_from_raw(signal_mats, emission_vectors) -> list[np.ndarray]:
    """Conditional kernels straight from the raw recursion's ratio formula."""
    raws = raw_likelihoods(signal_mats, emission_vectors)
    kernels = []
    prev = np.ones(signal_mats[0].shape[0])
    for d, (k, g) in enumerate(zip(signal_mats, emission_vectors)):
        k = np.asarray(k, dtype=float)
        numer = k * (np.asarray(g) * prev)[None, :]
        phi = raws[d]
        out = np.array(k)
        live = phi > 0
        out[live] = numer[live] / phi[live, None]
        kernels.append(out)
        prev = phi
    return kernels


def brute_force_window(signal_mat, emission_table, alphabet, init_dist, observations):
    """All-paths enumeration of a finite homogeneous HMM window.

    Returns ``(kernels, marginals)`` where ``kernels[d]`` is the law of the
    state at depth d given the state at depth d+1 and the observations at
    depths 0..d, and ``marginals[d]`` is the smoothing law at depth d given
    the whole window.  Rows of ``kernels[d]`` with zero conditioning mass are
    NaN.  Exponential in the window length; keep windows small.
    """
    m = np.asarray(signal_mat, dtype=float)
    table = np.asarray(emission_table, dtype=float)
    init = np.asarray(init_dist, dtype=float)
    s = m.shape[0]
    depth = len(observations) - 1
    cols = [list(alphabet).index(y) for y in observations]

    marg = np.zeros((depth + 1, s))
    ker_num = np.zeros((depth, s, s))  # [d, state at d+1, state at d]
    cond_mass = np.zeros((depth, s))
    for path in itertools.product(range(s), repeat=depth + 1):
        base = init[path[depth]]
        for d in range(depth, 0, -1):
            base *= m[path[d], path[d - 1]]
        gs = [table[path[d], cols[d]] for d in range(depth + 1)]
        # prefix products of emission factors over depths 0..d
        gprod = np.cumprod(gs)
        full = base * gprod[depth]
        for d in range(depth + 1):
            marg[d, path[d]] += full
        for d in range(depth):
            w = base * gprod[d]
            ker_num[d, path[d + 1], path[d]] += w
            cond_mass[d, path[d + 1]] += w

    with np.errstate(invalid="ignore"):
        marginals = [row / row.sum() for row in marg]  # NaN if the record is impossible
    kernels = []
    for d in range(depth):
        with np.errstate(invalid="ignore"):
            kernels.append(ker_num[d] / cond_mass[d][:, None])
    return kernels, marginals
