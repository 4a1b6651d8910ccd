"""Release acceptance checks, one test per numbered criterion.

Each test exercises a whole slice of the package — samplers, conditional
kernels, experiment commands — against an independent oracle or a stated
statistical tolerance, and prints one ``criterion N (...): PASS/FAIL`` line
(visible under ``pytest -s``; pytest echoes captured output on failure).
Sample sizes are large enough that the statistical gates sit many standard
deviations away from their thresholds; runtime budgets are generous on
purpose, the point is correctness at scale.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from cftp.chain import (
    KernelSequence,
    backward_product,
    check_absolute_probabilities,
    dobrushin_coefficient,
    find_minorization,
    total_variation,
)
from cftp.coupling import cftp, exact_coalescence_cdf
from cftp.experiments.config import ExperimentConfig
from cftp.experiments.runner import cmd_figure1, cmd_sample, cmd_table1
from cftp.hmm import (
    CachedConditionalKernels,
    EmissionModel,
    FiniteObservationSampler,
    HmmModel,
    ObservationStream,
    beta_bound,
    conditional_kernel_window,
    hmm_cftp,
)
from cftp.models import (
    TabularEmission,
    degenerate_absolute_probs,
    degenerate_rotation,
    drift_obs,
    gaussian_three_state,
    reducible_block,
    simulate_hmm,
)
from cftp.rng import RngStream
from helpers import (
    brute_force_window,
    dobrushin_by_row_pairs,
    random_kernel,
    random_kernel_sequence_source,
    stationary_by_solve,
)

SEED = 20260825

GAUSSIAN = {"name": "gaussian_three_state", "params": {"delta": 0.1}}


def _verdict(num: int, label: str, ok: bool, detail: str) -> None:
    print(f"criterion {num} ({label}): {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {num} ({label}): {detail}"


# ---------------------------------------------------------------------------
# 1. empirical coalescence-depth law vs the exact map-space enumeration


def test_criterion_1_coalescence_law_matches_exact_oracle():
    sequences = [
        ("2-state homogeneous",
         KernelSequence.homogeneous(random_kernel(np.random.default_rng(1101), 2)), 0),
        ("2-state nonhomogeneous",
         KernelSequence(random_kernel_sequence_source(7, 2), 2), 0),
        ("3-state homogeneous",
         KernelSequence.homogeneous(random_kernel(np.random.default_rng(1103), 3)), 0),
        ("3-state nonhomogeneous",
         KernelSequence(random_kernel_sequence_source(11, 3), 3), 2),
        ("3-state floored",
         KernelSequence(random_kernel_sequence_source(13, 3, floor=0.1), 3), 1),
    ]
    runs = 10**5
    max_depth = 20
    worst = 0.0
    for i, (label, seq, target) in enumerate(sequences):
        exact = exact_coalescence_cdf(seq, target, max_depth)
        rng = RngStream(SEED).substream(i)
        counts = np.zeros(max_depth + 2, dtype=int)
        for _ in range(runs):
            out = cftp(seq, target, rng, cutoff=max_depth)
            counts[out.coalescence_depth if out.coalesced else max_depth + 1] += 1
        empirical = np.cumsum(counts[1 : max_depth + 1]) / runs
        gap = float(np.abs(empirical - exact).max())
        assert gap <= 0.01, f"{label}: CDF gap {gap:.4f} at target {target}"
        worst = max(worst, gap)
    _verdict(
        1,
        "coalescence law vs exact oracle",
        worst <= 0.01,
        f"5 sequences x {runs} runs, worst CDF gap {worst:.4f} over depths 1..{max_depth} (tol 0.01)",
    )


# ---------------------------------------------------------------------------
# 2. output law of backward coupling on a fixed homogeneous chain


def test_criterion_2_output_law_matches_stationary_distribution():
    kernel = np.array([[0.9, 0.1], [0.2, 0.8]])
    pi = stationary_by_solve(kernel)
    assert np.allclose(pi, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)
    seq = KernelSequence.homogeneous(kernel)
    runs = 10**5
    rng = RngStream(SEED).substream(10)
    counts = np.zeros(2, dtype=int)
    for _ in range(runs):
        counts[cftp(seq, 0, rng, cutoff=500).sample] += 1
    tv = total_variation(counts / runs, pi)
    _verdict(
        2,
        "homogeneous output law",
        tv <= 0.01,
        f"TV(empirical, (2/3, 1/3)) = {tv:.5f} over {runs} runs (tol 0.01)",
    )


# ---------------------------------------------------------------------------
# 3. all-paths enumeration of a dense finite window


SIGNAL = np.array([[0.7, 0.3], [0.4, 0.6]])
TABLE = np.array([[0.8, 0.2], [0.3, 0.7]])
RECORD = [0, 1, 1, 0, 1, 0, 0, 1]


def test_criterion_3_dense_window_kernels_and_flow_identity():
    init = stationary_by_solve(SIGNAL)
    model = HmmModel(
        signal=KernelSequence.homogeneous(SIGNAL),
        emission=TabularEmission(TABLE, alphabet=[0, 1]),
        invariant_dist=init,
    )
    brute_kernels, marginals = brute_force_window(SIGNAL, TABLE, [0, 1], init, RECORD)
    lib_kernels = conditional_kernel_window(model, RECORD, upto=len(RECORD) - 2)
    assert len(brute_kernels) == len(lib_kernels) == len(RECORD) - 1
    kernel_gap = max(
        float(np.abs(bk - lk).max()) for bk, lk in zip(brute_kernels, lib_kernels)
    )
    # the enumerated smoothing laws must flow through the library's kernels:
    # law at depth d+1 pushed through the kernel at depth d is the law at d
    flow_gap = max(
        total_variation(marginals[d + 1] @ lib_kernels[d], marginals[d])
        for d in range(len(lib_kernels))
    )
    ok = kernel_gap <= 1e-10 and flow_gap <= 1e-10
    _verdict(
        3,
        "dense-window kernel identity",
        ok,
        f"kernel gap {kernel_gap:.2e}, flow residual {flow_gap:.2e} (tol 1e-10)",
    )


# ---------------------------------------------------------------------------
# 4. models built to defeat coupling actually defeat it


def test_criterion_4_counter_examples_never_coalesce_and_flow_is_non_unique():
    cutoff = 10**4
    runs = 100
    coalesced = {}
    for i, (name, model) in enumerate(
        (("rotation", degenerate_rotation()), ("reducible", reducible_block()))
    ):
        path = simulate_hmm(model, cutoff + 50, RngStream(SEED).substream(20 + 2 * i))
        kernels = CachedConditionalKernels(model, path.stream())
        rng = RngStream(SEED).substream(21 + 2 * i)
        coalesced[name] = sum(
            cftp(kernels, 0, rng, cutoff=cutoff).coalesced for _ in range(runs)
        )

    # the rotation's conditional chain carries a whole family of exact
    # absolute-probability sequences: residual exactly zero for w=0 and w=1,
    # yet the two families disagree at every depth
    parity = simulate_hmm(degenerate_rotation(), 299, RngStream(SEED).substream(24)).observations
    families = [degenerate_absolute_probs(w, parity) for w in (0.0, 1.0)]
    window = conditional_kernel_window(degenerate_rotation(), parity, upto=len(parity) - 2)
    seq = KernelSequence.from_list(window)
    residuals = [
        check_absolute_probabilities(seq, dists, range(len(window)), tol=0.0).max_residual
        for dists in families
    ]
    head_gap = total_variation(families[0][0], families[1][0])
    ok = (
        coalesced["rotation"] == 0
        and coalesced["reducible"] == 0
        and residuals == [0.0, 0.0]
        and head_gap == 1.0
    )
    _verdict(
        4,
        "counter-examples",
        ok,
        f"coalescences: rotation {coalesced['rotation']}, reducible {coalesced['reducible']} "
        f"(2 x {runs} runs at cutoff {cutoff}); flow residuals {residuals} for two "
        f"absolute-probability families with TV {head_gap:.0f} at the present",
    )


# ---------------------------------------------------------------------------
# 5. contraction and coalescence trends, well-specified vs drifting data


def test_criterion_5_well_specified_vs_drifting_data_trends(tmp_path):
    common = dict(
        model=GAUSSIAN,
        replicates=1000,
        cutoff=1000,
        seed=2,
        workers=1,
    )
    sim = cmd_figure1(
        ExperimentConfig(
            name="accept_sim",
            data={"source": "simulated", "length": 1100},
            out_dir=str(tmp_path / "sim"),
            **common,
        ),
        render_plots=False,
    )
    drift = cmd_figure1(
        ExperimentConfig(
            name="accept_drift",
            data={"source": "drift", "slope": 0.02},
            out_dir=str(tmp_path / "drift"),
            **common,
        ),
        render_plots=False,
    )
    threshold = sim.summary["depth_threshold"]
    assert threshold == drift.summary["depth_threshold"] == 200
    sim_frac = sim.summary["within_threshold_fraction"]
    drift_frac = drift.summary["within_threshold_fraction"]
    beta_sim = sim.betas[threshold]
    beta_drift = drift.betas[threshold]
    ok = (
        sim_frac == 1.0
        and beta_sim < 1e-6
        and 0.2 <= drift_frac <= 0.8
        and drift_frac < sim_frac
        and beta_drift >= 1e3 * beta_sim
    )
    _verdict(
        5,
        "well-specified vs drifting data",
        ok,
        f"coalescence within {threshold}: {sim_frac:.3f} vs {drift_frac:.3f}; "
        f"contraction at depth {threshold}: {beta_sim:.2e} vs {beta_drift:.2e}",
    )


# ---------------------------------------------------------------------------
# 6. anchored multi-sampling: dependence decay and the step-1 cost share


def test_criterion_6_dependence_decay_and_step1_share(tmp_path):
    config = ExperimentConfig(
        name="accept_table1",
        model=GAUSSIAN,
        data={"source": "simulated", "length": 1200},
        replicates=1,
        cutoff=1000,
        seed=5,
        out_dir=str(tmp_path),
        workers=1,
        options={"repetitions": 10},
    )
    res = cmd_table1(config, render_plots=False)

    dep_values = [v for _, v in res.dependence]
    dep_at_100 = dict(res.dependence)[100]
    dep_ok = (
        all(b < a for a, b in zip(dep_values, dep_values[1:])) and dep_at_100 < 1e-5
    )

    by_depth: dict[int, list] = {}
    for n, n_samples, _, mean_share, _ in res.timing_rows:
        by_depth.setdefault(n, []).append((n_samples, mean_share))
    share_ok = True
    worst_share = 0.0
    for cells in by_depth.values():
        shares = [s for _, s in sorted(cells)]
        share_ok = share_ok and all(b < a for a, b in zip(shares, shares[1:]))
        share_ok = share_ok and shares[-1] < 0.05
        worst_share = max(worst_share, shares[-1])
    _verdict(
        6,
        "anchored sampling trends",
        dep_ok and share_ok,
        f"pair dependence decreasing to {dep_at_100:.2e} at depth 100 (tol 1e-5); "
        f"step-1 share decreasing in N, worst {worst_share:.4f} at N=10000 (tol 0.05)",
    )


# ---------------------------------------------------------------------------
# 7. certificate bound on the contraction of conditional products


def test_criterion_7_contraction_bound_holds_on_random_windows():
    model = gaussian_three_state(0.1)
    # no one-step envelope exists (the kernel has zero corners), but the
    # two-step power has one — windows below span two observations each
    assert find_minorization(model.signal.at(0), 1) is None
    cert = find_minorization(model.signal.at(0), span_steps=2)
    assert cert is not None

    streams = [
        simulate_hmm(model, 60, RngStream(SEED).substream(30)).stream(),
        drift_obs(RngStream(SEED).substream(31), slope=0.02),
    ]
    checked = 0
    violations = 0
    min_slack = math.inf
    for stream in streams:
        kernels = conditional_kernel_window(model, stream, upto=51)
        obs = [stream.pull(d) for d in range(52)]
        for base in range(50):
            actual = dobrushin_coefficient(kernels[base + 1] @ kernels[base])
            bound = beta_bound(cert, model, [obs[base + 1], obs[base]])
            checked += 1
            if actual > bound:
                violations += 1
            min_slack = min(min_slack, bound - actual)
    _verdict(
        7,
        "contraction bound on conditional products",
        checked == 100 and violations == 0,
        f"{checked} windows (half on drifting data), {violations} violations, "
        f"min slack {min_slack:.3e}",
    )


# ---------------------------------------------------------------------------
# 8. property suites at their stated tolerances


def test_criterion_8_property_suites(tmp_path):
    failures: list[str] = []

    def check(cond: bool, what: str) -> None:
        if not cond:
            failures.append(what)

    gen = np.random.default_rng(SEED)
    base = gaussian_three_state(0.1)

    # row stochasticity (1e-12), on random kernels and on conditional kernels
    window_obs = simulate_hmm(base, 29, RngStream(SEED).substream(40)).observations
    window = conditional_kernel_window(base, window_obs)
    assert len(window) == 30
    row_gap = max(
        float(np.abs(k.sum(axis=1) - 1.0).max())
        for k in [random_kernel(gen, s) for s in (2, 3, 5, 9) for _ in range(5)] + window
    )
    check(row_gap <= 1e-12, f"row sums off by {row_gap:.2e}")

    # Dobrushin coefficient: matches the row-pair oracle, submultiplicative
    # over products, contracts distributions (1e-10)
    oracle_gap, sub_gap, con_gap = 0.0, 0.0, 0.0
    for size in (2, 3, 5, 9):
        for _ in range(5):
            a, b = random_kernel(gen, size), random_kernel(gen, size)
            beta_a = dobrushin_coefficient(a)
            oracle_gap = max(oracle_gap, abs(beta_a - dobrushin_by_row_pairs(a)))
            sub_gap = max(
                sub_gap, dobrushin_coefficient(a @ b) - beta_a * dobrushin_coefficient(b)
            )
            mu = gen.dirichlet(np.ones(size))
            nu = gen.dirichlet(np.ones(size))
            con_gap = max(
                con_gap,
                total_variation(mu @ a, nu @ a) - beta_a * total_variation(mu, nu),
            )
    check(oracle_gap <= 1e-12, f"coefficient vs row-pair oracle off by {oracle_gap:.2e}")
    check(sub_gap <= 1e-10, f"submultiplicativity violated by {sub_gap:.2e}")
    check(con_gap <= 1e-10, f"contraction violated by {con_gap:.2e}")

    # product associativity (1e-12): splitting a backward product anywhere
    # gives the same matrix
    seq = KernelSequence(random_kernel_sequence_source(17, 3), 3)
    assoc_gap = max(
        float(
            np.abs(
                backward_product(seq, a, c)
                - backward_product(seq, a, b) @ backward_product(seq, b, c)
            ).max()
        )
        for a, b, c in ((20, 12, 0), (15, 7, 3), (9, 9, 0), (30, 1, 0))
    )
    check(assoc_gap <= 1e-12, f"product associativity off by {assoc_gap:.2e}")

    # normalization invariance (1e-12): rescaling every emission density by an
    # arbitrary positive per-depth constant cannot move the conditional kernels
    class _Rescaled(EmissionModel):
        positive = True

        def __init__(self, inner, scales):
            self._inner = inner
            self._scales = scales

        def density(self, depth, state, y):
            return float(self._scales[depth]) * self._inner.density(depth, state, y)

        def density_vector(self, depth, y):
            return self._scales[depth] * self._inner.density_vector(depth, y)

    scales = 10.0 ** gen.uniform(-6.0, 6.0, size=len(window_obs))
    rescaled = HmmModel(
        signal=base.signal,
        emission=_Rescaled(base.emission, scales),
        invariant_dist=base.invariant_dist,
    )
    scale_gap = max(
        float(np.abs(p - s).max())
        for p, s in zip(window, conditional_kernel_window(rescaled, window_obs))
    )
    check(scale_gap <= 1e-12, f"emission rescaling moved kernels by {scale_gap:.2e}")

    # observation laziness: a run touches exactly the depths it needed
    lazy_obs = simulate_hmm(base, 800, RngStream(SEED).substream(41)).observations
    lazy_ok = True
    for i, target in enumerate((0, 5)):
        stream = ObservationStream.from_array(lazy_obs)
        out = hmm_cftp(base, stream, target, RngStream(SEED).substream(42 + i), cutoff=600)
        lazy_ok = lazy_ok and out.coalesced
        lazy_ok = lazy_ok and (
            out.observations_used
            == stream.pulls_made
            == target + out.coalescence_depth + 1
        )
    check(lazy_ok, "observation pulls differ from the depths the runs needed")

    # seed reproducibility: same config, two runs, byte-identical outputs
    byte_pairs = []
    for tag in ("a", "b"):
        res = cmd_sample(
            ExperimentConfig(
                name="accept_repro",
                model=GAUSSIAN,
                data={"source": "simulated", "length": 450},
                replicates=60,
                cutoff=400,
                seed=9,
                out_dir=str(tmp_path / tag),
                workers=1,
            ),
            render_plots=False,
        )
        byte_pairs.append(
            tuple(Path(res.paths[k]).read_bytes() for k in ("runs", "summary"))
        )
    check(
        byte_pairs[0] == byte_pairs[1] and all(byte_pairs[0]),
        "same seed produced different bytes",
    )

    _verdict(
        8,
        "property suites",
        not failures,
        "; ".join(failures)
        if failures
        else "row sums 1e-12, contraction coefficient 1e-10, associativity 1e-12, "
        "emission-scale invariance 1e-12, lazy pulls exact, reruns byte-identical",
    )


# ---------------------------------------------------------------------------
# 9. law of the finite-record fallback sampler


def test_criterion_9_finite_record_sampler_law():
    model = gaussian_three_state(0.1)
    # this data substream realizes a record whose smoothing law spreads real
    # mass over all three states, so the comparison binds on every coordinate
    obs = simulate_hmm(model, 49, RngStream(SEED).substream(55)).observations
    assert len(obs) == 50

    # the target law, from scratch: invariant prior at the record's edge,
    # forward filter down to the present
    kernel = np.array([[0.9, 0.1, 0.0], [0.05, 0.9, 0.05], [0.0, 0.1, 0.9]])
    invariant = np.array([0.25, 0.5, 0.25])
    means = np.array([0.0, 1.0, 0.0])

    def dens(y: float) -> np.ndarray:
        return np.exp(-0.5 * (y - means) ** 2) / math.sqrt(2.0 * math.pi)

    law = invariant * dens(obs[49])
    for d in range(48, -1, -1):
        law = (law @ kernel) * dens(obs[d])
    law = law / law.sum()

    # cross-check: the edge law pushed through the conditional-kernel product
    # is the same distribution
    raw = np.ones(3)
    for d in range(49):
        raw = kernel @ (dens(obs[d]) * raw)
    edge = invariant * dens(obs[49]) * raw
    pushed = (edge / edge.sum()) @ backward_product(
        KernelSequence.from_list(conditional_kernel_window(model, obs, upto=48)), 49, 0
    )
    assert total_variation(law, pushed) <= 1e-10

    draws = FiniteObservationSampler(model, obs).draw_many(10**5, RngStream(SEED).substream(56))
    emp = np.bincount(draws, minlength=3) / len(draws)
    tv = total_variation(emp, law)
    _verdict(
        9,
        "finite-record sampler law",
        tv <= 0.02,
        f"TV(empirical, forward-filter law) = {tv:.5f} over 1e5 draws (tol 0.02), "
        f"law {np.round(law, 4).tolist()}",
    )
