"""Experiment commands: replicated coupling runs, trend studies, diagnostics.

Every command takes a resolved :class:`ExperimentConfig`, writes its artifacts
under ``config.out_dir`` and returns a small result object with the written
paths and the headline numbers.  Replicate ``r`` always draws from RNG
substream ``r + 1``; substream ``0`` is reserved for realizing the data, so
results are invariant to how replicates are distributed over workers.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cftp import coupling
from cftp.chain import (
    KernelSequence,
    dobrushin_coefficient,
    find_minorization,
    stenflo_coefficient,
    weak_ergodicity_series,
)
from cftp.experiments.config import (
    ExperimentConfig,
    build_model,
    build_observations,
    config_hash,
    ensure_out_dir,
)
from cftp.experiments.output import jsonable, write_csv, write_json
from cftp.hmm import (
    CachedConditionalKernels,
    HmmModel,
    beta_bound,
    hmm_cftp,
    multi_sample,
    pairwise_dependence,
    sufficient_conditions_report,
)
from cftp.rng import RngStream

RUNS_COLUMNS = (
    "replicate",
    "outcome",
    "sample",
    "coalescence_depth",
    "steps_used",
    "observations_used",
)
TIMING_COLUMNS = ("replicate", "seconds")


def _model_and_stream(config: ExperimentConfig):
    model = build_model(config)
    observations = build_observations(config, model)
    if observations is not None and not isinstance(model, HmmModel):
        raise ValueError(
            "a data source is configured but the model has no emissions; "
            "use data.source = 'none' for bare-chain runs"
        )
    return model, observations


def _one_replicate(config, model, observations, kernels, target, replicate) -> dict:
    rng = RngStream(config.seed).substream(replicate + 1)
    started = time.perf_counter()
    observations_used = None
    if kernels is not None:
        out = coupling.cftp(kernels, target, rng, config.cutoff)
    elif observations is None:
        seq = model.signal if isinstance(model, HmmModel) else model
        out = coupling.cftp(seq, target, rng, config.cutoff)
    else:
        out = hmm_cftp(model, observations.fresh_view(), target, rng, config.cutoff)
        observations_used = out.observations_used
    seconds = time.perf_counter() - started
    return {
        "replicate": replicate,
        "outcome": "coalesced" if out.coalesced else "cutoff",
        "sample": out.sample,
        "coalescence_depth": out.coalescence_depth,
        "steps_used": out.steps_used,
        "observations_used": observations_used,
        "seconds": seconds,
    }


def _replicate_worker(payload: dict) -> list[dict]:
    """Top-level worker: rebuilds model and data, runs a block of replicates.

    ``payload['shared_kernels']`` selects the shared-kernel fast path: the
    conditional kernels for the fixed record are computed once per process
    and every replicate couples through them (the kernels are deterministic
    given the record, so sharing cannot change any draw).
    """
    config = ExperimentConfig.from_dict(payload["config"])
    model, observations = _model_and_stream(config)
    target = int(config.options.get("target_depth", 0))
    kernels = None
    if payload.get("shared_kernels"):
        kernels = CachedConditionalKernels(model, observations.fresh_view())
    return [
        _one_replicate(config, model, observations, kernels, target, r)
        for r in payload["replicates"]
    ]


def _run_replicates(config: ExperimentConfig, shared_kernels: bool = False) -> list[dict]:
    ids = list(range(config.replicates))
    payloads = [
        {
            "config": config.to_dict(),
            "replicates": list(chunk),
            "shared_kernels": shared_kernels,
        }
        for chunk in np.array_split(ids, min(config.workers, len(ids)))
        if len(chunk)
    ]
    if config.workers == 1:
        blocks = [_replicate_worker(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            blocks = list(pool.map(_replicate_worker, payloads))
    records = [rec for block in blocks for rec in block]
    records.sort(key=lambda rec: rec["replicate"])
    return records


def _write_runs_and_timing(config, records, out_dir: Path, cfg_hash: str, stem: str):
    runs_path = write_csv(
        out_dir / f"{stem}_runs.csv",
        f"cftp.{stem}.runs",
        cfg_hash,
        RUNS_COLUMNS,
        ([rec[c] for c in RUNS_COLUMNS] for rec in records),
    )
    timing_path = write_csv(
        out_dir / f"{stem}_timing.csv",
        f"cftp.{stem}.timing",
        cfg_hash,
        TIMING_COLUMNS,
        ([rec["replicate"], rec["seconds"]] for rec in records),
    )
    return runs_path, timing_path


def _depth_quantiles(depths: list[int]) -> dict:
    if not depths:
        return {"p50": None, "p90": None, "p99": None, "max": None}
    arr = np.asarray(depths, dtype=float)
    return {
        "p50": float(np.quantile(arr, 0.5)),
        "p90": float(np.quantile(arr, 0.9)),
        "p99": float(np.quantile(arr, 0.99)),
        "max": int(arr.max()),
    }


def _sample_law(records, size: int):
    counts = np.zeros(size, dtype=int)
    for rec in records:
        if rec["outcome"] == "coalesced":
            counts[rec["sample"]] += 1
    total = counts.sum()
    law = (counts / total).tolist() if total else [None] * size
    return counts.tolist(), law


@dataclass(frozen=True)
class SampleResult:
    records: list
    summary: dict
    paths: dict


def cmd_sample(config: ExperimentConfig, render_plots: bool = True) -> SampleResult:
    """R independent seeded coupling runs; per-run records plus a summary.

    With emissions and data configured each replicate runs the conditional
    sampler over a fresh lazy view of the shared record (so the per-replicate
    observation counts are honest); without data it couples the bare chain.
    """
    model, observations = _model_and_stream(config)
    records = _run_replicates(config)
    out_dir = ensure_out_dir(config)
    cfg_hash = config_hash(config)
    runs_path, timing_path = _write_runs_and_timing(
        config, records, out_dir, cfg_hash, config.name
    )

    size = model.size
    depths = [r["coalescence_depth"] for r in records if r["outcome"] == "coalesced"]
    failures = sum(1 for r in records if r["outcome"] == "cutoff")
    counts, law = _sample_law(records, size)
    summary = {
        "schema": "cftp.sample.summary",
        "version": 1,
        "config": cfg_hash,
        "config_payload": config.payload(),
        "replicates": config.replicates,
        "target_depth": int(config.options.get("target_depth", 0)),
        "state_count": size,
        "sample_counts": counts,
        "sample_law": law,
        "failure_fraction": failures / config.replicates,
        "depth_quantiles": _depth_quantiles(depths),
        "observations_used_max": max(
            (r["observations_used"] for r in records if r["observations_used"] is not None),
            default=None,
        ),
    }
    summary_path = write_json(out_dir / f"{config.name}_summary.json", jsonable(summary))
    paths = {"runs": runs_path, "timing": timing_path, "summary": summary_path}
    if render_plots:
        from cftp.experiments import plots

        paths["plot"] = plots.render_sample(records, size, out_dir / f"{config.name}_sample.png")
    return SampleResult(records=records, summary=summary, paths=paths)


@dataclass(frozen=True)
class Figure1Result:
    betas: list
    records: list
    summary: dict
    paths: dict


def cmd_figure1(config: ExperimentConfig, render_plots: bool = True) -> Figure1Result:
    """Contraction curve and coalescence-depth histogram on one fixed record.

    Emits ``beta.csv`` with the Dobrushin coefficient of the conditional
    product from depth d to the present for d = 0..max_beta_depth, and
    ``depths.csv`` with the histogram of coalescence depths over R replicate
    runs on the same record (one ``cutoff`` row collects the failures, so the
    counts always sum to R).
    """
    model, observations = _model_and_stream(config)
    if observations is None:
        raise ValueError("figure1 needs a data source (simulated, random_walk, drift, csv)")
    max_beta_depth = int(config.options.get("max_beta_depth", 300))

    kernels = CachedConditionalKernels(model, observations.fresh_view())
    betas = []
    prod = np.eye(model.size)
    for depth in range(max_beta_depth + 1):
        betas.append(dobrushin_coefficient(prod))
        if depth < max_beta_depth:
            prod = kernels.at(depth) @ prod
    records = _run_replicates(config, shared_kernels=True)

    out_dir = ensure_out_dir(config)
    cfg_hash = config_hash(config)
    beta_path = write_csv(
        out_dir / f"{config.name}_beta.csv",
        "cftp.figure1.beta",
        cfg_hash,
        ("depth", "beta"),
        ((d, b) for d, b in enumerate(betas)),
    )
    coalesced = [r for r in records if r["outcome"] == "coalesced"]
    hist: dict[int, int] = {}
    for rec in coalesced:
        hist[rec["coalescence_depth"]] = hist.get(rec["coalescence_depth"], 0) + 1
    failures = len(records) - len(coalesced)
    hist_rows = [("coalesced", d, hist[d]) for d in sorted(hist)]
    if failures:
        hist_rows.append(("cutoff", None, failures))
    depths_path = write_csv(
        out_dir / f"{config.name}_depths.csv",
        "cftp.figure1.depths",
        cfg_hash,
        ("outcome", "depth", "count"),
        hist_rows,
    )
    _, timing_path = _write_runs_and_timing(
        config, records, out_dir, cfg_hash, f"{config.name}_replicates"
    )

    threshold = int(config.options.get("depth_threshold", 200))
    within = sum(1 for r in coalesced if r["coalescence_depth"] <= threshold)
    below_tol = next((d for d, b in enumerate(betas) if b < 1e-6), None)
    summary = {
        "schema": "cftp.figure1.summary",
        "version": 1,
        "config": cfg_hash,
        "config_payload": config.payload(),
        "replicates": config.replicates,
        "coalesced_fraction": len(coalesced) / len(records),
        "depth_threshold": threshold,
        "within_threshold_fraction": within / len(records),
        "beta_final": betas[-1],
        "beta_first_below_1e6": below_tol,
        "depth_quantiles": _depth_quantiles([r["coalescence_depth"] for r in coalesced]),
    }
    summary_path = write_json(out_dir / f"{config.name}_summary.json", jsonable(summary))
    paths = {
        "beta": beta_path,
        "depths": depths_path,
        "timing": timing_path,
        "summary": summary_path,
    }
    if render_plots:
        from cftp.experiments import plots

        values = [observations.pull(d) for d in range(max_beta_depth + 1)]
        paths["plot"] = plots.render_figure1(
            values, betas, records, out_dir / f"{config.name}_figure1.png"
        )
    return Figure1Result(betas=betas, records=records, summary=summary, paths=paths)


@dataclass(frozen=True)
class Table1Result:
    dependence: list
    timing_rows: list
    summary: dict
    paths: dict


def cmd_table1(config: ExperimentConfig, render_plots: bool = True) -> Table1Result:
    """Anchor-dependence decay and the step-1 share of the two-step sampler.

    The dependence column is deterministic and lands in ``dependence.csv``;
    everything timing-derived (the mean/std of the step-1 CPU share over the
    repetitions) is segregated into ``step1_timing.csv``.  The timing loop is
    never parallelized — concurrent replicates would corrupt the shares.
    """
    model, observations = _model_and_stream(config)
    if observations is None:
        raise ValueError("table1 needs a data source")
    opts = config.options
    target_depths = [int(n) for n in opts.get("target_depths", (5, 10, 25, 50, 100))]
    sample_sizes = [int(n) for n in opts.get("sample_sizes", (100, 1000, 10000))]
    repetitions = int(opts.get("repetitions", 5))
    span = int(opts.get("span", 1000))

    dependence = [
        (n, float(pairwise_dependence(model, observations.fresh_view(), n, span=span)))
        for n in target_depths
    ]

    # discard one warm-up before measuring anything; running it at the
    # deepest target validates and caches the signal kernels that every
    # timed repetition will read
    multi_sample(
        model,
        observations.fresh_view(),
        max(target_depths),
        min(sample_sizes),
        RngStream(config.seed).substream(1),
        config.cutoff,
    )
    timing_rows = []
    stream_index = 2
    for n in target_depths:
        for n_samples in sample_sizes:
            shares = []
            for _ in range(repetitions):
                out = multi_sample(
                    model,
                    observations.fresh_view(),
                    n,
                    n_samples,
                    RngStream(config.seed).substream(stream_index),
                    config.cutoff,
                )
                shares.append(out.step1_share)
                stream_index += 1
            timing_rows.append(
                (
                    n,
                    n_samples,
                    repetitions,
                    float(np.mean(shares)),
                    float(np.std(shares)),
                )
            )

    out_dir = ensure_out_dir(config)
    cfg_hash = config_hash(config)
    dependence_path = write_csv(
        out_dir / f"{config.name}_dependence.csv",
        "cftp.table1.dependence",
        cfg_hash,
        ("target_depth", "dependence"),
        dependence,
    )
    timing_path = write_csv(
        out_dir / f"{config.name}_step1_timing.csv",
        "cftp.table1.step1_timing",
        cfg_hash,
        ("target_depth", "n_samples", "repetitions", "mean_step1_share", "std_step1_share"),
        timing_rows,
    )
    summary = {
        "schema": "cftp.table1.summary",
        "version": 1,
        "config": cfg_hash,
        "config_payload": config.payload(),
        "target_depths": target_depths,
        "sample_sizes": sample_sizes,
        "dependence": {str(n): v for n, v in dependence},
        "dependence_monotone": all(
            dependence[i + 1][1] <= dependence[i][1] for i in range(len(dependence) - 1)
        ),
    }
    summary_path = write_json(out_dir / f"{config.name}_summary.json", jsonable(summary))
    paths = {
        "dependence": dependence_path,
        "step1_timing": timing_path,
        "summary": summary_path,
    }
    if render_plots:
        from cftp.experiments import plots

        paths["plot"] = plots.render_table1(
            dependence, timing_rows, out_dir / f"{config.name}_table1.png"
        )
    return Table1Result(
        dependence=dependence, timing_rows=timing_rows, summary=summary, paths=paths
    )


@dataclass(frozen=True)
class DiagnoseResult:
    report: dict
    paths: dict


def cmd_diagnose(config: ExperimentConfig, render_plots: bool = True) -> DiagnoseResult:
    """Ergodicity diagnostics for the configured model (and record, if any)."""
    model, observations = _model_and_stream(config)
    signal = model.signal if isinstance(model, HmmModel) else model
    opts = config.options
    probe_depths = [int(d) for d in opts.get("probe_depths", (0, 1, 2))]
    checkpoints = [int(c) for c in opts.get("series_checkpoints", tuple(range(0, 22, 2)))]

    terms = weak_ergodicity_series(signal, checkpoints)
    partial_sums = np.cumsum(terms).tolist()
    minorization = None
    for span in range(1, signal.size * signal.size + 1):
        cert = find_minorization(signal.at(0), span_steps=span)
        if cert is not None:
            minorization = {
                "span": span,
                "eps_minus": cert.eps_minus,
                "eps_plus": cert.eps_plus,
                "nu": cert.nu.tolist(),
            }
            break

    report = {
        "schema": "cftp.diagnose.report",
        "version": 1,
        "config": config_hash(config),
        "config_payload": config.payload(),
        "state_count": signal.size,
        "stenflo_coefficient": float(stenflo_coefficient(signal, probe_depths)),
        "dobrushin_at_probes": {
            str(d): float(dobrushin_coefficient(signal.at(d))) for d in probe_depths
        },
        "weak_ergodicity_terms": [float(t) for t in terms],
        "weak_ergodicity_partial_sums": [float(s) for s in partial_sums],
        "minorization": minorization,
    }

    if isinstance(model, HmmModel):
        probe_obs = opts.get("probe_observations")
        if probe_obs is None and observations is not None:
            probe_obs = [observations.pull(d) for d in range(3)]
        cond = sufficient_conditions_report(
            model,
            probe_depths=tuple(probe_depths),
            probe_observations=tuple(probe_obs or ()),
        )
        report["sufficient_conditions"] = {
            "surely_successful": cond.surely_successful,
            "as_successful_evidence": cond.as_successful_evidence,
            "details": cond.details,
        }

    if isinstance(model, HmmModel) and observations is not None:
        report["conditional_probes"] = _conditional_probes(
            config, model, observations, minorization
        )

    out_dir = ensure_out_dir(config)
    path = write_json(out_dir / f"{config.name}_diagnosis.json", jsonable(report))
    return DiagnoseResult(report=report, paths={"report": path})


def _conditional_probes(config, model, observations, minorization) -> dict:
    """Realized conditional contraction on probe windows, with bounds if possible.

    ``beta_to_present`` reports the Dobrushin coefficient of the conditional
    product from each probe depth down to the present; ``windows`` compares
    the realized coefficient of short conditional products against the
    certificate bound wherever the bound is computable (it needs the emission
    densities along the window to be positive).
    """
    opts = config.options
    window_count = int(opts.get("probe_windows", 20))
    beta_depths = sorted(int(d) for d in opts.get("beta_probe_depths", (10, 50, 200)))
    span = minorization["span"] if minorization else None

    kernels = CachedConditionalKernels(model, observations.fresh_view())
    stream = observations.fresh_view()

    beta_to_present = {}
    prod = np.eye(model.size)
    for depth in range(max(beta_depths) + 1):
        if depth in beta_depths:
            beta_to_present[str(depth)] = float(dobrushin_coefficient(prod))
        prod = kernels.at(depth) @ prod

    windows = []
    if span is not None:
        cert = find_minorization(model.signal.at(0), span_steps=span)
        for base in range(window_count):
            prod = np.eye(model.size)
            for d in range(base, base + span):
                prod = kernels.at(d) @ prod
            actual = float(dobrushin_coefficient(prod))
            window_obs = [stream.pull(d) for d in range(base + span - 1, base - 1, -1)]
            try:
                bound = float(beta_bound(cert, model, window_obs))
            except ValueError:
                bound = None
            windows.append(
                {
                    "base_depth": base,
                    "actual_beta": actual,
                    "bound": bound,
                    "bounded": None if bound is None else actual <= bound + 1e-12,
                }
            )
    return {"beta_to_present": beta_to_present, "windows": windows}
