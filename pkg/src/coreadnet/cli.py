"""Command-line front end for the co-readership analysis pipeline.

Subcommands:

* ``synth``   - generate a synthetic usage log plus ground truth
* ``analyze`` - ingest logs, build matrices, eigendecompose, emit spectra
* ``sweep``   - repeat the analysis over nested sample sizes and fit the
  scaling exponent of the leading eigenvalue
* ``probe``   - sphere-neighborhood community query over a prior analysis
* ``rerun``   - replay any of the above from its manifest.json

Every run writes a manifest capturing all parameters and the seed; replaying
a manifest reproduces the CSV outputs byte for byte. CSV files carry plot
data, JSON files carry structured summaries.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import communities, coread, logstore, population, spectra, synth

DEFAULT_TAGS_ARG = ",".join(logstore.DEFAULT_JOURNAL_TAGS)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    """Shortest round-trip decimal form, stable across runs."""
    return repr(float(x))


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_manifest(out_dir: Path, command: str, params: dict) -> None:
    _write_json(out_dir / "manifest.json", {"command": command, "params": params})


def _write_eigenvalues_csv(path: Path, eigenvalues: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rank", "eigenvalue"])
        for rank, value in enumerate(eigenvalues, start=1):
            writer.writerow([rank, _fmt(value)])


def _write_density_csv(path: Path, density: spectra.SpectralDensity) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bin_lo", "bin_hi", "rho"])
        edges = density.bin_edges
        for lo, hi, rho in zip(edges[:-1], edges[1:], density.density):
            writer.writerow([_fmt(lo), _fmt(hi), _fmt(rho)])


def _write_scaling_csv(path: Path, rows: list[tuple[int, float, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n_s", "epsilon1", "R_stat"])
        for n_s, eps1, r_stat in rows:
            writer.writerow([n_s, _fmt(eps1), _fmt(r_stat)])


def _write_points_csv(path: Path, cloud: communities.ProjectionCloud) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "cookie_id"] + [f"c{i + 1}" for i in range(cloud.k)])
        for row, cookie_id in enumerate(cloud.users):
            writer.writerow(
                [row + 1, cookie_id] + [_fmt(c) for c in cloud.coords[row]]
            )


# ---------------------------------------------------------------------------
# shared pipeline stages
# ---------------------------------------------------------------------------


def _ingest(params: dict, verbose: bool) -> population.Sample:
    """Log files -> ranked sample. Raises _StageFailure naming the stage."""
    stage = "parse"
    try:
        events: list[logstore.AccessEvent] = []
        for log_path in params["logs"]:
            result = logstore.parse_log_file(
                log_path, params["max_malformed_fraction"]
            )
            if result.malformed_count:
                print(
                    f"warning: {result.malformed_count} malformed line(s) in "
                    f"{log_path} (first at line {result.first_malformed_line})",
                    file=sys.stderr,
                )
            events.extend(result.events)
        if verbose:
            print(f"parsed {len(events)} events", file=sys.stderr)

        stage = "dedup"
        journal_filter = logstore.JournalFilter(tuple(params["tags"]))
        period = logstore.DedupPeriod(params["period"])
        profiles = logstore.dedup_reads(events, journal_filter, period)
        if verbose:
            print(f"deduplicated into {len(profiles)} user profiles", file=sys.stderr)

        stage = "population"
        rule = population.PopulationRule(
            min_rate=params["min_rate"],
            max_rate=params["max_rate"],
            rate_basis=population.RateBasis(params["rate_basis"]),
        )
        qualified = population.filter_population(
            profiles, rule, params.get("interval_months")
        )
        if len(qualified) < 2:
            raise ValueError(
                f"population has {len(qualified)} qualifying user(s); need at least 2"
            )
        if verbose:
            print(f"{len(qualified)} users qualify", file=sys.stderr)

        stage = "sample"
        return population.draw_sample(qualified, params["ns"])
    except Exception as err:
        raise _StageFailure(stage, err) from err


class _StageFailure(Exception):
    def __init__(self, stage: str, err: Exception):
        super().__init__(f"error in {stage} stage: {err}")
        self.stage = stage


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def _run_synth(params: dict) -> int:
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "synth", params)
    config = synth.SynthConfig(
        **{k: v for k, v in params.items() if k != "out" and k != "verbose"}
    )
    log_text, truth = synth.generate(config)
    with open(out_dir / "events.log", "w", encoding="utf-8", newline="\n") as handle:
        handle.write(log_text)
    _write_json(out_dir / "truth.json", truth.to_json_dict())
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    merged = dict(synth.SynthConfig().to_json_dict())
    # population size and corpus size must be stated, not defaulted
    merged["n_users"] = None
    merged["n_papers"] = None
    if args.config:
        with open(args.config, encoding="utf-8") as handle:
            file_config = json.load(handle)
        unknown = set(file_config) - set(merged)
        if unknown:
            print(f"synth: error: unknown config keys {sorted(unknown)}", file=sys.stderr)
            return 2
        merged.update(file_config)
    explicit = {
        "n_users": args.users,
        "n_papers": args.papers,
        "reads_mean": args.reads_mean,
        "reads_dispersion": args.reads_dispersion,
        "attachment_bias": args.bias,
        "noise_users": args.noise_users,
        "months": args.months,
        "start_month": args.start_month,
        "seed": args.seed,
    }
    merged.update({k: v for k, v in explicit.items() if v is not None})
    for required in ("n_users", "n_papers"):
        if merged[required] is None:
            flag = "--users" if required == "n_users" else "--papers"
            print(f"usage: coreadnet synth ... \nsynth: error: {flag} is required "
                  "(flag or config file)", file=sys.stderr)
            return 2
    merged["out"] = str(args.out)
    try:
        return _run_synth(merged)
    except synth.SynthConfigError as err:
        print(f"synth: error in config stage: {err}", file=sys.stderr)
        return 1


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def _run_analyze(params: dict) -> int:
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "analyze", params)
    verbose = params.get("verbose", False)
    try:
        sample = _ingest(params, verbose)

        stage = "coread"
        try:
            incidence = coread.build_incidence(sample)
            matrices = coread.build_coread(incidence, params["dense_threshold"])
            if params.get("export_coread"):
                coread.export_coread(matrices, out_dir / "coread.txt")

            stage = "spectra"
            t0 = time.perf_counter()
            summary = spectra.eigendecompose(matrices, params["dense_threshold"])
            if verbose:
                print(
                    f"eigendecomposed n_s={summary.n_s} in "
                    f"{time.perf_counter() - t0:.2f}s",
                    file=sys.stderr,
                )

            stage = "density"
            density = None
            if summary.full:
                bins = params["bins"]
                density = spectra.spectral_density(
                    summary, "auto" if bins == "auto" else int(bins)
                )
            else:
                print(
                    "warning: partial spectrum, skipping density.csv", file=sys.stderr
                )

            r_statistic: float | None
            try:
                r_statistic = spectra.separation_statistic(summary)
            except spectra.UndefinedStatisticError as err:
                print(f"warning: separation statistic: {err}", file=sys.stderr)
                r_statistic = None

            stage = "project"
            k = min(params["k"], summary.eigenvectors.shape[1])
            cloud = communities.project(matrices, summary, k)

            stage = "write"
            _write_eigenvalues_csv(out_dir / "eigenvalues.csv", summary.eigenvalues)
            if density is not None:
                _write_density_csv(out_dir / "density.csv", density)
            _write_json(
                out_dir / "summary.json",
                {
                    "n_s": summary.n_s,
                    "epsilon1": summary.epsilon1,
                    "r_statistic": r_statistic,
                    "trace_residual": summary.trace_residual if summary.full else None,
                },
            )
            sample.to_csv(out_dir / "sample.csv")
            _write_json(out_dir / "sample.json", sample.to_json_dict())
            np.savez(out_dir / "cloud.npz", coords=cloud.coords)
        except Exception as err:
            raise _StageFailure(stage, err) from err
    except _StageFailure as failure:
        print(f"analyze: {failure}", file=sys.stderr)
        return 1
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    params = {
        "logs": [str(p) for p in args.log],
        "tags": args.tags.split(","),
        "min_rate": args.min_rate,
        "max_rate": args.max_rate,
        "rate_basis": args.rate_basis,
        "interval_months": args.interval_months,
        "period": args.period,
        "max_malformed_fraction": args.max_malformed_fraction,
        "ns": args.ns,
        "bins": args.bins,
        "k": args.k,
        "dense_threshold": args.dense_threshold,
        "export_coread": args.export_coread,
        "seed": args.seed,
        "out": str(args.out),
        "verbose": args.verbose,
    }
    return _run_analyze(params)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _run_sweep(params: dict) -> int:
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "sweep", params)
    verbose = params.get("verbose", False)

    sizes = sorted(set(params["sizes"]))
    if len(sizes) < len(params["sizes"]):
        print(
            f"warning: duplicate sweep sizes removed: using {sizes}", file=sys.stderr
        )

    try:
        ingest_params = dict(params)
        ingest_params["ns"] = max(sizes)
        sample = _ingest(ingest_params, verbose)

        stage = "sweep"
        try:
            if sample.size < max(sizes):
                raise ValueError(
                    f"sweep size {max(sizes)} exceeds the qualifying population "
                    f"({sample.size} users)"
                )
            summaries = spectra.nested_sweep(sample, sizes, params["dense_threshold"])

            rows = []
            points = []
            for summary in summaries:
                try:
                    r_stat = spectra.separation_statistic(summary)
                except spectra.UndefinedStatisticError:
                    r_stat = math.nan
                rows.append((summary.n_s, summary.epsilon1, r_stat))
                points.append((summary.n_s, summary.epsilon1))

            stage = "fit"
            fit_data: dict
            try:
                fit = spectra.fit_alpha(points)
                fit_data = {"alpha": fit.alpha, "r_squared": fit.r_squared}
            except ValueError as err:
                print(f"warning: scaling fit skipped: {err}", file=sys.stderr)
                fit_data = {"alpha": None, "r_squared": None, "note": str(err)}

            stage = "write"
            _write_scaling_csv(out_dir / "scaling.csv", rows)
            _write_json(out_dir / "fit.json", fit_data)
        except Exception as err:
            raise _StageFailure(stage, err) from err
    except _StageFailure as failure:
        print(f"sweep: {failure}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        print(f"sweep: error: bad --sizes value {args.sizes!r}", file=sys.stderr)
        return 2
    params = {
        "logs": [str(p) for p in args.log],
        "tags": args.tags.split(","),
        "min_rate": args.min_rate,
        "max_rate": args.max_rate,
        "rate_basis": args.rate_basis,
        "interval_months": args.interval_months,
        "period": args.period,
        "max_malformed_fraction": args.max_malformed_fraction,
        "sizes": sizes,
        "dense_threshold": args.dense_threshold,
        "seed": args.seed,
        "out": str(args.out),
        "verbose": args.verbose,
    }
    return _run_sweep(params)


# ---------------------------------------------------------------------------
# probe
# ---------------------------------------------------------------------------


def _run_probe(params: dict) -> int:
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "probe", params)
    run_dir = Path(params["run"])
    try:
        stage = "load"
        try:
            with np.load(run_dir / "cloud.npz") as payload:
                coords = payload["coords"]
            with open(run_dir / "sample.json", encoding="utf-8") as handle:
                sample = population.Sample.from_json_dict(json.load(handle))
            cloud = communities.ProjectionCloud(
                k=coords.shape[1],
                coords=coords,
                users=list(sample.users),
                index_of=dict(sample.index_of),
            )

            stage = "query"
            center = params["center"]
            if len(center) != cloud.k:
                raise ValueError(
                    f"--center has dimension {len(center)}, "
                    f"projection space has k={cloud.k}"
                )
            members = communities.sphere_query(cloud, center, params["radius"])

            stage = "report"
            citations = (
                communities.CitationTable.from_tsv(params["citations"])
                if params.get("citations")
                else communities.CitationTable({})
            )
            report = communities.community_report(
                cloud,
                members,
                sample,
                citations,
                params["min_citations"],
                center=center,
                radius=params["radius"],
            )

            stage = "write"
            _write_json(out_dir / "report.json", report.to_json_dict())
            _write_points_csv(out_dir / "points.csv", cloud)
        except Exception as err:
            raise _StageFailure(stage, err) from err
    except _StageFailure as failure:
        print(f"probe: {failure}", file=sys.stderr)
        return 1
    return 0


def cmd_probe(args: argparse.Namespace) -> int:
    try:
        center = [float(c) for c in args.center.split(",") if c.strip()]
    except ValueError:
        print(f"probe: error: bad --center value {args.center!r}", file=sys.stderr)
        return 2
    params = {
        "run": str(args.run),
        "center": center,
        "radius": args.radius,
        "citations": str(args.citations) if args.citations else None,
        "min_citations": args.min_citations,
        "seed": args.seed,
        "out": str(args.out if args.out else args.run),
        "verbose": args.verbose,
    }
    return _run_probe(params)


# ---------------------------------------------------------------------------
# rerun
# ---------------------------------------------------------------------------

_RUNNERS = {
    "synth": _run_synth,
    "analyze": _run_analyze,
    "sweep": _run_sweep,
    "probe": _run_probe,
}


def cmd_rerun(args: argparse.Namespace) -> int:
    with open(args.manifest, encoding="utf-8") as handle:
        manifest = json.load(handle)
    command = manifest.get("command")
    if command not in _RUNNERS:
        print(f"rerun: error: unknown command {command!r} in manifest", file=sys.stderr)
        return 2
    params = dict(manifest["params"])
    if args.out:
        params["out"] = str(args.out)
    return _RUNNERS[command](params)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_ingest_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--log", action="append", required=True, type=Path,
        help="usage log file (repeatable)",
    )
    parser.add_argument(
        "--tags", default=DEFAULT_TAGS_ARG,
        help="comma-separated journal tags (bibcode columns 5-9)",
    )
    parser.add_argument("--min-rate", type=float, default=10.0,
                        help="minimum reads/month to qualify")
    parser.add_argument("--max-rate", type=float, default=100.0,
                        help="maximum reads/month to qualify")
    parser.add_argument("--rate-basis", choices=["active", "full"], default="active",
                        help="average over active months or the full interval")
    parser.add_argument("--interval-months", type=int, default=None,
                        help="interval length for --rate-basis full "
                             "(default: span of the data)")
    parser.add_argument("--period", choices=["month", "full-range"], default="month",
                        help="dedup period for repeat reads")
    parser.add_argument("--max-malformed-fraction", type=float, default=0.10,
                        help="malformed-line tolerance before parsing fails")


def _add_common_flags(parser: argparse.ArgumentParser, out_required: bool = True) -> None:
    parser.add_argument("-o", "--out", type=Path, required=out_required,
                        help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--verbose", action="store_true", help="progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coreadnet",
        description="Co-readership network analysis pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic usage log")
    p_synth.add_argument("--users", type=int, default=None, help="number of regular users")
    p_synth.add_argument("--papers", type=int, default=None, help="number of papers")
    p_synth.add_argument("--reads-mean", type=float, default=None,
                         help="mean reads per regular user")
    p_synth.add_argument("--reads-dispersion", type=float, default=None,
                         help="spread of the per-user read count")
    p_synth.add_argument("--bias", type=float, default=None,
                         help="preferential-attachment exponent (0 = uniform)")
    p_synth.add_argument("--noise-users", type=int, default=None,
                         help="number of one-shot noise users")
    p_synth.add_argument("--months", type=int, default=None,
                         help="number of simulated months")
    p_synth.add_argument("--start-month", default=None, help="first month, YYYY-MM")
    p_synth.add_argument("--config", type=Path, default=None,
                         help="JSON file with generator settings")
    p_synth.add_argument("--seed", type=int, default=None, help="random seed")
    p_synth.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    p_synth.add_argument("--verbose", action="store_true", help="progress to stderr")
    p_synth.set_defaults(func=cmd_synth)

    p_analyze = sub.add_parser("analyze", help="run the spectral pipeline on logs")
    _add_ingest_flags(p_analyze)
    p_analyze.add_argument("--ns", type=int, required=True, help="sample size")
    p_analyze.add_argument("--bins", default="auto",
                           help="density histogram bin count or 'auto'")
    p_analyze.add_argument("--k", type=int, default=3,
                           help="projection components to persist")
    p_analyze.add_argument("--dense-threshold", type=int, default=coread.DENSE_THRESHOLD,
                           help="largest n_s for the full dense eigensolve")
    p_analyze.add_argument("--export-coread", action="store_true",
                           help="also write the co-read matrix as 'k l r_kl' text")
    _add_common_flags(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_sweep = sub.add_parser("sweep", help="eigenvalue scaling across sample sizes")
    _add_ingest_flags(p_sweep)
    p_sweep.add_argument("--sizes", required=True,
                         help="comma-separated sample sizes, e.g. 50,100,200")
    p_sweep.add_argument("--dense-threshold", type=int, default=coread.DENSE_THRESHOLD,
                         help="largest n_s for the full dense eigensolve")
    _add_common_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_probe = sub.add_parser("probe", help="sphere community query on a prior run")
    p_probe.add_argument("--run", type=Path, required=True,
                         help="directory of a prior analyze run")
    p_probe.add_argument("--center", required=True,
                         help="comma-separated sphere center, e.g. -0.05,0.2,0.03")
    p_probe.add_argument("--radius", type=float, required=True, help="sphere radius")
    p_probe.add_argument("--citations", type=Path, default=None,
                         help="bibcode<TAB>count citation table")
    p_probe.add_argument("--min-citations", type=int, default=0,
                         help="drop papers cited fewer times than this")
    _add_common_flags(p_probe, out_required=False)
    p_probe.set_defaults(func=cmd_probe)

    p_rerun = sub.add_parser("rerun", help="replay a run from its manifest")
    p_rerun.add_argument("manifest", type=Path, help="path to manifest.json")
    p_rerun.add_argument("-o", "--out", type=Path, default=None,
                         help="override the output directory")
    p_rerun.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
