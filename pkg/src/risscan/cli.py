"""Command-line front end.

Subcommands: design, calibrate, detect, protocol, access, sweep, check.
Exit codes: 0 success, 1 audit failure, 2 configuration error,
3 integrity error (artifact does not match scenario).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .access import (
    AccessConfig,
    DetectionKernel,
    detections_pmf,
    evolve_phases,
    initial_distribution,
    simulate_strategy,
    transition_matrix,
    write_access_csv,
)
from .channel import ProtocolError
from .detection import (
    build_spatial_map,
    calibrate_threshold,
    write_report_csv,
    write_spatial_map_csv,
)
from .harness import (
    run_adaptive_protocol,
    run_detection_phase,
    run_sweep,
    match_detections,
    table_audit,
)
from .ris_design import DesignParams, build_codebook, load_codebook
from .scenario import IntegrityError, ScenarioError, load_scenario, sample_ues, scenario_hash


def _resolve_scenario(spec: str):
    """Load a scenario from a path or by bundled preset name."""
    return load_scenario(spec)


def _rng(args, scenario):
    seed = args.seed if args.seed is not None else scenario.master_seed
    return np.random.default_rng(seed)


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_gamma_csv(gamma, path):
    b, k = gamma.shape
    with open(path, "w") as fh:
        fh.write("rb,ris,gamma\n")
        for bi in range(b):
            for ki in range(k):
                fh.write(f"{bi + 1},{ki + 1},{gamma[bi, ki]:.17g}\n")


def _read_gamma_csv(path, pilots, num_ris):
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except FileNotFoundError:
        raise ScenarioError(f"{path}: no such threshold file") from None
    if not lines or lines[0] != "rb,ris,gamma":
        raise ScenarioError(f"{path}: expected header rb,ris,gamma")
    gamma = np.full((pilots, num_ris), np.nan)
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise ScenarioError(f"{path}: malformed row {ln!r}")
        b, k, g = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        if not (0 <= b < pilots and 0 <= k < num_ris):
            raise ScenarioError(f"{path}: index out of range in row {ln!r}")
        gamma[b, k] = g
    if np.any(np.isnan(gamma)):
        raise ScenarioError(f"{path}: missing thresholds for some (rb, ris) pairs")
    return gamma


def _load_codebook_checked(path, scenario):
    try:
        book = load_codebook(path)
    except FileNotFoundError:
        raise ScenarioError(f"{path}: no such codebook") from None
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    if book.scenario_hash != scenario_hash(scenario):
        raise IntegrityError(f"{path}: codebook scenario hash does not match")
    return book


def _parse_kernel(spec: str) -> DetectionKernel:
    parts = spec.split(":")
    if parts[0] == "step":
        share = int(parts[1]) if len(parts) > 1 else 1
        return DetectionKernel.step(share)
    if parts[0] == "logistic":
        mid = float(parts[1]) if len(parts) > 1 else 3.0
        steep = float(parts[2]) if len(parts) > 2 else 3.5
        return DetectionKernel.logistic(mid, steep)
    if parts[0] == "table":
        if len(parts) != 2:
            raise ScenarioError("table kernel needs a file: table:<path>")
        try:
            values = [float(x) for x in open(parts[1]).read().split()]
        except (FileNotFoundError, ValueError) as exc:
            raise ScenarioError(f"kernel table {parts[1]}: {exc}") from None
        return DetectionKernel.from_table(values)
    raise ScenarioError(f"unknown kernel spec {spec!r}")


def _prepare_ues(scenario, rng):
    ues = sample_ues(scenario, rng)
    for ue in ues:
        if ue.pilot_index is None:
            ue.pilot_index = int(rng.integers(0, scenario.pilots.random_pool))
    return ues


def cmd_design(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    params = DesignParams(
        beta_ps=args.beta_ps,
        beta_sl=args.beta_sl,
        alpha_sl=args.alpha_sl,
        eps_sl=args.eps_sl,
        max_iters=args.max_iters,
    )
    rng = _rng(args, scenario)
    out = os.path.join(_outdir(args), "codebook.bin")
    book = build_codebook(scenario, params, rng, out_path=out)
    for k, per_ris in enumerate(book.configs):
        gains = [c.focal_gain for c in per_ris]
        conv = sum(c.converged for c in per_ris)
        print(
            f"ris {k + 1}: {len(per_ris)} configurations, "
            f"focal gain {min(gains):.3e}..{max(gains):.3e}, "
            f"{conv}/{len(per_ris)} converged"
        )
    print(f"wrote {out}")
    return 0


def cmd_calibrate(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    book = _load_codebook_checked(args.codebook, scenario)
    rng = _rng(args, scenario)
    gamma = calibrate_threshold(scenario, book, args.target_pfa, args.trials, rng)
    out = os.path.join(_outdir(args), "gamma.csv")
    _write_gamma_csv(gamma, out)
    print(
        f"calibrated {gamma.size} thresholds at target pfa {args.target_pfa:g} "
        f"({args.trials} trials); wrote {out}"
    )
    return 0


def cmd_detect(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    book = _load_codebook_checked(args.codebook, scenario)
    gamma = _read_gamma_csv(args.gamma, scenario.pilots.num_pilots, scenario.num_ris)
    rng = _rng(args, scenario)
    ues = _prepare_ues(scenario, rng)
    result = run_detection_phase(scenario, book, ues, rng, gamma)
    match_detections(result.report, ues, scenario)
    out = _outdir(args)
    report_path = os.path.join(out, "report.csv")
    write_report_csv(result.report, report_path)
    map_path = os.path.join(out, "spatial_map.csv")
    write_spatial_map_csv(
        build_spatial_map(result.filters, scenario.partitions), map_path
    )
    print(
        f"{len(ues)} UEs active, {len(result.report.detections)} detections, "
        f"{sum(ue.detected for ue in ues)} UEs matched"
    )
    for det in result.report.detections:
        print(
            f"  rb {det.rb + 1} ris {det.ris + 1} cell {det.cell + 1} "
            f"at ({det.position[0]:.2f}, {det.position[1]:.2f}, {det.position[2]:.2f}) "
            f"score {det.score:.3e} (gamma {det.gamma:.3e})"
        )
    print(f"wrote {report_path} and {map_path}")
    return 0


def cmd_protocol(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    book = _load_codebook_checked(args.codebook, scenario)
    gamma = _read_gamma_csv(args.gamma, scenario.pilots.num_pilots, scenario.num_ris)
    rng = _rng(args, scenario)
    result = run_adaptive_protocol(scenario, book, args.phases, args.strategy, rng, gamma)
    out = _outdir(args)
    for j, report in enumerate(result.reports):
        write_report_csv(report, os.path.join(out, f"report_phase{j + 1}.csv"))
    summary = os.path.join(out, "protocol_summary.csv")
    with open(summary, "w") as fh:
        fh.write("phase,detected\n")
        for j, c in enumerate(result.detected_counts):
            fh.write(f"{j + 1},{c}\n")
    print(
        f"strategy {result.strategy}: detected per phase "
        f"{list(result.detected_counts)}; wrote {summary}"
    )
    return 0


def cmd_access(args) -> int:
    kernel = _parse_kernel(args.kernel)
    rows = []
    p_m = transition_matrix(args.m, args.b_r, kernel, args.convention)
    p = initial_distribution(args.m, args.b_r, kernel, args.convention)
    per_phase_b = detections_pmf(args.m, args.b_r + args.b_a, kernel, args.convention)
    for j in range(1, args.phases + 1):
        dist = evolve_phases(p, p_m, j, mode=args.evolution)
        rows.extend((j, m, float(dist[m]), "analytic", "A") for m in range(dist.size))
        rows.extend(
            (j, m, float(per_phase_b[m]), "analytic", "B")
            for m in range(per_phase_b.size)
        )
    if args.trials > 0:
        rng = np.random.default_rng(args.seed if args.seed is not None else 0)
        for strategy, b_r, b_a in (
            ("A", args.b_r, args.b_a),
            ("B", args.b_r + args.b_a, 0),
        ):
            config = AccessConfig(m=args.m, b_r=b_r, b_a=b_a, phases=args.phases)
            sim = simulate_strategy(config, strategy, kernel, args.trials, rng)
            for j in range(1, args.phases + 1):
                pmf = sim.pmf(j)
                rows.extend(
                    (j, m, float(pmf[m]), "montecarlo", strategy)
                    for m in range(pmf.size)
                )
    out = os.path.join(_outdir(args), "access.csv")
    write_access_csv(rows, out)
    print(f"wrote {out} ({len(rows)} rows, kernel {kernel.label})")
    return 0


def cmd_sweep(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    rng = _rng(args, scenario)
    codebook = gamma = None
    if args.axis == "power":
        if not args.codebook or not args.gamma:
            raise ScenarioError("power sweep needs --codebook and --gamma")
        codebook = _load_codebook_checked(args.codebook, scenario)
        gamma = _read_gamma_csv(args.gamma, scenario.pilots.num_pilots, scenario.num_ris)
    points = [float(x) for x in args.points.split(",") if x.strip()]
    if args.axis != "power":
        points = [int(x) for x in points]
    result = run_sweep(
        scenario,
        args.axis,
        points,
        args.trials,
        rng,
        out_dir=_outdir(args),
        codebook=codebook,
        gamma=gamma,
    )
    print(
        f"swept {args.axis} over {len(result.points)} points "
        f"({result.wall_time:.1f} s); wrote {result.csv_path}"
    )
    return 0


def cmd_check(args) -> int:
    rows = table_audit()
    ok = True
    for name, computed, required, row_ok in rows:
        ok &= row_ok
        if isinstance(computed, float) and computed >= 1e6:
            print(f"{name}: computed {computed:.6g}, required {required:.6g} "
                  f"[{'ok' if row_ok else 'MISMATCH'}]")
        else:
            print(f"{name}: computed {computed}, required {required} "
                  f"[{'ok' if row_ok else 'MISMATCH'}]")
    print("audit passed" if ok else "audit FAILED")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risscan",
        description="RIS-assisted near-field activity detection simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario file or bundled name")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default: scenario)")
        p.add_argument("--out", default=None, help="output directory (default: .)")

    p = sub.add_parser("design", help="design the scanning codebook")
    common(p)
    p.add_argument("--beta-ps", type=float, default=0.1)
    p.add_argument("--beta-sl", type=float, default=0.1)
    p.add_argument("--alpha-sl", type=float, default=0.1)
    p.add_argument("--eps-sl", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=2000)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("calibrate", help="calibrate detection thresholds")
    common(p)
    p.add_argument("--codebook", required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--target-pfa", type=float, default=1e-2)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="run one detection phase")
    common(p)
    p.add_argument("--codebook", required=True)
    p.add_argument("--gamma", required=True, help="threshold CSV from calibrate")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("protocol", help="run the multi-phase protocol")
    common(p)
    p.add_argument("--codebook", required=True)
    p.add_argument("--gamma", required=True)
    p.add_argument("--phases", type=int, default=3)
    p.add_argument("--strategy", choices=("A", "B"), default="A")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("access", help="closed-form access analytics")
    common(p, scenario=False)
    p.add_argument("--m", type=int, required=True, help="active UE count")
    p.add_argument("--b-r", type=int, required=True, help="random-access RBs")
    p.add_argument("--b-a", type=int, default=0, help="reserved RBs")
    p.add_argument("--phases", type=int, default=3)
    p.add_argument("--kernel", default="logistic", help="step[:K] | logistic[:mid:steep] | table:<path>")
    p.add_argument("--convention", choices=("conditional", "population"), default="conditional")
    p.add_argument("--evolution", choices=("verbatim", "markov"), default="verbatim")
    p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials (0: analytic only)")
    p.set_defaults(func=cmd_access)

    p = sub.add_parser("sweep", help="sweep an experiment axis")
    common(p)
    p.add_argument("--axis", choices=("power", "b_r", "m", "j"), required=True)
    p.add_argument("--points", required=True, help="comma-separated sweep points")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--codebook", default=None)
    p.add_argument("--gamma", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="audit the published requirement arithmetic")
    p.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return 3
    except (ScenarioError, ProtocolError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
