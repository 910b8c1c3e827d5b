"""End-to-end drivers: detection phases, adaptive protocol, sweeps, audits.

A detection phase is: draw sync phases and multipath, synthesize the 2N
scanning frames, separate components, run the filter bank, threshold.
The protocol driver repeats phases, re-assigning pilots between them
according to the chosen access strategy. Sweep runners emit the CSV
files behind the figure-style outputs.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

from .access import AccessConfig, DetectionKernel, collision_prob, simulate_strategy
from .channel import ProtocolError, build_channel_set, synthesize_frame
from .detection import (
    energy_detect,
    matched_filter_bank,
    reference_templates,
    split_components,
)
from .geometry import (
    C0,
    build_upa,
    fraunhofer_distance,
    required_bandwidth_for_range_resolution,
    required_elements_for_angular_resolution,
)
from .scenario import IntegrityError, sample_ues, scenario_hash


@dataclass(frozen=True)
class PhaseResult:
    report: object
    filters: object
    channels: object


def run_detection_phase(
    scenario,
    codebook,
    ues,
    rng,
    gamma,
    templates=None,
    phase_index: int = 0,
    p_sym_w=None,
):
    """Run one full detection phase and threshold the filter outputs.

    Refuses codebooks designed for a different scenario. Sync phases and
    multipath are redrawn here; the BS<-RIS matrices come from the
    scenario cache.
    """
    if codebook.scenario_hash != scenario_hash(scenario):
        raise IntegrityError("codebook was designed for a different scenario")
    if p_sym_w is None:
        p_sym_w = scenario.p_sym_w
    for ue in ues:
        ue.sync_phase = float(rng.uniform(0.0, 2.0 * np.pi))
    ris_cached = [(arr, scenario.bs_ris(k)) for k, arr in enumerate(scenario.ris_arrays)]
    channels = build_channel_set(ues, scenario.grid, scenario.bs, ris_cached, rng)
    frames = [
        synthesize_frame(
            n,
            ues,
            scenario.pilots,
            channels,
            codebook.frame_configs(n),
            p_sym_w,
            scenario.noise_var,
            rng,
        )
        for n in range(codebook.num_frames)
    ]
    separated = split_components(frames)
    if templates is None:
        templates = reference_templates(scenario, codebook)
    filters = matched_filter_bank(separated, templates, scenario.pilots)
    report = energy_detect(filters, gamma, scenario.partitions, phase=phase_index)
    return PhaseResult(report=report, filters=filters, channels=channels)


def match_detections(report, ues, scenario):
    """Attribute detections to simulated UEs and set their flags.

    A detection on pilot b under RIS k claims the nearest unclaimed
    active UE that transmitted pilot b from inside region k. Returns
    (detection, ue index or None) pairs; matched UEs are marked
    detected.
    """
    claimed = set()
    pairs = []
    for det in report.detections:
        best, best_d = None, np.inf
        for i, ue in enumerate(ues):
            if i in claimed or not ue.active or ue.pilot_index != det.rb:
                continue
            if not scenario.regions[det.ris].contains(ue.position):
                continue
            d = float(np.linalg.norm(ue.position - det.position))
            if d < best_d:
                best, best_d = i, d
        if best is not None:
            claimed.add(best)
            ues[best].detected = True
        pairs.append((det, best))
    return pairs


@dataclass(frozen=True)
class ProtocolResult:
    reports: tuple
    detected_counts: tuple
    final_detected: tuple
    strategy: str
    multiply_count: int


def run_adaptive_protocol(
    scenario, codebook, phases: int, strategy: str, rng, gamma, ues=None, templates=None
):
    """Drive multiple detection phases under access strategy A or B.

    A: undetected UEs contend on the random pool each phase; detected
    UEs move to reserved RBs and stay there. Reported counts are
    cumulative. B: everyone contends on the random pool every phase and
    nothing is reserved; counts are per-phase.
    """
    if phases < 1:
        raise ValueError("need at least one phase")
    if strategy not in ("A", "B"):
        raise ValueError(f"strategy must be A or B, got {strategy!r}")
    if ues is None:
        ues = sample_ues(scenario, rng)
    pilots = scenario.pilots
    b_r, b_a = pilots.random_pool, pilots.assigned_pool
    if b_r < 1 and any(ue.active for ue in ues):
        raise ProtocolError("no random-access RBs for contending UEs")
    if templates is None:
        templates = reference_templates(scenario, codebook)
    assigned = {}
    reports, counts = [], []
    mults = 0
    for j in range(phases):
        if strategy == "B":
            for ue in ues:
                ue.detected = False
        for i, ue in enumerate(ues):
            if not ue.active:
                continue
            if strategy == "A" and i in assigned:
                ue.pilot_index = assigned[i]
            else:
                ue.pilot_index = int(rng.integers(0, b_r))
        result = run_detection_phase(
            scenario, codebook, ues, rng, gamma, templates=templates, phase_index=j
        )
        match_detections(result.report, ues, scenario)
        if strategy == "A":
            for i, ue in enumerate(ues):
                if ue.detected and i not in assigned:
                    if len(assigned) >= b_a:
                        raise ProtocolError(
                            f"assigned pool exhausted ({b_a} RBs) in phase {j + 1}"
                        )
                    assigned[i] = b_r + len(assigned)
        reports.append(result.report)
        counts.append(sum(1 for ue in ues if ue.detected))
        mults += result.filters.multiply_count
    final = tuple(i for i, ue in enumerate(ues) if ue.detected)
    return ProtocolResult(
        reports=tuple(reports),
        detected_counts=tuple(counts),
        final_detected=final,
        strategy=strategy,
        multiply_count=mults,
    )


def estimate_detection_kernel(
    scenario, codebook, gamma, m_max: int, trials: int, rng, templates=None
):
    """Monte Carlo estimate of p(detect | m UEs share the RB).

    Places m co-pilot UEs uniformly in the inspected regions, runs a
    phase, and counts how often the first (tagged) UE is claimed by a
    detection.
    """
    if templates is None:
        templates = reference_templates(scenario, codebook)
    probs = []
    for m in range(1, m_max + 1):
        hits = 0
        for _ in range(trials):
            ues = sample_ues(scenario, rng, count=m)
            for ue in ues:
                ue.pilot_index = 0
            result = run_detection_phase(
                scenario, codebook, ues, rng, gamma, templates=templates
            )
            match_detections(result.report, ues, scenario)
            hits += int(ues[0].detected)
        probs.append(hits / trials)
    return DetectionKernel.from_table(probs, label="montecarlo")


@dataclass(frozen=True)
class ExperimentResult:
    axis: str
    points: tuple
    rows: tuple
    csv_path: object
    wall_time: float
    multiply_count: int


_SWEEP_COLUMNS = {
    "power": ("p_sym_dbw", "k_rice", "p_d", "trials"),
    "b_r": ("b_r", "m", "collision_analytic", "collision_mc", "trials"),
    "m": ("m", "b_r", "collision_analytic", "collision_mc", "trials"),
    "j": ("j", "strategy", "mean_detected", "p_all_detected", "trials"),
}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _write_rows_csv(path, columns, rows):
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def _mc_collision(m: int, b_r: int, trials: int, rng, chunk=200_000) -> float:
    if m <= 1 or trials < 1:
        return 0.0
    coll = 0
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        choices = rng.integers(0, b_r, size=(t, m))
        choices.sort(axis=1)
        coll += int(np.any(choices[:, 1:] == choices[:, :-1], axis=1).sum())
        done += t
    return coll / trials


def run_sweep(
    scenario,
    axis: str,
    points,
    trials: int,
    rng,
    out_dir=None,
    codebook=None,
    gamma=None,
    k_rice_values=None,
    kernel=None,
):
    """Sweep one experiment axis and emit the figure CSV.

    power: detection probability vs transmit power (needs a codebook and
    calibrated thresholds). b_r / m: collision probability, analytic vs
    Monte Carlo. j: access-strategy comparison via the access-layer
    simulator with the given (default logistic) kernel.
    """
    if axis not in _SWEEP_COLUMNS:
        raise ValueError(f"unknown sweep axis {axis!r}")
    points = list(points)
    if not points:
        raise ValueError("need at least one sweep point")
    started = time.perf_counter()
    rows = []
    mults = 0
    if trials > 0:
        if axis == "power":
            if codebook is None or gamma is None:
                raise ValueError("power sweep needs a codebook and thresholds")
            templates = reference_templates(scenario, codebook)
            if k_rice_values is None:
                k_rice_values = (scenario.ues.k_rice,)
            # Common random numbers: every (power, k_rice) combination
            # replays the same per-trial streams, so curves differ only
            # through the swept parameter.
            trial_seed = int(rng.integers(0, 2**63))
            for kr in k_rice_values:
                for p_dbw in points:
                    detected = 0
                    total = 0
                    for t in range(trials):
                        trial_rng = np.random.default_rng([trial_seed, t])
                        ues = sample_ues(scenario, trial_rng)
                        for ue in ues:
                            ue.k_rice = float(kr)
                            if ue.pilot_index is None:
                                ue.pilot_index = int(
                                    trial_rng.integers(0, scenario.pilots.random_pool)
                                )
                        result = run_detection_phase(
                            scenario,
                            codebook,
                            ues,
                            trial_rng,
                            gamma,
                            templates=templates,
                            p_sym_w=10.0 ** (p_dbw / 10.0),
                        )
                        match_detections(result.report, ues, scenario)
                        detected += sum(1 for ue in ues if ue.detected)
                        total += len(ues)
                        mults += result.filters.multiply_count
                    rows.append(
                        {
                            "p_sym_dbw": float(p_dbw),
                            "k_rice": float(kr),
                            "p_d": detected / max(total, 1),
                            "trials": trials,
                        }
                    )
        elif axis in ("b_r", "m"):
            for point in points:
                m = scenario.ues.count if axis == "b_r" else int(point)
                b_r = int(point) if axis == "b_r" else scenario.pilots.random_pool
                rows.append(
                    {
                        "b_r": b_r,
                        "m": m,
                        "collision_analytic": collision_prob(m, b_r),
                        "collision_mc": _mc_collision(m, b_r, trials, rng),
                        "trials": trials,
                    }
                )
        elif axis == "j":
            if kernel is None:
                kernel = DetectionKernel.logistic()
            for strategy in ("A", "B"):
                pools = {
                    "A": (scenario.pilots.random_pool, scenario.pilots.assigned_pool),
                    "B": (scenario.pilots.num_pilots, 0),
                }[strategy]
                config = AccessConfig(
                    m=scenario.ues.count,
                    b_r=pools[0],
                    b_a=pools[1],
                    phases=max(int(p) for p in points),
                )
                sim = simulate_strategy(config, strategy, kernel, trials, rng)
                for point in points:
                    j = int(point)
                    pmf = sim.pmf(j)
                    rows.append(
                        {
                            "j": j,
                            "strategy": strategy,
                            "mean_detected": float(
                                np.arange(pmf.size) @ pmf
                            ),
                            "p_all_detected": float(pmf[-1]),
                            "trials": trials,
                        }
                    )
    csv_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"sweep_{axis}.csv")
        _write_rows_csv(csv_path, _SWEEP_COLUMNS[axis], rows)
    return ExperimentResult(
        axis=axis,
        points=tuple(points),
        rows=tuple(rows),
        csv_path=csv_path,
        wall_time=time.perf_counter() - started,
        multiply_count=mults,
    )


# Published requirement set the audit reproduces: angular resolutions in
# degrees at lambda/2 spacing and 6 GHz, range resolutions in metres.
AUDIT_CARRIER_HZ = 6.0e9
AUDIT_REQUIREMENTS = (
    ("ris_azimuth_elements", "angle", 6.28, 15),
    ("ris_elevation_elements", "angle", 6.28, 15),
    ("bs_azimuth_elements", "angle", 2.72, 34),
    ("bs_elevation_elements", "angle", 6.61, 14),
    ("bandwidth_hz_for_0.3m", "range", 0.3, 1.0e9),
    ("bandwidth_hz_for_1.0m", "range", 1.0, 3.0e8),
)
AUDIT_ARRAYS = (
    ("bs_fraunhofer_m", (34, 6), 29.78),
    ("ris_fraunhofer_m", (24, 24), 28.78),
)


def table_audit():
    """Recompute the resolution requirements and far-field boundaries.

    Returns rows (name, computed, required, ok). Element counts and
    bandwidths must match exactly; the far-field distances within
    0.05 m.
    """
    lam = C0 / AUDIT_CARRIER_HZ
    spacing = lam / 2.0
    rows = []
    for name, kind, arg, required in AUDIT_REQUIREMENTS:
        if kind == "angle":
            computed = required_elements_for_angular_resolution(arg, spacing, lam)
            ok = computed == required
        else:
            computed = required_bandwidth_for_range_resolution(arg)
            ok = computed == required
        rows.append((name, computed, required, ok))
    for name, counts, required in AUDIT_ARRAYS:
        arr = build_upa(np.zeros(3), counts, spacing, "xz")
        computed = fraunhofer_distance(arr, lam)
        rows.append((name, computed, required, abs(computed - required) <= 0.05))
    return rows
