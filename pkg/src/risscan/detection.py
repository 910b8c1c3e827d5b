"""Static/non-static separation, matched filtering, and energy detection.

A detection phase collects 2N frames: the first N under the scanning
configurations, the last N under their elementwise negations with the
same pilots. Half-sums isolate the static channel, half-differences the
RIS-cascaded component, which the filter bank then correlates against
modeled cascade templates per (pilot, RIS, cell).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import PilotBook, ProtocolError, draw_multipath
from .geometry import nf_steering


@dataclass(frozen=True)
class SeparatedSignals:
    """Half-sum (static) and half-difference (scanned) components.

    Both arrays have shape (N, Q, L*N_BS), indexed by scan cell n; the
    noise in each has per-entry variance noise_power / 2.
    """

    static_y: np.ndarray
    nonstatic_y: np.ndarray
    p_sym: float
    noise_power: float


def split_components(frames, partner_of=None) -> SeparatedSignals:
    """Separate a phase's 2N frames into static and scanned parts.

    ``partner_of`` maps scan index n to its negated-configuration frame
    index; by default frame n pairs with frame n + N. Partner frames must
    have carried identical pilot assignments.
    """
    frames = list(frames)
    if len(frames) % 2:
        raise ProtocolError(f"need an even frame count, got {len(frames)}")
    n_scan = len(frames) // 2
    if partner_of is None:
        partner_of = lambda n: n + n_scan
    static, nonstatic = [], []
    for n in range(n_scan):
        a, b = frames[n], frames[partner_of(n)]
        if a.pilots_used != b.pilots_used:
            raise ProtocolError(
                f"partner frames {a.index}/{b.index} carried different pilots"
            )
        dot = 0.5 * (a.y + b.y)
        static.append(dot)
        nonstatic.append(a.y - dot)
    first = frames[0]
    return SeparatedSignals(
        static_y=np.stack(static),
        nonstatic_y=np.stack(nonstatic),
        p_sym=first.p_sym,
        noise_power=first.noise_power,
    )


def reference_cascade(scenario, codebook, k: int, n: int, q: int) -> np.ndarray:
    """Modeled BS response to a unit source at cell center (k, n), one subcarrier."""
    center = scenario.partitions[k].centers[n]
    lam = scenario.grid.wavelengths[q]
    alpha = nf_steering(scenario.ris_arrays[k], center, lam)
    omega = codebook.configs[k][n].omega
    return scenario.bs_ris(k)[q] @ (omega * alpha)


def reference_templates(scenario, codebook) -> tuple:
    """All matched-filter templates, one (N, Q, N_BS) array per RIS."""
    out = []
    for k, (ris, part) in enumerate(zip(scenario.ris_arrays, scenario.partitions)):
        alphas = np.stack(
            [
                np.stack([nf_steering(ris, c, lam) for lam in scenario.grid.wavelengths])
                for c in part.centers
            ]
        )  # (N, Q, N_RIS)
        omegas = codebook.config_matrix(k)
        out.append(np.einsum("qae,nqe,ne->nqa", scenario.bs_ris(k), alphas, omegas))
    return tuple(out)


@dataclass(frozen=True)
class FilterBankOutput:
    """Matched-filter magnitudes, shape (B, K, N), and the multiply count."""

    values: np.ndarray
    multiply_count: int


def matched_filter_bank(
    separated: SeparatedSignals, templates, pilots: PilotBook
) -> FilterBankOutput:
    """Correlate the scanned component against every (pilot, RIS) template.

    f[b, k, n] = | sum_q (t_{k,n,q} kron x^(b)_q)^H ybar_{n,q} |, using
    the same time-major stacking as frame synthesis.
    """
    t = np.stack(templates)  # (K, N, Q, N_BS)
    n_scan, n_sub, _ = separated.nonstatic_y.shape
    n_bs = t.shape[-1]
    L = pilots.timeslots
    ybar = separated.nonstatic_y.reshape(n_scan, n_sub, L, n_bs)
    vals = np.abs(
        np.einsum("knqa,bql,nqla->bkn", t.conj(), pilots.symbols, ybar)
    )
    b, k = pilots.num_pilots, t.shape[0]
    return FilterBankOutput(
        values=vals, multiply_count=n_scan * k * b * n_sub * L * n_bs
    )


def filter_noise_only(templates, pilots: PilotBook, noise_var: float, trials: int, rng, batch=2048):
    """Max-over-cells filter outputs under noise alone, shape (trials, B, K).

    The half-difference of two noise frames has per-entry variance
    noise_var / 2, which is drawn directly instead of synthesizing and
    splitting empty frames.
    """
    t = np.stack(templates)
    k, n_scan, n_sub, n_bs = t.shape
    L = pilots.timeslots
    b = pilots.num_pilots
    tx = np.einsum("knqa,bql->bknqla", t.conj(), pilots.symbols)
    scale = math.sqrt(noise_var / 2.0)
    out = np.empty((trials, b, k))
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        ybar = scale * draw_multipath(rng, (m, n_scan, n_sub, L, n_bs))
        f = np.abs(np.einsum("bknqla,tnqla->tbkn", tx, ybar))
        out[done : done + m] = f.max(axis=3)
        done += m
    return out


def calibrate_threshold(
    scenario, codebook, target_pfa: float, trials: int, rng, templates=None
) -> np.ndarray:
    """Per-(pilot, RIS) detection thresholds for a false-alarm target.

    gamma[b, k] is the empirical (1 - target_pfa) quantile of the
    max-over-cells filter output under noise-only input.
    """
    if not 0.0 < target_pfa < 1.0:
        raise ValueError("target false-alarm rate must lie in (0, 1)")
    if trials < 10.0 / target_pfa:
        raise ValueError(
            f"need at least {math.ceil(10.0 / target_pfa)} trials for pfa={target_pfa}"
        )
    if templates is None:
        templates = reference_templates(scenario, codebook)
    stats = filter_noise_only(
        templates, scenario.pilots, scenario.noise_var, trials, rng
    )
    return np.quantile(stats, 1.0 - target_pfa, axis=0)


@dataclass(frozen=True)
class Detection:
    """One declared UE: pilot, RIS, cell, score, and the cell-center fix."""

    rb: int
    ris: int
    cell: int
    score: float
    position: np.ndarray
    gamma: float


@dataclass(frozen=True)
class DetectionReport:
    detections: tuple
    gamma: np.ndarray  # (B, K)
    verdicts: np.ndarray  # (B, K) bool
    phase: int


def energy_detect(f: FilterBankOutput, gamma, partitions, phase: int = 0) -> DetectionReport:
    """Threshold the filter bank and merge contiguous hot cells.

    ``gamma`` is either a scalar (single shared threshold) or a (B, K)
    array. Cells above threshold are grouped into face-adjacent clusters
    per (pilot, RIS); each cluster yields one detection at its argmax
    cell, located at that cell's centroid.
    """
    vals = f.values
    b_count, k_count, n_cells = vals.shape
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (b_count, k_count)).copy()
    if np.any(gamma <= 0):
        raise ValueError("thresholds must be positive")
    detections = []
    verdicts = np.zeros((b_count, k_count), dtype=bool)
    for b in range(b_count):
        for k in range(k_count):
            hot = np.flatnonzero(vals[b, k] > gamma[b, k])
            if hot.size == 0:
                continue
            verdicts[b, k] = True
            part = partitions[k]
            hot_set = set(int(n) for n in hot)
            seen = set()
            for start in sorted(hot_set):
                if start in seen:
                    continue
                cluster = [start]
                seen.add(start)
                edge = [start]
                while edge:
                    nxt = []
                    for n in edge:
                        for nb in part.neighbors(n):
                            if nb in hot_set and nb not in seen:
                                seen.add(nb)
                                cluster.append(nb)
                                nxt.append(nb)
                    edge = nxt
                best = max(cluster, key=lambda n: vals[b, k, n])
                detections.append(
                    Detection(
                        rb=b,
                        ris=k,
                        cell=best,
                        score=float(vals[b, k, best]),
                        position=part.centers[best].copy(),
                        gamma=float(gamma[b, k]),
                    )
                )
    return DetectionReport(
        detections=tuple(detections), gamma=gamma, verdicts=verdicts, phase=phase
    )


def build_spatial_map(f: FilterBankOutput, partitions) -> np.ndarray:
    """Flatten filter energies onto cell centroids.

    Returns rows (x, y, z, energy, rb, ris, cell) over every pilot and
    cell, suitable for direct CSV emission or gridded plotting.
    """
    vals = f.values
    b_count, k_count, _ = vals.shape
    rows = []
    for k in range(k_count):
        centers = partitions[k].centers
        for n, c in enumerate(centers):
            for b in range(b_count):
                rows.append([c[0], c[1], c[2], vals[b, k, n], b, k, n])
    return np.asarray(rows)


def write_report_csv(report: DetectionReport, path) -> None:
    """Serialize a report; one row per detection plus H0 rows per filter.

    Columns: phase, rb, ris, cell, x, y, z, score, gamma, verdict.
    rb/ris/cell are 1-based; H0 rows carry cell 0 and empty coordinates.
    """
    b_count, k_count = report.verdicts.shape
    with open(path, "w") as fh:
        fh.write("phase,rb,ris,cell,x,y,z,score,gamma,verdict\n")
        for b in range(b_count):
            for k in range(k_count):
                hits = [d for d in report.detections if d.rb == b and d.ris == k]
                if hits:
                    for d in hits:
                        fh.write(
                            f"{report.phase},{b + 1},{k + 1},{d.cell + 1},"
                            f"{d.position[0]:.12g},{d.position[1]:.12g},{d.position[2]:.12g},"
                            f"{d.score:.12g},{d.gamma:.12g},H1\n"
                        )
                else:
                    fh.write(
                        f"{report.phase},{b + 1},{k + 1},0,,,,"
                        f",{report.gamma[b, k]:.12g},H0\n"
                    )


def write_spatial_map_csv(rows: np.ndarray, path) -> None:
    """Columns: x, y, z, energy, rb (1-based)."""
    with open(path, "w") as fh:
        fh.write("x,y,z,energy,rb\n")
        for x, y, z, energy, b, _k, _n in rows:
            fh.write(f"{x:.12g},{y:.12g},{z:.12g},{energy:.12g},{int(b) + 1}\n")
