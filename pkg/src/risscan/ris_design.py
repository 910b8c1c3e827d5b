"""Scanning-codebook design by penalized gradient ascent.

Each RIS gets one weight vector per sub-region cell, found by maximizing
reflected energy at the cell center while soft-constraining element
magnitudes to 1 and pushing energy at the other cell centers below a
sigmoid threshold. The codebook doubles every configuration with its
elementwise negation so the receiver can cancel the static channel by
frame differencing.

Design inputs are precomputed cascade stacks: arrays of shape
(P, Q, N_BS, N_RIS) holding the BS<-RIS<-point cascade matrix for P
probe points and Q subcarriers.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from .channel import cascade_stack
from .geometry import SingularityError


@dataclass(frozen=True)
class DesignParams:
    """Penalty weights, step schedule, and termination for the ascent."""

    beta_ps: float = 0.1
    beta_sl: float = 0.1
    alpha_sl: float = 0.1
    eps_sl: float = 0.1
    max_iters: int = 2000
    tol: float = 1e-6
    mu0: float | None = None  # None: set from the estimated curvature
    ell0: float = 200.0
    max_backtracks: int = 60

    def __post_init__(self):
        for name in ("beta_ps", "beta_sl", "alpha_sl", "eps_sl"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.tol <= 0 or self.max_iters < 1:
            raise ValueError("tolerance and iteration budget must be positive")


@dataclass(frozen=True)
class RisConfiguration:
    """One designed weight vector and its achieved scan metrics."""

    omega: np.ndarray
    target_cell: int
    ris_index: int
    converged: bool
    focal_gain: float
    worst_sidelobe: float
    iterations: int


def penalty_passive(omega, beta_ps: float) -> float:
    """beta * sum_i (|w_i| - 1)^2, zero exactly on unit-modulus vectors."""
    return beta_ps * float(np.sum((np.abs(omega) - 1.0) ** 2))


def penalty_sidelobe(chi, params: DesignParams):
    """Sigmoid side-lobe cost and its derivative in the energy chi.

    Value beta / (1 + exp(-alpha (chi - eps))); the derivative is the
    analytic d/dchi of that expression.
    """
    chi = np.asarray(chi, dtype=float)
    e = np.exp(-params.alpha_sl * (chi - params.eps_sl))
    value = params.beta_sl / (1.0 + e)
    deriv = params.alpha_sl * params.beta_sl * e / (1.0 + e) ** 2
    return value, deriv


def _energies_and_pulls(lam, omega):
    """Per-point energy chi_p = sum_q ||L_pq w||^2 and pull vectors.

    The pull of point p is sum_q L_pq^H L_pq w, the ascent direction of
    chi_p up to the factor 2.
    """
    v = np.einsum("pqae,e->pqa", lam, omega)
    chi = np.einsum("pqa,pqa->p", v, v.conj()).real
    pulls = np.einsum("pqae,pqa->pe", lam.conj(), v)
    return chi, pulls


def objective(omega, lam_in, lam_out, params: DesignParams) -> float:
    """Focal energy minus magnitude and side-lobe penalties."""
    if lam_in.shape[0] == 0:
        raise ValueError("need at least one focal point")
    chi_in, _ = _energies_and_pulls(lam_in, omega)
    j = float(np.sum(chi_in)) - penalty_passive(omega, params.beta_ps)
    if lam_out.shape[0]:
        chi_out, _ = _energies_and_pulls(lam_out, omega)
        val, _ = penalty_sidelobe(chi_out, params)
        j -= float(np.sum(val))
    return j


def gradient(omega, lam_in, lam_out, params: DesignParams) -> np.ndarray:
    """Ascent direction of the objective.

    Entries pair with independent real/imaginary coordinate steps:
    dJ/dRe(w_i) = Re(g_i) and dJ/dIm(w_i) = Im(g_i), which is what the
    finite-difference check asserts.
    """
    mag = np.abs(omega)
    if np.any(mag < 1e-9):
        raise SingularityError("weight magnitude underflow; perturb before calling")
    _, pulls_in = _energies_and_pulls(lam_in, omega)
    g = 2.0 * pulls_in.sum(axis=0)
    g -= 2.0 * params.beta_ps * (mag - 1.0) * omega / mag
    if lam_out.shape[0]:
        chi_out, pulls_out = _energies_and_pulls(lam_out, omega)
        _, dval = penalty_sidelobe(chi_out, params)
        g -= 2.0 * np.einsum("p,pe->e", dval, pulls_out)
    return g


def _estimate_curvature(lam_in, rng, iters=40):
    """Power-iteration estimate of the largest focal quadratic eigenvalue."""
    n = lam_in.shape[-1]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam_max = 0.0
    for _ in range(iters):
        _, pulls = _energies_and_pulls(lam_in, v)
        w = pulls.sum(axis=0)
        lam_max = float(np.linalg.norm(w))
        if lam_max == 0.0:
            return 0.0
        v = w / lam_max
    return lam_max


def design_configuration(
    lam_in, lam_out, params: DesignParams, rng, ris_index=0, target_cell=0
) -> RisConfiguration:
    """Run the penalized ascent for one (RIS, cell) pair.

    Starts from random unit-modulus phases, steps along the gradient with
    a decaying step size mu0 / (1 + l / l0), halving the step whenever it
    would decrease the objective. Stops when the update falls below the
    tolerance in the max norm. The returned vector is hard-normalized to
    unit modulus and the reported metrics are measured after projection.
    """
    n = lam_in.shape[-1]
    omega = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))
    mu0 = params.mu0
    if mu0 is None:
        # the magnitude penalty sets a curvature floor of 2*beta_ps
        mu0 = 1.0 / (_estimate_curvature(lam_in, rng) + 2.0 * params.beta_ps)

    j_cur = objective(omega, lam_in, lam_out, params)
    best_j, best_omega = j_cur, omega
    converged = False
    iters_done = 0
    for ell in range(1, params.max_iters + 1):
        iters_done = ell
        g = gradient(omega, lam_in, lam_out, params)
        mu = mu0 / (1.0 + ell / params.ell0)
        accepted = False
        for _ in range(params.max_backtracks):
            cand = omega + mu * g
            small = np.abs(cand) < 1e-9
            if np.any(small):
                cand = cand.copy()
                cand[small] = 1e-9 * np.exp(1j * rng.uniform(0, 2 * np.pi, int(small.sum())))
            j_new = objective(cand, lam_in, lam_out, params)
            if j_new >= j_cur:
                accepted = True
                break
            mu *= 0.5
        if not accepted:
            break
        step = float(np.max(np.abs(cand - omega)))
        omega, j_cur = cand, j_new
        if j_cur > best_j:
            best_j, best_omega = j_cur, omega
        if step < params.tol:
            converged = True
            break
    omega = best_omega if best_j > j_cur else omega

    projected = omega / np.abs(omega)
    chi_in, _ = _energies_and_pulls(lam_in, projected)
    if lam_out.shape[0]:
        chi_out, _ = _energies_and_pulls(lam_out, projected)
        worst = float(np.max(chi_out))
    else:
        worst = 0.0
    return RisConfiguration(
        omega=projected,
        target_cell=int(target_cell),
        ris_index=int(ris_index),
        converged=converged,
        focal_gain=float(np.sum(chi_in)),
        worst_sidelobe=worst,
        iterations=iters_done,
    )


@dataclass(frozen=True)
class RisCodebook:
    """K x N designed configurations plus derived negated partners.

    Frame n < N applies configs[k][n]; frame N + n applies the negated
    partner of configs[k][n]. A full detection phase is 2N frames.
    """

    configs: tuple
    scenario_hash: str
    params: DesignParams

    @property
    def num_ris(self) -> int:
        return len(self.configs)

    @property
    def num_cells(self) -> int:
        return len(self.configs[0]) if self.configs else 0

    @property
    def num_frames(self) -> int:
        return 2 * self.num_cells

    def config_matrix(self, k: int) -> np.ndarray:
        """All weight vectors of RIS k as rows, shape (N, N_RIS)."""
        return np.stack([c.omega for c in self.configs[k]])

    def partner(self, k: int, n: int) -> np.ndarray:
        return -self.configs[k][n].omega

    def frame_configs(self, frame: int) -> list:
        """Per-RIS weight vectors applied during the given frame."""
        n_cells = self.num_cells
        if not 0 <= frame < 2 * n_cells:
            raise ValueError(f"frame {frame} outside the 2N = {2 * n_cells} schedule")
        if frame < n_cells:
            return [self.configs[k][frame].omega for k in range(self.num_ris)]
        return [self.partner(k, frame - n_cells) for k in range(self.num_ris)]


def build_codebook(scenario, params: DesignParams, rng, out_path=None) -> RisCodebook:
    """Design the full scanning codebook for a scenario.

    One configuration per (RIS, cell): the focal point is the cell
    centroid, the side-lobe probe set is all other cell centroids of the
    same RIS partition. Each design runs on its own spawned RNG stream so
    results do not depend on execution order.
    """
    from .scenario import scenario_hash

    streams = rng.spawn(sum(p.num_cells for p in scenario.partitions))
    all_configs = []
    s = 0
    for k, (ris, part) in enumerate(zip(scenario.ris_arrays, scenario.partitions)):
        lam_all = cascade_stack(scenario.bs_ris(k), ris, part.centers, scenario.grid)
        per_ris = []
        for n in range(part.num_cells):
            lam_in = lam_all[n : n + 1]
            lam_out = np.delete(lam_all, n, axis=0)
            try:
                cfg = design_configuration(
                    lam_in, lam_out, params, streams[s], ris_index=k, target_cell=n
                )
            except Exception as exc:
                raise RuntimeError(f"design failed for ris {k}, cell {n}") from exc
            per_ris.append(cfg)
            s += 1
        all_configs.append(tuple(per_ris))
    book = RisCodebook(
        configs=tuple(all_configs),
        scenario_hash=scenario_hash(scenario),
        params=params,
    )
    if out_path is not None:
        save_codebook(book, out_path)
    return book


_MAGIC = b"RISCB1\n"


def save_codebook(book: RisCodebook, path) -> None:
    """Write the codebook in the documented binary layout.

    Layout: magic, uint32 header length, UTF-8 JSON header, then one
    record per configuration: three little-endian uint32 (ris index,
    cell index, element count) followed by interleaved little-endian
    float64 real/imag pairs. Partners are not stored; they are exact
    negations by construction.
    """
    header = {
        "format": "ris-scan-codebook",
        "version": 1,
        "scenario_hash": book.scenario_hash,
        "params": asdict(book.params),
        "num_ris": book.num_ris,
        "num_cells": book.num_cells,
        "metrics": [
            [
                {
                    "converged": c.converged,
                    "focal_gain": c.focal_gain,
                    "worst_sidelobe": c.worst_sidelobe,
                    "iterations": c.iterations,
                }
                for c in per_ris
            ]
            for per_ris in book.configs
        ],
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for per_ris in book.configs:
            for c in per_ris:
                n = c.omega.shape[0]
                fh.write(struct.pack("<III", c.ris_index, c.target_cell, n))
                data = np.empty(2 * n)
                data[0::2] = c.omega.real
                data[1::2] = c.omega.imag
                fh.write(data.astype("<f8").tobytes())


def load_codebook(path) -> RisCodebook:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_MAGIC):
        raise ValueError(f"{path} is not a codebook file")
    off = len(_MAGIC)
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    header = json.loads(blob[off : off + hlen].decode("utf-8"))
    off += hlen
    if header.get("format") != "ris-scan-codebook" or header.get("version") != 1:
        raise ValueError("unsupported codebook format")
    params = DesignParams(**header["params"])
    num_ris, num_cells = header["num_ris"], header["num_cells"]
    metrics = header["metrics"]
    configs = []
    for k in range(num_ris):
        per_ris = []
        for n in range(num_cells):
            rk, rn, ne = struct.unpack_from("<III", blob, off)
            off += 12
            if (rk, rn) != (k, n):
                raise ValueError(f"codebook record order broken at ris {k}, cell {n}")
            data = np.frombuffer(blob, dtype="<f8", count=2 * ne, offset=off)
            off += 16 * ne
            m = metrics[k][n]
            per_ris.append(
                RisConfiguration(
                    omega=data[0::2] + 1j * data[1::2],
                    target_cell=n,
                    ris_index=k,
                    converged=bool(m["converged"]),
                    focal_gain=float(m["focal_gain"]),
                    worst_sidelobe=float(m["worst_sidelobe"]),
                    iterations=int(m["iterations"]),
                )
            )
        configs.append(tuple(per_ris))
    if off != len(blob):
        raise ValueError("trailing bytes after the last codebook record")
    return RisCodebook(
        configs=tuple(configs), scenario_hash=header["scenario_hash"], params=params
    )
