"""Random-access analytics: collisions, detection laws, phase evolution.

Closed forms for the RB-sharing binomial law, per-UE and population
detection probabilities, the per-phase transition matrix, and the
multi-phase evolution of the detected-count distribution, plus a
Monte Carlo simulator for the two access strategies:

* Strategy A (adaptive): detected UEs move to reserved RBs and stop
  contending; the random pool thins out phase by phase.
* Strategy B (non-adaptive): every UE keeps contending in the full
  pool every phase; per-phase detected counts do not accumulate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AccessConfig:
    """Population size, RB pools, and phase budget."""

    m: int
    b_r: int
    b_a: int = 0
    phases: int = 1
    p_sym: float | None = None

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("UE count must be non-negative")
        if self.m > 0 and self.b_r < 1:
            raise ValueError("need at least one random-access RB while UEs contend")
        if self.b_a < 0 or self.phases < 1:
            raise ValueError("assigned pool and phase count must be non-negative/positive")


@dataclass(frozen=True)
class DetectionKernel:
    """p(m): probability one UE is detected when m UEs share its RB."""

    probs: np.ndarray  # probs[m-1] = p(m)
    label: str = "table"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("kernel needs at least p(1)")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("kernel values must lie in [0, 1]")
        object.__setattr__(self, "probs", p)

    def __call__(self, m: int) -> float:
        if m < 1:
            return 0.0
        if m > self.probs.size:
            raise ValueError(f"kernel defined up to m={self.probs.size}, asked for {m}")
        return float(self.probs[m - 1])

    def table(self, m_max: int) -> np.ndarray:
        """Lookup vector t with t[m] = p(m) for m = 0..m_max."""
        if m_max > self.probs.size:
            raise ValueError(f"kernel defined up to m={self.probs.size}, asked for {m_max}")
        return np.concatenate([[0.0], self.probs[:m_max]])

    @classmethod
    def from_table(cls, values, label="table"):
        return cls(probs=np.asarray(values, dtype=float), label=label)

    @classmethod
    def step(cls, max_share: int = 1, limit: int = 64):
        """Perfect detection up to ``max_share`` UEs per RB, none beyond."""
        m = np.arange(1, limit + 1)
        return cls(probs=(m <= max_share).astype(float), label=f"step{max_share}")

    @classmethod
    def logistic(cls, midpoint: float = 3.0, steepness: float = 3.5, limit: int = 64):
        """Smoothly decaying collision survival, p(m) = 1/(1+e^{s(m-m0)})."""
        m = np.arange(1, limit + 1, dtype=float)
        return cls(
            probs=1.0 / (1.0 + np.exp(steepness * (m - midpoint))),
            label=f"logistic{midpoint:g}_{steepness:g}",
        )


def rb_share_pmf(m: int, total: int, b_r: int) -> float:
    """Probability exactly m of ``total`` UEs land on one given RB."""
    if b_r < 1:
        raise ValueError("need at least one RB")
    if not 0 <= m <= total:
        raise ValueError(f"share count {m} outside 0..{total}")
    return (
        math.comb(total, m) * (1.0 / b_r) ** m * ((b_r - 1.0) / b_r) ** (total - m)
    )


def detection_prob(total: int, b_r: int, kernel, convention: str = "conditional") -> float:
    """Per-UE detection probability under uniform random RB choice.

    "conditional" (default) weights the kernel by the law of how many of
    the OTHER total-1 UEs join the tagged UE's RB, so a perfect kernel
    gives probability 1. "population" weights by the unconditional RB
    occupancy law instead, which is the approximate analytic form; it
    underweights the tagged UE's own presence.
    """
    if total == 0:
        return 0.0
    if convention == "conditional":
        p = 1.0 / b_r
        return sum(
            math.comb(total - 1, j) * p ** j * (1.0 - p) ** (total - 1 - j) * kernel(j + 1)
            for j in range(total)
        )
    if convention == "population":
        return sum(rb_share_pmf(m, total, b_r) * kernel(m) for m in range(1, total + 1))
    raise ValueError(f"unknown convention {convention!r}")


def detections_pmf(total: int, b_r: int, kernel, convention: str = "conditional") -> np.ndarray:
    """Binomial law of the number of UEs detected in one phase.

    Treats per-UE detections as independent with the marginal of
    ``detection_prob``; the true joint is correlated through shared RBs,
    which the Monte Carlo path reproduces for comparison.
    """
    if total == 0:
        return np.array([1.0])
    p = detection_prob(total, b_r, kernel, convention)
    return np.array(
        [
            math.comb(total, i) * p ** i * (1.0 - p) ** (total - i)
            for i in range(total + 1)
        ]
    )


def transition_matrix(total: int, b_r: int, kernel, convention: str = "conditional") -> np.ndarray:
    """Row r: PMF of newly detected UEs when r are already detected."""
    p_m = np.zeros((total + 1, total + 1))
    for r in range(total + 1):
        row = detections_pmf(total - r, b_r, kernel, convention)
        p_m[r, : row.size] = row
    return p_m


def cumulative_transition(p_m: np.ndarray) -> np.ndarray:
    """Re-index the per-phase matrix to cumulative detected totals."""
    n = p_m.shape[0]
    out = np.zeros_like(p_m)
    for r in range(n):
        for i in range(n - r):
            out[r, r + i] += p_m[r, i]
    return out


def initial_distribution(total: int, b_r: int, kernel, convention: str = "conditional") -> np.ndarray:
    """Detected-count law after the first phase."""
    return detections_pmf(total, b_r, kernel, convention)


def evolve_phases(initial: np.ndarray, p_m: np.ndarray, phases: int, mode: str = "verbatim") -> np.ndarray:
    """Detected-count distribution after ``phases`` detection rounds.

    "markov" chains the cumulative-total re-indexing of the transition
    matrix, the standard update. "verbatim" follows the published
    convolution instead: the marginal law of new detections is convolved
    with the previous distribution, which can push probability mass past
    the population size; that overflow is clamped to the top state and
    reported as a warning rather than silently dropped.
    """
    if phases < 1:
        raise ValueError("need at least one phase")
    p = np.asarray(initial, dtype=float).copy()
    total = p_m.shape[0] - 1
    if p.size != total + 1:
        raise ValueError("distribution and matrix sizes disagree")
    if mode == "markov":
        chain = cumulative_transition(p_m)
        for _ in range(phases - 1):
            p = p @ chain
        return p
    if mode != "verbatim":
        raise ValueError(f"unknown mode {mode!r}")
    for j in range(phases - 1):
        new = p @ p_m
        conv = np.convolve(new, p)
        overflow = float(conv[total + 1 :].sum())
        out = conv[: total + 1].copy()
        out[total] += overflow
        if overflow > 1e-12:
            warnings.warn(
                f"phase {j + 2}: clamped probability mass {overflow:.3e} beyond "
                f"the population size (published convolution double-counts)",
                RuntimeWarning,
                stacklevel=2,
            )
        p = out
    return p


def collision_prob(total: int, b_r: int) -> float:
    """Probability at least two UEs pick the same RB."""
    if b_r < 1:
        raise ValueError("need at least one RB")
    if total <= 1:
        return 0.0
    if total > b_r:
        return 1.0
    prod = 1.0
    for i in range(total):
        prod *= (b_r - i) / b_r
    return 1.0 - prod


@dataclass(frozen=True)
class StrategyResult:
    """Per-trial detected counts, shape (trials, phases)."""

    strategy: str
    config: AccessConfig
    counts: np.ndarray = field(repr=False)

    def pmf(self, phase: int) -> np.ndarray:
        """Empirical detected-count PMF after the given phase (1-based)."""
        c = np.bincount(self.counts[:, phase - 1], minlength=self.config.m + 1)
        return c / c.sum()

    def cdf(self, phase: int) -> np.ndarray:
        return np.cumsum(self.pmf(phase))


def simulate_strategy(
    config: AccessConfig, strategy: str, kernel, trials: int, rng, chunk: int = 100_000
) -> StrategyResult:
    """Monte Carlo of the chosen access strategy.

    Per phase, contending UEs pick an RB uniformly in the random pool;
    each is detected with kernel probability of its RB's occupancy.
    Strategy A removes detected UEs from contention (their reserved RBs
    never collide) and reports cumulative totals; Strategy B reports
    per-phase totals with everyone always contending.
    """
    if strategy not in ("A", "B"):
        raise ValueError(f"strategy must be A or B, got {strategy!r}")
    if trials < 1:
        raise ValueError("need at least one trial")
    m, b_r, phases = config.m, config.b_r, config.phases
    ktab = kernel.table(m) if m else np.array([0.0])
    counts = np.empty((trials, phases), dtype=np.int32)
    if m == 0:
        counts[:] = 0
        return StrategyResult(strategy=strategy, config=config, counts=counts)
    # detected Strategy-A UEs park in bins past the pool so they never collide
    park = b_r + np.arange(m)
    n_bins = b_r + m
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        detected = np.zeros((t, m), dtype=bool)
        for j in range(phases):
            choices = rng.integers(0, b_r, size=(t, m))
            if strategy == "A" and detected.any():
                choices = np.where(detected, park[None, :], choices)
            flat = choices + (np.arange(t) * n_bins)[:, None]
            occ = np.bincount(flat.ravel(), minlength=t * n_bins).reshape(t, n_bins)
            share = np.take_along_axis(occ, choices, axis=1)
            p_hit = ktab[np.minimum(share, m)]
            hits = rng.random((t, m)) < p_hit
            if strategy == "A":
                detected |= hits
                counts[done : done + t, j] = detected.sum(axis=1)
            else:
                counts[done : done + t, j] = hits.sum(axis=1)
        done += t
    return StrategyResult(strategy=strategy, config=config, counts=counts)


def write_access_csv(rows, path) -> None:
    """Columns: J, m, probability, source, strategy."""
    with open(path, "w") as fh:
        fh.write("J,m,probability,source,strategy\n")
        for j, m, prob, source, strategy in rows:
            fh.write(f"{j},{m},{prob:.12g},{source},{strategy}\n")
