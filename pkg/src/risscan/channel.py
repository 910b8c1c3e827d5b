"""Per-subcarrier channel synthesis and OFDM frame generation.

Three physical links are modeled:

* static BS link: Rice/Rayleigh direct channel from a transmitter to the
  BS array, constant over one detection phase;
* transmitter -> RIS link: deterministic near-field propagation with the
  transmitter's synchronization phase attached;
* BS <- RIS link: deterministic, geometry-only, computed once per
  scenario and cached by the caller.

The received frame stacks L time symbols of N_BS antenna samples as
``np.kron(x, h)``: L blocks of N_BS entries, block l scaled by the
pilot symbol of slot l. The matched filter must use the same order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard

from .geometry import C0, PlanarArray, element_gains, nf_steering


class ProtocolError(RuntimeError):
    """Frame sequencing or pilot bookkeeping violated the protocol."""


@dataclass(frozen=True)
class CarrierGrid:
    """OFDM carrier layout: Q subcarriers symmetric about f_o."""

    f_o: float
    num_subcarriers: int
    spacing: float
    frequencies: np.ndarray = field(repr=False, compare=False)
    wavelengths: np.ndarray = field(repr=False, compare=False)


def build_carrier_grid(f_o: float, num_subcarriers: int, spacing: float) -> CarrierGrid:
    if f_o <= 0 or spacing < 0:
        raise ValueError("carrier frequency must be positive, spacing non-negative")
    q = int(num_subcarriers)
    if q < 1:
        raise ValueError(f"need at least one subcarrier, got {num_subcarriers}")
    offsets = (np.arange(q) - (q - 1) / 2.0) * spacing
    freqs = f_o + offsets
    if np.any(freqs <= 0):
        raise ValueError("subcarrier grid extends to non-positive frequencies")
    return CarrierGrid(
        f_o=float(f_o),
        num_subcarriers=q,
        spacing=float(spacing),
        frequencies=freqs,
        wavelengths=C0 / freqs,
    )


@dataclass(frozen=True)
class PilotBook:
    """B = L*Q mutually orthogonal unit-energy pilots.

    Pilot b occupies subcarrier b // L and, for L > 1, modulates the
    (b % L)-th row of a Hadamard design across its L time slots.
    ``symbols[b, q, l]`` is the real pilot value on subcarrier q, slot l.
    """

    timeslots: int
    num_subcarriers: int
    random_pool: int
    assigned_pool: int
    symbols: np.ndarray = field(repr=False, compare=False)

    @property
    def num_pilots(self) -> int:
        return self.timeslots * self.num_subcarriers

    def pilot(self, b: int) -> np.ndarray:
        """Pilot b as a (Q, L) array."""
        return self.symbols[b]


def build_pilot_book(
    timeslots: int, num_subcarriers: int, random_pool=None, assigned_pool=0
) -> PilotBook:
    L, Q = int(timeslots), int(num_subcarriers)
    if L < 1 or Q < 1:
        raise ValueError("timeslots and subcarriers must be positive")
    if L > 1 and (L & (L - 1)) != 0:
        # the +/-1 orthogonal design exists for powers of two only
        raise ValueError(f"timeslots must be 1 or a power of two, got {L}")
    B = L * Q
    if random_pool is None:
        random_pool = B - assigned_pool
    if random_pool < 0 or assigned_pool < 0 or random_pool + assigned_pool != B:
        raise ValueError(
            f"pools must be non-negative and sum to {B}, got {random_pool}+{assigned_pool}"
        )
    rows = hadamard(L).astype(float) / math.sqrt(L) if L > 1 else np.ones((1, 1))
    symbols = np.zeros((B, Q, L))
    for b in range(B):
        symbols[b, b // L, :] = rows[b % L]
    return PilotBook(
        timeslots=L,
        num_subcarriers=Q,
        random_pool=int(random_pool),
        assigned_pool=int(assigned_pool),
        symbols=symbols,
    )


@dataclass
class UeState:
    """One user terminal: position, fading state, protocol flags."""

    position: np.ndarray
    k_rice: float = 10.0
    los_flag: int = 1
    sync_phase: float = 0.0
    pilot_index: int | None = None
    active: bool = True
    detected: bool = False

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if self.k_rice < 0:
            raise ValueError("Rice factor must be non-negative")
        if self.los_flag not in (0, 1):
            raise ValueError("los_flag must be 0 or 1")
        if not 0.0 <= self.sync_phase < 2 * math.pi:
            raise ValueError("sync phase must lie in [0, 2*pi)")


def draw_multipath(rng, shape) -> np.ndarray:
    """I.i.d. standard circularly-symmetric complex Gaussian entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def static_channel(
    ue: UeState, grid: CarrierGrid, bs: PlanarArray, rng=None, multipath=None
) -> np.ndarray:
    """Static direct channel to the BS, shape (Q, N_BS).

    h_q = (beta_q / sqrt(K+1)) * (psi * sqrt(K) * a_q(p) + m_q) with
    beta_q = (lambda_q / (4 pi d_b)) * exp(j phi_o). The multipath draw
    m_q is held fixed for all frames of a detection phase; pass it in to
    reuse, or pass ``rng`` to draw it here.
    """
    n_bs = bs.num_elements
    q = grid.num_subcarriers
    if multipath is None:
        if rng is None:
            raise ValueError("need either an rng or a multipath draw")
        multipath = draw_multipath(rng, (q, n_bs))
    d_b = float(np.linalg.norm(ue.position - bs.center))
    out = np.empty((q, n_bs), dtype=complex)
    k = ue.k_rice
    for qi, lam in enumerate(grid.wavelengths):
        beta = lam / (4.0 * math.pi * d_b) * np.exp(1j * ue.sync_phase)
        alpha = nf_steering(bs, ue.position, lam)
        out[qi] = beta / math.sqrt(k + 1.0) * (
            ue.los_flag * math.sqrt(k) * alpha + multipath[qi]
        )
    return out


def ris_ue_channel(ue: UeState, ris: PlanarArray, grid: CarrierGrid) -> np.ndarray:
    """Transmitter -> RIS link, shape (Q, N_RIS).

    Entry i is G(theta_i) * lambda_q / (4 pi d_i) * exp(-j 2 pi d_i / lambda_q
    + j phi_o), d_i the distance from the transmitter to element i.
    """
    d = np.linalg.norm(ue.position[None, :] - ris.element_positions, axis=1)
    gains = element_gains(ris, ue.position)
    lam = grid.wavelengths[:, None]
    return (
        gains[None, :]
        * lam
        / (4.0 * math.pi * d[None, :])
        * np.exp(-2j * np.pi * d[None, :] / lam + 1j * ue.sync_phase)
    )


def bs_ris_channel(ris: PlanarArray, bs: PlanarArray, grid: CarrierGrid) -> np.ndarray:
    """Deterministic BS <- RIS link, shape (Q, N_BS, N_RIS).

    Entry (a, e) carries both element gains, free-space amplitude
    lambda_q / (4 pi d_ae) and the propagation phase over the pairwise
    element distance d_ae. Geometry-only: compute once per scenario.
    """
    diff = ris.element_positions[None, :, :] - bs.element_positions[:, None, :]
    d = np.linalg.norm(diff, axis=2)  # (N_BS, N_RIS)
    if np.any(d == 0):
        raise ValueError("BS and RIS arrays overlap")
    v = diff / d[:, :, None]  # unit directions BS element -> RIS element

    u1b, u2b = bs.axes
    az_b = np.arctan2(v @ u1b, v @ bs.normal)
    el_b = np.arcsin(np.clip(v @ u2b, -1.0, 1.0))
    g_bs = np.cos(az_b) ** 2 * np.cos(el_b) ** 2

    u1r, u2r = ris.axes
    w = -v  # directions RIS element -> BS element
    az_r = np.arctan2(w @ u1r, w @ ris.normal)
    el_r = np.arcsin(np.clip(w @ u2r, -1.0, 1.0))
    g_ris = np.cos(az_r) ** 2 * np.cos(el_r) ** 2

    lam = grid.wavelengths[:, None, None]
    return (
        (g_bs * g_ris)[None, :, :]
        * lam
        / (4.0 * math.pi * d[None, :, :])
        * np.exp(-2j * np.pi * d[None, :, :] / lam)
    )


def cascade_matrix(h_bs_ris_q: np.ndarray, ris: PlanarArray, p, wavelength: float) -> np.ndarray:
    """Cascade H diag(a(p)) for one RIS and subcarrier, shape (N_BS, N_RIS)."""
    alpha = nf_steering(ris, p, wavelength)
    return h_bs_ris_q * alpha[None, :]


def cascade_stack(h_bs_ris: np.ndarray, ris: PlanarArray, points, grid: CarrierGrid) -> np.ndarray:
    """Cascade matrices for many probe points, shape (P, Q, N_BS, N_RIS)."""
    points = np.asarray(points, dtype=float)
    alphas = np.stack(
        [
            np.stack([nf_steering(ris, p, lam) for lam in grid.wavelengths])
            for p in points
        ]
    )  # (P, Q, N_RIS)
    return h_bs_ris[None, :, :, :] * alphas[:, :, None, :]


@dataclass(frozen=True)
class ChannelSet:
    """All channels of one detection phase, immutable after build.

    ``static_h``: (M, Q, N_BS); ``multipath``: the frozen draws behind it;
    ``ris_ue[k]``: (M, Q, N_RIS_k); ``bs_ris[k]``: (Q, N_BS, N_RIS_k).
    """

    grid: CarrierGrid
    bs: PlanarArray
    ris: tuple
    static_h: np.ndarray
    ris_ue: tuple
    bs_ris: tuple
    multipath: np.ndarray

    @property
    def num_ues(self) -> int:
        return self.static_h.shape[0]

    def nonstatic(self, configs, ue_index=None) -> np.ndarray:
        """RIS-cascaded channel sum_k H_k diag(w_k) r_k.

        ``configs`` is a sequence of per-RIS weight vectors. Returns
        (Q, N_BS) for one transmitter or (M, Q, N_BS) for all.
        """
        if ue_index is None:
            m = self.num_ues
            out = np.zeros((m, self.grid.num_subcarriers, self.bs.num_elements), dtype=complex)
            for k, omega in enumerate(configs):
                out += np.einsum(
                    "qae,e,mqe->mqa", self.bs_ris[k], np.asarray(omega), self.ris_ue[k]
                )
            return out
        out = np.zeros((self.grid.num_subcarriers, self.bs.num_elements), dtype=complex)
        for k, omega in enumerate(configs):
            out += np.einsum(
                "qae,e,qe->qa", self.bs_ris[k], np.asarray(omega), self.ris_ue[k][ue_index]
            )
        return out


def build_channel_set(ues, grid: CarrierGrid, bs: PlanarArray, ris_arrays, rng) -> ChannelSet:
    """Draw one phase's channels for every transmitter.

    Multipath is drawn here once; the BS<-RIS matrices are recomputed
    unless ``ris_arrays`` entries are (array, cached_matrix) pairs.
    """
    arrays = []
    cached = []
    for entry in ris_arrays:
        if isinstance(entry, tuple):
            arrays.append(entry[0])
            cached.append(entry[1])
        else:
            arrays.append(entry)
            cached.append(None)
    m = len(ues)
    multipath = draw_multipath(rng, (m, grid.num_subcarriers, bs.num_elements))
    static = np.stack(
        [static_channel(ue, grid, bs, multipath=multipath[i]) for i, ue in enumerate(ues)]
    ) if m else np.zeros((0, grid.num_subcarriers, bs.num_elements), dtype=complex)
    ris_ue = tuple(
        np.stack([ris_ue_channel(ue, ris, grid) for ue in ues])
        if m
        else np.zeros((0, grid.num_subcarriers, ris.num_elements), dtype=complex)
        for ris in arrays
    )
    bs_ris = tuple(
        c if c is not None else bs_ris_channel(ris, bs, grid)
        for ris, c in zip(arrays, cached)
    )
    return ChannelSet(
        grid=grid,
        bs=bs,
        ris=tuple(arrays),
        static_h=static,
        ris_ue=ris_ue,
        bs_ris=bs_ris,
        multipath=multipath,
    )


@dataclass(frozen=True)
class RxFrame:
    """One received OFDM frame: y[q] stacks L blocks of N_BS samples."""

    index: int
    y: np.ndarray  # (Q, L * N_BS)
    p_sym: float
    noise_power: float
    pilots_used: tuple = ()


def synthesize_frame(
    index: int,
    ues,
    pilots: PilotBook,
    channels: ChannelSet,
    frame_configs,
    p_sym: float,
    noise_var: float,
    rng,
) -> RxFrame:
    """Received frame y_q = sqrt(P) sum_m kron(x^(b_m), h_q^(m)) + z.

    ``frame_configs`` holds this frame's per-RIS weight vector; the total
    channel is static + cascaded. Noise is fresh per frame with per-entry
    variance ``noise_var``.
    """
    q, n_bs = channels.grid.num_subcarriers, channels.bs.num_elements
    L = pilots.timeslots
    y = np.zeros((q, L * n_bs), dtype=complex)
    used = []
    for i, ue in enumerate(ues):
        if not ue.active:
            continue
        if ue.pilot_index is None:
            raise ProtocolError(f"active transmitter {i} has no pilot")
        h = channels.static_h[i] + channels.nonstatic(frame_configs, ue_index=i)
        x = pilots.pilot(ue.pilot_index)  # (Q, L)
        for qi in range(q):
            y[qi] += np.kron(x[qi], h[qi])
        used.append((i, ue.pilot_index))
    y *= math.sqrt(p_sym)
    if noise_var > 0:
        y += math.sqrt(noise_var) * draw_multipath(rng, y.shape)
    return RxFrame(
        index=index,
        y=y,
        p_sym=float(p_sym),
        noise_power=float(noise_var),
        pilots_used=tuple(sorted(used)),
    )


def noise_power(density_dbm_per_hz: float, figure_db: float, bandwidth_hz: float) -> float:
    """Thermal noise power in watts over the given bandwidth."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    dbw = density_dbm_per_hz - 30.0 + 10.0 * math.log10(bandwidth_hz) + figure_db
    return 10.0 ** (dbw / 10.0)


def dump_bs_ris_csv(channels: ChannelSet, path) -> None:
    """Write the deterministic BS<-RIS tensors as CSV rows k,q,i,j,re,im.

    Row order is row-major over (k, q, i, j) with i the BS antenna and
    j the RIS element, so an independent implementation can diff its
    tensors against this dump directly.
    """
    with open(path, "w") as fh:
        fh.write("k,q,i,j,re,im\n")
        for k, h in enumerate(channels.bs_ris):
            q, n_bs, n_ris = h.shape
            for qi in range(q):
                for i in range(n_bs):
                    row = h[qi, i]
                    for j in range(n_ris):
                        fh.write(f"{k},{qi},{i},{j},{row[j].real:.17g},{row[j].imag:.17g}\n")
