"""Scenario files: typed TOML configs for geometry, carriers, and UEs.

A scenario fixes everything the simulator needs: the carrier grid, BS
and RIS arrays, inspected regions with their cell grids, pilot pools,
noise figures, transmit power, the UE population, and the master seed.
Unknown keys are rejected so typos fail loudly.

The scenario hash covers exactly the fields a scanning codebook depends
on (carrier grid, arrays, regions, cell grids). Pilot pool splits,
power, noise, UE population and seeds are excluded on purpose: changing
them must not invalidate a designed codebook.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .channel import CarrierGrid, PilotBook, UeState, bs_ris_channel, build_carrier_grid, build_pilot_book, noise_power
from .geometry import C0, PlanarArray, Region, build_upa, partition_region


class ScenarioError(ValueError):
    """Scenario file missing, malformed, or inconsistent."""


class IntegrityError(RuntimeError):
    """An artifact does not match the scenario it is used with."""


@dataclass(frozen=True)
class FixedUe:
    position: np.ndarray
    pilot_index: int | None  # 0-based, or None for contention


@dataclass(frozen=True)
class UePopulation:
    count: int
    k_rice: float
    los_probability: float
    fixed: tuple = ()


@dataclass
class Scenario:
    name: str
    grid: CarrierGrid
    pilots: PilotBook
    bs: PlanarArray
    ris_arrays: tuple
    regions: tuple
    partitions: tuple
    noise_bandwidth_hz: float
    noise_density_dbm_per_hz: float
    noise_figure_db: float
    p_sym_dbw: float
    power_sweep_dbw: tuple
    ues: UePopulation
    master_seed: int
    _bs_ris_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_ris(self) -> int:
        return len(self.ris_arrays)

    @property
    def p_sym_w(self) -> float:
        return 10.0 ** (self.p_sym_dbw / 10.0)

    @property
    def noise_var(self) -> float:
        return noise_power(
            self.noise_density_dbm_per_hz, self.noise_figure_db, self.noise_bandwidth_hz
        )

    def bs_ris(self, k: int) -> np.ndarray:
        """Deterministic BS<-RIS matrices for RIS k, computed once."""
        if k not in self._bs_ris_cache:
            self._bs_ris_cache[k] = bs_ris_channel(self.ris_arrays[k], self.bs, self.grid)
        return self._bs_ris_cache[k]


def _reject_unknown(table: dict, allowed, where: str):
    extra = set(table) - set(allowed)
    if extra:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(extra)}")


def _get(table: dict, key: str, kind, where: str, default=...):
    if key not in table:
        if default is not ...:
            return default
        raise ScenarioError(f"{where}.{key}: missing")
    v = table[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"{where}.{key}: expected a number, got {v!r}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ScenarioError(f"{where}.{key}: expected an integer, got {v!r}")
        return v
    if kind is str:
        if not isinstance(v, str):
            raise ScenarioError(f"{where}.{key}: expected a string, got {v!r}")
        return v
    if kind is list:
        if not isinstance(v, list):
            raise ScenarioError(f"{where}.{key}: expected a list, got {v!r}")
        return v
    raise AssertionError(kind)


def _vec3(table, key, where, default=...):
    v = _get(table, key, list, where, default)
    if v is default:
        return v
    if len(v) != 3 or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ScenarioError(f"{where}.{key}: expected three numbers")
    return [float(x) for x in v]


def _parse_array(table: dict, where: str, default_plane: str, wavelength: float) -> PlanarArray:
    _reject_unknown(table, {"center", "counts", "spacing_wavelengths", "plane", "normal"}, where)
    center = _vec3(table, "center", where)
    counts = _get(table, "counts", list, where)
    if len(counts) != 2 or any(isinstance(c, bool) or not isinstance(c, int) for c in counts):
        raise ScenarioError(f"{where}.counts: expected two integers")
    spacing_wl = _get(table, "spacing_wavelengths", float, where, 0.5)
    plane = _get(table, "plane", str, where, default_plane)
    normal = _vec3(table, "normal", where, None)
    try:
        return build_upa(center, counts, spacing_wl * wavelength, plane, normal=normal)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def parse_scenario(data: dict, name: str = "scenario") -> Scenario:
    if not isinstance(data, dict) or not data:
        raise ScenarioError("empty scenario")
    _reject_unknown(
        data,
        {"schema", "name", "carrier", "noise", "power", "pilots", "bs", "ris", "ues", "seeds"},
        "top level",
    )
    schema = _get(data, "schema", int, "top level", 1)
    if schema != 1:
        raise ScenarioError(f"top level.schema: unsupported version {schema}")
    name = _get(data, "name", str, "top level", name)

    car = data.get("carrier")
    if not isinstance(car, dict):
        raise ScenarioError("carrier: missing or not a table")
    _reject_unknown(
        car, {"f_o_hz", "subcarriers", "subcarrier_spacing_hz", "noise_bandwidth_hz"}, "carrier"
    )
    f_o = _get(car, "f_o_hz", float, "carrier")
    n_sub = _get(car, "subcarriers", int, "carrier")
    w_sub = _get(car, "subcarrier_spacing_hz", float, "carrier")
    bw = _get(car, "noise_bandwidth_hz", float, "carrier")
    if bw <= 0:
        raise ScenarioError("carrier.noise_bandwidth_hz: must be positive")
    try:
        grid = build_carrier_grid(f_o, n_sub, w_sub)
    except ValueError as exc:
        raise ScenarioError(f"carrier: {exc}") from None
    wavelength_o = C0 / f_o

    noi = data.get("noise")
    if not isinstance(noi, dict):
        raise ScenarioError("noise: missing or not a table")
    _reject_unknown(noi, {"density_dbm_per_hz", "figure_db"}, "noise")
    density = _get(noi, "density_dbm_per_hz", float, "noise")
    figure = _get(noi, "figure_db", float, "noise")

    pow_t = data.get("power")
    if not isinstance(pow_t, dict):
        raise ScenarioError("power: missing or not a table")
    _reject_unknown(pow_t, {"p_sym_dbw", "sweep_dbw"}, "power")
    p_sym_dbw = _get(pow_t, "p_sym_dbw", float, "power")
    sweep = _get(pow_t, "sweep_dbw", list, "power", [])
    if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in sweep):
        raise ScenarioError("power.sweep_dbw: expected numbers")

    pil = data.get("pilots")
    if not isinstance(pil, dict):
        raise ScenarioError("pilots: missing or not a table")
    _reject_unknown(pil, {"timeslots", "random_pool", "assigned_pool"}, "pilots")
    slots = _get(pil, "timeslots", int, "pilots", 1)
    b_total = slots * n_sub
    b_a = _get(pil, "assigned_pool", int, "pilots", 0)
    b_r = _get(pil, "random_pool", int, "pilots", b_total - b_a)
    try:
        pilots = build_pilot_book(slots, n_sub, random_pool=b_r, assigned_pool=b_a)
    except ValueError as exc:
        raise ScenarioError(f"pilots: {exc}") from None

    bs_t = data.get("bs")
    if not isinstance(bs_t, dict):
        raise ScenarioError("bs: missing or not a table")
    bs = _parse_array(bs_t, "bs", "xz", wavelength_o)

    ris_list = data.get("ris")
    if not isinstance(ris_list, list) or not ris_list:
        raise ScenarioError("ris: need at least one [[ris]] table")
    ris_arrays, regions, partitions = [], [], []
    for k, entry in enumerate(ris_list):
        where = f"ris[{k}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{where}: not a table")
        _reject_unknown(
            entry,
            {"center", "counts", "spacing_wavelengths", "plane", "normal", "region", "grid"},
            where,
        )
        arr = _parse_array(
            {kk: vv for kk, vv in entry.items() if kk not in ("region", "grid")},
            where,
            "xy",
            wavelength_o,
        )
        bounds = _get(entry, "region", list, where)
        if (
            len(bounds) != 3
            or any(not isinstance(iv, list) or len(iv) != 2 for iv in bounds)
            or any(
                isinstance(x, bool) or not isinstance(x, (int, float))
                for iv in bounds
                for x in iv
            )
        ):
            raise ScenarioError(f"{where}.region: expected three [lo, hi] pairs")
        try:
            region = Region(np.asarray(bounds, dtype=float))
        except ValueError as exc:
            raise ScenarioError(f"{where}.region: {exc}") from None
        cell_grid = _get(entry, "grid", list, where)
        if len(cell_grid) != 3 or any(
            isinstance(g, bool) or not isinstance(g, int) for g in cell_grid
        ):
            raise ScenarioError(f"{where}.grid: expected three integers")
        try:
            part = partition_region(region, cell_grid)
        except ValueError as exc:
            raise ScenarioError(f"{where}.grid: {exc}") from None
        ris_arrays.append(arr)
        regions.append(region)
        partitions.append(part)
    n_cells = partitions[0].num_cells
    if any(p.num_cells != n_cells for p in partitions):
        raise ScenarioError("ris: all partitions must have the same cell count")

    ues_t = data.get("ues")
    if not isinstance(ues_t, dict):
        raise ScenarioError("ues: missing or not a table")
    _reject_unknown(ues_t, {"count", "k_rice", "los_probability", "fixed"}, "ues")
    fixed_raw = _get(ues_t, "fixed", list, "ues", [])
    fixed = []
    for i, f_t in enumerate(fixed_raw):
        where = f"ues.fixed[{i}]"
        if not isinstance(f_t, dict):
            raise ScenarioError(f"{where}: not a table")
        _reject_unknown(f_t, {"position", "pilot"}, where)
        pos = np.asarray(_vec3(f_t, "position", where), dtype=float)
        if not any(r.contains(pos) for r in regions):
            raise ScenarioError(f"{where}.position: outside every inspected region")
        pilot = _get(f_t, "pilot", int, where, 0)
        if pilot < 0 or pilot > pilots.num_pilots:
            raise ScenarioError(
                f"{where}.pilot: must be 1..{pilots.num_pilots} (or 0 for contention)"
            )
        fixed.append(FixedUe(position=pos, pilot_index=pilot - 1 if pilot else None))
    count = _get(ues_t, "count", int, "ues", len(fixed) if fixed else 1)
    if fixed and count != len(fixed):
        raise ScenarioError(f"ues.count: {count} does not match {len(fixed)} fixed entries")
    if count < 0:
        raise ScenarioError("ues.count: must be non-negative")
    k_rice = _get(ues_t, "k_rice", float, "ues", 10.0)
    los_p = _get(ues_t, "los_probability", float, "ues", 1.0)
    if k_rice < 0:
        raise ScenarioError("ues.k_rice: must be non-negative")
    if not 0.0 <= los_p <= 1.0:
        raise ScenarioError("ues.los_probability: must lie in [0, 1]")

    seeds = data.get("seeds", {})
    if not isinstance(seeds, dict):
        raise ScenarioError("seeds: not a table")
    _reject_unknown(seeds, {"master"}, "seeds")
    master = _get(seeds, "master", int, "seeds", 0)
    if master < 0:
        raise ScenarioError("seeds.master: must be non-negative")

    return Scenario(
        name=name,
        grid=grid,
        pilots=pilots,
        bs=bs,
        ris_arrays=tuple(ris_arrays),
        regions=tuple(regions),
        partitions=tuple(partitions),
        noise_bandwidth_hz=bw,
        noise_density_dbm_per_hz=density,
        noise_figure_db=figure,
        p_sym_dbw=p_sym_dbw,
        power_sweep_dbw=tuple(float(x) for x in sweep),
        ues=UePopulation(
            count=count, k_rice=k_rice, los_probability=los_p, fixed=tuple(fixed)
        ),
        master_seed=master,
    )


def load_scenario(path) -> Scenario:
    """Parse a scenario TOML file. A bare name loads a bundled preset."""
    spec = os.fspath(path)
    if isinstance(spec, str) and os.path.basename(spec) == spec and not os.path.exists(spec):
        return _load_bundled(spec)
    try:
        with open(spec, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"{spec}: no such file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{spec}: {exc}") from None
    return parse_scenario(data, name=os.path.splitext(os.path.basename(spec))[0])


def _load_bundled(name: str) -> Scenario:
    from importlib import resources

    base = resources.files(__package__) / "scenarios"
    candidate = base / f"{name}.toml"
    if candidate.is_file():
        with resources.as_file(candidate) as p:
            return load_scenario(p)
    have = sorted(
        p.name[: -len(".toml")] for p in base.iterdir() if p.name.endswith(".toml")
    )
    raise ScenarioError(
        f"{name}: not a file and not a bundled scenario (have: {', '.join(have)})"
    )


def scenario_hash(scenario: Scenario) -> str:
    """Digest of the codebook-relevant scenario fields."""
    payload = {
        "carrier": [
            scenario.grid.f_o,
            scenario.grid.num_subcarriers,
            scenario.grid.spacing,
        ],
        "bs": _array_fields(scenario.bs),
        "ris": [
            {
                "array": _array_fields(arr),
                "region": [list(iv) for iv in reg.bounds.tolist()],
                "grid": list(part.grid),
            }
            for arr, reg, part in zip(
                scenario.ris_arrays, scenario.regions, scenario.partitions
            )
        ],
    }
    raw = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()


def _array_fields(arr: PlanarArray):
    return {
        "center": arr.center.tolist(),
        "counts": list(arr.counts),
        "spacing": arr.spacing,
        "plane": arr.plane,
        "normal": arr.normal.tolist(),
    }


def sample_ues(scenario: Scenario, rng, count=None) -> list:
    """Instantiate the UE population for one trial.

    Fixed placements are honored verbatim; otherwise positions are
    uniform over the union of inspected regions (region chosen
    volume-proportionally). Sync phases start at 0 and are redrawn by
    the phase driver.
    """
    pop = scenario.ues
    ues = []
    if pop.fixed and count is None:
        for f in pop.fixed:
            ues.append(
                UeState(
                    position=f.position.copy(),
                    k_rice=pop.k_rice,
                    los_flag=int(rng.random() < pop.los_probability),
                    pilot_index=f.pilot_index,
                )
            )
        return ues
    n = pop.count if count is None else count
    vols = np.array([r.volume for r in scenario.regions])
    w = vols / vols.sum() if vols.sum() > 0 else np.full(len(vols), 1.0 / len(vols))
    for _ in range(n):
        region = scenario.regions[rng.choice(len(w), p=w)]
        ues.append(
            UeState(
                position=region.sample(rng),
                k_rice=pop.k_rice,
                los_flag=int(rng.random() < pop.los_probability),
            )
        )
    return ues
