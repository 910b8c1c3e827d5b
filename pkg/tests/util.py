"""Shared builders for test scenarios.

Everything here returns plain nested dicts in the scenario-file schema
so individual tests can tweak fields before parsing. Keeping them as
dicts (rather than TOML strings) makes the perturbation tests cheap.
"""

import copy

from risscan.scenario import parse_scenario

DESK_DICT = {
    "schema": 1,
    "name": "desk-variant",
    "carrier": {
        "f_o_hz": 6.0e9,
        "subcarriers": 3,
        "subcarrier_spacing_hz": 30.0e3,
        "noise_bandwidth_hz": 15.0e3,
    },
    "noise": {"density_dbm_per_hz": -174.0, "figure_db": 10.0},
    "power": {"p_sym_dbw": -50.0},
    "pilots": {"timeslots": 1, "random_pool": 2, "assigned_pool": 1},
    "bs": {
        "center": [1.5, 0.0, 2.0],
        "counts": [8, 4],
        "spacing_wavelengths": 0.5,
        "plane": "xz",
    },
    "ris": [
        {
            "center": [1.5, 1.5, 3.0],
            "counts": [12, 12],
            "spacing_wavelengths": 0.5,
            "plane": "xy",
            "region": [[1.05, 1.95], [1.05, 1.95], [1.2, 1.6]],
            "grid": [3, 3, 1],
        }
    ],
    "ues": {"count": 1, "k_rice": 10.0, "los_probability": 1.0},
    "seeds": {"master": 7},
}

# Two 12x12 RISs over side-by-side regions, three pilots, three fixed
# UEs at cell centers: pilots 1 / 2 / 2 with the shared pilot split
# across the two regions.
TWO_RIS_DICT = {
    "schema": 1,
    "name": "desk-pair",
    "carrier": {
        "f_o_hz": 6.0e9,
        "subcarriers": 3,
        "subcarrier_spacing_hz": 30.0e3,
        "noise_bandwidth_hz": 15.0e3,
    },
    "noise": {"density_dbm_per_hz": -174.0, "figure_db": 10.0},
    "power": {"p_sym_dbw": -50.0},
    "pilots": {"timeslots": 1, "random_pool": 3, "assigned_pool": 0},
    "bs": {
        "center": [1.5, 0.0, 2.0],
        "counts": [8, 4],
        "spacing_wavelengths": 0.5,
        "plane": "xz",
    },
    "ris": [
        {
            "center": [0.9, 1.5, 3.0],
            "counts": [12, 12],
            "spacing_wavelengths": 0.5,
            "plane": "xy",
            "region": [[0.45, 1.35], [1.05, 1.95], [1.2, 1.6]],
            "grid": [3, 3, 1],
        },
        {
            "center": [2.1, 1.5, 3.0],
            "counts": [12, 12],
            "spacing_wavelengths": 0.5,
            "plane": "xy",
            "region": [[1.65, 2.55], [1.05, 1.95], [1.2, 1.6]],
            "grid": [3, 3, 1],
        },
    ],
    "ues": {
        "count": 3,
        "k_rice": 10.0,
        "los_probability": 1.0,
        "fixed": [
            {"position": [0.6, 1.2, 1.4], "pilot": 1},
            {"position": [1.2, 1.8, 1.4], "pilot": 2},
            {"position": [2.1, 1.5, 1.4], "pilot": 2},
        ],
    },
    "seeds": {"master": 21},
}

# Minimal everything: 2x2 arrays, one cell, two pilots with one
# reserved, one fixed UE. Fast enough to design inside a single test.
MICRO_DICT = {
    "schema": 1,
    "name": "micro",
    "carrier": {
        "f_o_hz": 6.0e9,
        "subcarriers": 2,
        "subcarrier_spacing_hz": 30.0e3,
        "noise_bandwidth_hz": 15.0e3,
    },
    "noise": {"density_dbm_per_hz": -174.0, "figure_db": 10.0},
    "power": {"p_sym_dbw": -45.0},
    "pilots": {"timeslots": 1, "random_pool": 1, "assigned_pool": 1},
    "bs": {
        "center": [1.5, 0.0, 2.0],
        "counts": [2, 2],
        "spacing_wavelengths": 0.5,
        "plane": "xz",
    },
    "ris": [
        {
            "center": [1.5, 1.5, 3.0],
            "counts": [2, 2],
            "spacing_wavelengths": 0.5,
            "plane": "xy",
            "region": [[1.2, 1.8], [1.2, 1.8], [1.3, 1.5]],
            "grid": [1, 1, 1],
        }
    ],
    "ues": {
        "count": 1,
        "k_rice": 10.0,
        "los_probability": 1.0,
        "fixed": [{"position": [1.5, 1.5, 1.4], "pilot": 1}],
    },
    "seeds": {"master": 3},
}

# Three tiny RISs for multi-RIS separation checks: 3x3 elements each,
# two cells per region, three pilots.
TRIPLE_DICT = {
    "schema": 1,
    "name": "triple",
    "carrier": {
        "f_o_hz": 6.0e9,
        "subcarriers": 3,
        "subcarrier_spacing_hz": 30.0e3,
        "noise_bandwidth_hz": 15.0e3,
    },
    "noise": {"density_dbm_per_hz": -174.0, "figure_db": 10.0},
    "power": {"p_sym_dbw": -50.0},
    "pilots": {"timeslots": 1, "random_pool": 3, "assigned_pool": 0},
    "bs": {
        "center": [1.5, 0.0, 2.0],
        "counts": [2, 2],
        "spacing_wavelengths": 0.5,
        "plane": "xz",
    },
    "ris": [
        {
            "center": [0.6, 1.5, 3.0],
            "counts": [3, 3],
            "spacing_wavelengths": 0.5,
            "plane": "xy",
            "region": [[0.3, 0.9], [1.2, 1.8], [1.3, 1.5]],
            "grid": [2, 1, 1],
        },
        {
            "center": [1.5, 1.5, 3.0],
            "counts": [3, 3],
            "spacing_wavelengths": 0.5,
            "plane": "xy",
            "region": [[1.2, 1.8], [1.2, 1.8], [1.3, 1.5]],
            "grid": [2, 1, 1],
        },
        {
            "center": [2.4, 1.5, 3.0],
            "counts": [3, 3],
            "spacing_wavelengths": 0.5,
            "plane": "xy",
            "region": [[2.1, 2.7], [1.2, 1.8], [1.3, 1.5]],
            "grid": [2, 1, 1],
        },
    ],
    "ues": {"count": 3, "k_rice": 5.0, "los_probability": 1.0},
    "seeds": {"master": 5},
}


def scenario_from(template, mutate=None, name=None):
    """Parse a deep-copied template dict, optionally mutated first."""
    data = copy.deepcopy(template)
    if mutate is not None:
        mutate(data)
    if name is not None:
        data["name"] = name
    return parse_scenario(data, name=data.get("name", "test"))


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v + '"'
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot emit {type(v)!r}")


def dump_toml(data, path):
    """Write a nested scenario dict as a TOML file.

    Covers what the schema needs: scalars, inline arrays, subtables,
    and arrays of tables. Scalar keys come before table headers as the
    format requires.
    """
    lines = []

    def is_table_list(v):
        return isinstance(v, list) and v and isinstance(v[0], dict)

    def emit(table, prefix):
        for k, v in table.items():
            if not isinstance(v, dict) and not is_table_list(v):
                lines.append(f"{k} = {_toml_value(v)}")
        for k, v in table.items():
            if isinstance(v, dict):
                lines.append("")
                lines.append(f"[{prefix}{k}]")
                emit(v, f"{prefix}{k}.")
            elif is_table_list(v):
                for item in v:
                    lines.append("")
                    lines.append(f"[[{prefix}{k}]]")
                    emit(item, f"{prefix}{k}.")

    emit(data, "")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
