"""Deterministic on-disk formats: field snapshots, trajectory directories,
CSV tables, and JSON summaries.

Snapshots are raw little-endian float64 interleaved (re, im) arrays of
length 2N beside a JSON sidecar carrying {L, N, sign, time, label}.  All
scalar tables are CSV (long format); floats are written with repr so that
identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .flows import FlowSpec, Trajectory
from .spectral import Field, Grid

FORMAT_TAG = "aknslab-v1"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        c = complex(value)
        return f"{c.real!r}{'+' if c.imag >= 0 else '-'}{abs(c.imag)!r}j"
    return str(value)


def write_csv(path: str, header: list[str], rows: list) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def snapshot_paths(base: str) -> tuple[str, str]:
    return base + ".f64", base + ".json"


def write_snapshot(base: str, field: Field, time: float = 0.0,
                   label: str = "") -> None:
    raw, side = snapshot_paths(base)
    inter = np.empty(2 * field.grid.points, dtype="<f8")
    inter[0::2] = field.values.real
    inter[1::2] = field.values.imag
    inter.tofile(raw)
    write_json(side, {"format": FORMAT_TAG, "L": field.grid.length,
                      "N": field.grid.points, "sign": field.sign,
                      "time": time, "label": label})


def read_snapshot(base: str) -> tuple[Field, dict]:
    raw, side = snapshot_paths(base)
    with open(side) as fh:
        meta = json.load(fh)
    inter = np.fromfile(raw, dtype="<f8")
    n = int(meta["N"])
    if inter.shape != (2 * n,):
        raise ValueError(f"snapshot {raw} has {inter.size} values, expected {2 * n}")
    values = inter[0::2] + 1j * inter[1::2]
    return Field(Grid(float(meta["L"]), n), values, int(meta["sign"])), meta


def write_array_snapshot(base: str, grid: Grid, values: np.ndarray,
                         sign: int, time: float, label: str) -> None:
    write_snapshot(base, Field(grid, values, sign), time, label)


def write_trajectory(dirpath: str, traj: Trajectory,
                     conserved: dict | None = None) -> None:
    os.makedirs(dirpath, exist_ok=True)
    entries = []
    for i in range(len(traj)):
        name = f"q_{i:06d}"
        write_array_snapshot(os.path.join(dirpath, name), traj.grid,
                             traj.states[i], traj.sign, traj.times[i], name)
        entry = {"index": i, "time": traj.times[i], "file": name}
        if traj.r_states is not None:
            rname = f"r_{i:06d}"
            write_array_snapshot(os.path.join(dirpath, rname), traj.grid,
                                 traj.r_states[i], traj.sign, traj.times[i], rname)
            entry["r_file"] = rname
        entries.append(entry)
    write_json(os.path.join(dirpath, "manifest.json"), {
        "format": FORMAT_TAG,
        "spec": traj.spec.as_dict(),
        "grid": {"L": traj.grid.length, "N": traj.grid.points},
        "sign": traj.sign,
        "stats": traj.stats,
        "snapshots": entries,
        "conserved": conserved or {},
    })


def read_trajectory(dirpath: str) -> Trajectory:
    with open(os.path.join(dirpath, "manifest.json")) as fh:
        manifest = json.load(fh)
    spec_dict = dict(manifest["spec"])
    spec = FlowSpec(**spec_dict)
    grid = Grid(float(manifest["grid"]["L"]), int(manifest["grid"]["N"]))
    sign = int(manifest["sign"])
    times, states, r_states = [], [], []
    has_r = any("r_file" in e for e in manifest["snapshots"])
    for entry in manifest["snapshots"]:
        f, _ = read_snapshot(os.path.join(dirpath, entry["file"]))
        times.append(float(entry["time"]))
        states.append(f.values)
        if has_r:
            rf, _ = read_snapshot(os.path.join(dirpath, entry["r_file"]))
            r_states.append(rf.values)
    return Trajectory(spec, grid, sign, times, states,
                      r_states if has_r else None, dict(manifest["stats"]))
