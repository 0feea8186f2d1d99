"""Text persistence for snapshots and rescaled profiles.

One self-describing header (comment lines of key=value pairs) followed by
one "coordinate value" pair per line.  Floats are written with Python's
shortest round-trip representation, so save -> load is bit-exact; the grid
is stored as its build recipe and rebuilt deterministically on load.
"""

from __future__ import annotations

from pathlib import Path

from .profiles import Params
from .rescale import RescaledProfile
from .solver import Field, RadialGrid, Snapshot, SolverConfig, build_grid, make_snapshot

__all__ = ["save_snapshot", "load_snapshot", "save_profile", "load_profile"]

_SNAP_MAGIC = "fdalab snapshot 1"
_PROFILE_MAGIC = "fdalab rescaled-profile 1"


def _fmt(x) -> str:
    """Shortest representation that round-trips exactly through float()."""
    return repr(float(x))


def _header_lines(kind: str, params: Params, grid: RadialGrid, extra: dict) -> list[str]:
    lines = [f"# {kind}"]
    lines.append(
        f"# dim={params.N} m={_fmt(params.m)} q={_fmt(params.q)} critical={int(params.critical)}"
    )
    lines.append(
        f"# grid r_max={_fmt(grid.r_max)} n_cells={grid.n_cells} stretch={_fmt(grid.stretch)}"
    )
    for key, val in extra.items():
        rendered = _fmt(val) if isinstance(val, float) else val
        lines.append(f"# {key}={rendered}")
    return lines


def _parse_header(text_lines: list[str], magic: str) -> tuple[dict, int]:
    fields: dict[str, str] = {}
    n_header = 0
    for line in text_lines:
        if not line.startswith("#"):
            break
        n_header += 1
        body = line[1:].strip()
        if body == magic:
            fields["_magic"] = body
            continue
        for token in body.split():
            if "=" in token:
                key, val = token.split("=", 1)
                fields[key] = val
            else:
                # multi-word prefix such as "grid"; keys that follow are unique anyway
                continue
    if fields.get("_magic") != magic:
        raise ValueError(f"not a {magic!r} file")
    return fields, n_header


def _rebuild(fields: dict) -> tuple[Params, RadialGrid]:
    params = Params(
        N=int(fields["dim"]),
        m=float(fields["m"]),
        q=float(fields["q"]),
        critical=bool(int(fields["critical"])),
    )
    grid = build_grid(
        dim=params.N,
        r_max=float(fields["r_max"]),
        n_cells=int(fields["n_cells"]),
        stretch=float(fields["stretch"]),
    )
    return params, grid


def save_snapshot(
    path, snap: Snapshot, params: Params, config: SolverConfig | None = None
) -> None:
    grid = snap.field.grid
    extra = {"t": float(snap.t)}
    if config is not None:
        extra["bc"] = config.bc
        extra["absorption_mode"] = config.absorption_mode
    lines = _header_lines(_SNAP_MAGIC, params, grid, extra)
    for r, u in zip(grid.centers, snap.field.values):
        lines.append(f"{_fmt(r)} {_fmt(u)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_snapshot(path) -> tuple[Snapshot, Params]:
    text_lines = Path(path).read_text().splitlines()
    fields, n_header = _parse_header(text_lines, _SNAP_MAGIC)
    params, grid = _rebuild(fields)
    values = [float(line.split()[1]) for line in text_lines[n_header:] if line.strip()]
    snap = make_snapshot(float(fields["t"]), Field(grid, values))
    return snap, params


def save_profile(path, profile: RescaledProfile, params: Params) -> None:
    if profile.grid is None:
        raise ValueError("profile carries no grid; refusing to persist unanchored nodes")
    extra = {"s": float(profile.s), "T": float(profile.T)}
    lines = _header_lines(_PROFILE_MAGIC, params, profile.grid, extra)
    for y, v in zip(profile.y, profile.values):
        lines.append(f"{_fmt(y)} {_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_profile(path) -> tuple[RescaledProfile, Params]:
    text_lines = Path(path).read_text().splitlines()
    fields, n_header = _parse_header(text_lines, _PROFILE_MAGIC)
    params, grid = _rebuild(fields)
    pairs = [line.split() for line in text_lines[n_header:] if line.strip()]
    profile = RescaledProfile(
        s=float(fields["s"]),
        T=float(fields["T"]),
        y=[float(p[0]) for p in pairs],
        values=[float(p[1]) for p in pairs],
        grid=grid,
    )
    return profile, params
