"""On-disk formats for environment windows.

Snapshot layout (little-endian)::

    offset  size  field
    0       4     magic b"LADW"
    4       2     format version (1)
    6       2     flags (bit 0: boundary column is a pre-regeneration point)
    8       8     p as float64 (NaN if unknown)
    16      8     seed as int64 (-1 if unknown)
    24      8     x_min as int64
    32      8     x_max as int64
    40      n     one byte per column x_min..x_max

Column byte: bits 0-2 slab (h0, h1, v; zero for the boundary column), bits
3-4 t-state, bit 5 pre-regeneration point, bits 6-7 dead end on level 0/1.
Annotation bits are informational; loading recomputes them.
"""
from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .config import ConfigError, LadderConfig, annotate
from .model import T_NAMES

MAGIC = b"LADW"
VERSION = 1
HEADER = struct.Struct("<4sHHdqqq")


def pack_columns(config: LadderConfig) -> np.ndarray:
    cfg = config if config.annotated else annotate(config)
    out = cfg.slab_at().astype(np.uint8)
    out |= (cfg.t_states.astype(np.uint8) & 3) << 3
    out |= cfg.pre_regen.astype(np.uint8) << 5
    dead = cfg.dead_ends
    out |= dead[:, 0].astype(np.uint8) << 6
    out |= dead[:, 1].astype(np.uint8) << 7
    return out


def to_bytes(config: LadderConfig) -> bytes:
    p = math.nan if config.p is None else float(config.p)
    seed = -1 if config.seed is None else int(config.seed)
    head = HEADER.pack(MAGIC, VERSION, int(config.boundary_pre_regen), p, seed, config.x_min, config.x_max)
    return head + pack_columns(config).tobytes()


def from_bytes(data: bytes) -> LadderConfig:
    if len(data) < HEADER.size:
        raise ConfigError("truncated snapshot header")
    magic, version, flags, p, seed, x_min, x_max = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ConfigError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ConfigError(f"unsupported snapshot version {version}")
    n = x_max - x_min + 1
    body = np.frombuffer(data, np.uint8, offset=HEADER.size)
    if body.size != n:
        raise ConfigError(f"expected {n} column bytes, found {body.size}")
    slabs = (body[1:] & 7).astype(np.uint8)
    t = ((body >> 3) & 3).astype(np.int8)
    cfg = LadderConfig(
        int(x_min), int(x_max), slabs, t,
        p=None if math.isnan(p) else p, seed=None if seed < 0 else int(seed),
        sampler="snapshot", boundary_pre_regen=bool(flags & 1),
    )
    return annotate(cfg)


def save_snapshot(config: LadderConfig, path, overwrite: bool = False) -> Path:
    path = Path(path)
    with open(path, "wb" if overwrite else "xb") as fh:
        fh.write(to_bytes(config))
    return path


def load_snapshot(path) -> LadderConfig:
    return from_bytes(Path(path).read_bytes())


def text_dump(config: LadderConfig) -> str:
    """One line per column: ``x h0h1v t-state flags``."""
    cfg = config if config.annotated else annotate(config)
    s = cfg.slab_at()
    dead = cfg.dead_ends
    lines = ["# x  h0h1v  T  flags"]
    for k in range(cfg.n_columns):
        bits = "---" if k == 0 else f"{s[k] & 1}{(s[k] >> 1) & 1}{(s[k] >> 2) & 1}"
        flags = []
        if cfg.pre_regen[k]:
            flags.append("pre")
        for y in (0, 1):
            if dead[k, y]:
                flags.append(f"dead{y}")
        lines.append(f"{cfg.x_min + k} {bits} {T_NAMES[cfg.t_states[k]]} {','.join(flags) or '.'}")
    return "\n".join(lines) + "\n"
