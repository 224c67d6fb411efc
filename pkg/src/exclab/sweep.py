"""Parameter sweeps over the Coulomb diamond: grid evaluation, the fixed
CSV row schema, and deterministic parallel execution.

Gate shift: diamond plots recenter the gate axis by substituting
vg -> vg - u/2 before building the model; the CSV always reports the grid
coordinate.  Rows are emitted vsd-major (all vg values for the first vsd,
then the next vsd), independent of the worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dqd import DqdParams, build_model
from .errors import DivergentFano
from .excursions import excess_time, excursion_report, partition
from .observables import (
    activity_weights,
    entropy_weights,
    fano,
    mutual_information,
    populations,
    success_fail_disaster,
    transport_weights,
)

__all__ = [
    "CANONICAL_COLUMNS",
    "SweepConfig",
    "load_config",
    "parse_grid_spec",
    "compute_row",
    "format_cell",
    "sweep_rows",
    "write_csv",
    "sweep_to_csv",
]

CANONICAL_COLUMNS = (
    "vg", "vsd", "j_qr", "d_qr", "d1", "d2", "d3", "fano", "j_act",
    "j_sigma", "mu", "e_t", "var_t", "e_tau", "cov_qt", "p00", "p10",
    "p01", "p11", "mi", "p_suc", "p_fail", "p_dis", "tur_lhs", "tur_rhs",
    "kur_rhs", "cur_rhs",
)

# columns that stay empty outside blockade mode
_BLOCKADE_ONLY = ("p_suc", "p_fail", "p_dis")


@dataclass(frozen=True)
class SweepConfig:
    """Model parameters plus grid and execution settings.

    Defaults reproduce the transport diamond figure: g = 1,
    gamma = 2 pi 0.1, T = 1, U = 10 on a 101 x 101 grid.
    ``gate_shift=None`` defers to the command default (on for sweeps,
    off for single-point analysis).
    """

    g: float = 1.0
    gamma: float = 2.0 * math.pi * 0.1
    temperature: float = 1.0
    u: float = 10.0
    vg_lo: float = -10.0
    vg_hi: float = 10.0
    vg_n: int = 101
    vsd_lo: float = -20.0
    vsd_hi: float = 20.0
    vsd_n: int = 101
    blockade: bool = False
    gate_shift: bool | None = None
    workers: int | None = None
    seed: int = 1234
    columns: tuple[str, ...] = CANONICAL_COLUMNS

    def __post_init__(self):
        if self.vg_n < 1 or self.vsd_n < 1:
            raise ValueError("grid needs at least one point per axis")
        if self.vg_lo > self.vg_hi or self.vsd_lo > self.vsd_hi:
            raise ValueError("grid bounds must satisfy lo <= hi")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be >= 1")
        bad = [c for c in self.columns if c not in CANONICAL_COLUMNS]
        if bad:
            raise ValueError(f"unknown columns {bad}")
        ordered = tuple(c for c in CANONICAL_COLUMNS if c in self.columns)
        if "vg" not in ordered or "vsd" not in ordered:
            ordered = tuple(
                c for c in CANONICAL_COLUMNS if c in ("vg", "vsd") or c in ordered
            )
        object.__setattr__(self, "columns", ordered)

    def vg_values(self) -> np.ndarray:
        return np.linspace(self.vg_lo, self.vg_hi, self.vg_n)

    def vsd_values(self) -> np.ndarray:
        return np.linspace(self.vsd_lo, self.vsd_hi, self.vsd_n)

    def resolve_workers(self) -> int:
        if self.workers is not None:
            return self.workers
        env = os.environ.get("EXCLAB_WORKERS", "")
        if env.strip():
            try:
                w = int(env)
            except ValueError:
                raise ValueError(f"EXCLAB_WORKERS={env!r} is not an integer")
            if w < 1:
                raise ValueError("EXCLAB_WORKERS must be >= 1")
            return w
        return 1


_BOOL_KEYS = ("blockade", "gate_shift")
_INT_KEYS = ("vg_n", "vsd_n", "workers", "seed")
_FLOAT_KEYS = (
    "g", "gamma", "temperature", "u", "vg_lo", "vg_hi", "vsd_lo", "vsd_hi",
)


def load_config(path: str, base: SweepConfig | None = None) -> SweepConfig:
    """Read a flat ``key = value`` config file over ``base`` defaults.

    Unknown keys are rejected; '#' starts a comment; booleans accept
    true/false/1/0/yes/no.
    """
    cfg = base if base is not None else SweepConfig()
    updates: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key in _BOOL_KEYS:
                low = val.lower()
                if low in ("true", "1", "yes", "on"):
                    updates[key] = True
                elif low in ("false", "0", "no", "off"):
                    updates[key] = False
                else:
                    raise ValueError(f"{path}:{lineno}: bad boolean {val!r}")
            elif key in _INT_KEYS:
                updates[key] = int(val)
            elif key in _FLOAT_KEYS:
                updates[key] = float(val)
            elif key == "columns":
                updates[key] = tuple(s.strip() for s in val.split(",") if s.strip())
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    return replace(cfg, **updates)


def parse_grid_spec(spec: str) -> dict:
    """Parse ``vg:lo:hi:n,vsd:lo:hi:n`` (either axis may be omitted)."""
    updates: dict = {}
    for part in spec.split(","):
        fields = part.strip().split(":")
        if len(fields) != 4 or fields[0] not in ("vg", "vsd"):
            raise ValueError(f"bad grid spec {part!r}, want axis:lo:hi:n")
        axis = fields[0]
        updates[f"{axis}_lo"] = float(fields[1])
        updates[f"{axis}_hi"] = float(fields[2])
        updates[f"{axis}_n"] = int(fields[3])
    return updates


def _point_params(cfg: SweepConfig, vg: float, vsd: float, gate_shift: bool) -> DqdParams:
    vg_phys = vg - cfg.u / 2.0 if gate_shift else vg
    return DqdParams(
        g=cfg.g, gamma=cfg.gamma, temperature=cfg.temperature, u=cfg.u,
        vg=vg_phys, vsd=vsd, blockade=cfg.blockade,
    )


def compute_row(cfg: SweepConfig, vg: float, vsd: float, gate_shift: bool) -> dict:
    """All canonical columns at one grid point; keys are column names and
    values floats (blockade-only cells are None outside blockade mode)."""
    params = _point_params(cfg, vg, vsd, gate_shift)
    model = build_model(params)
    dec = partition(model, 0)
    rep = excursion_report(dec, transport_weights("R", model.n))
    j_act = excursion_report(dec, activity_weights(model.n)).j
    j_sigma = excursion_report(dec, entropy_weights(params)).j
    pop = populations(model)
    mi = mutual_information(pop)
    try:
        fano_val = fano(rep.j, rep.d)
    except DivergentFano:
        fano_val = math.inf
    lhs = rep.d / rep.j**2 if abs(rep.j) > 1e-13 else math.inf
    tur_rhs = 2.0 / j_sigma if j_sigma != 0.0 else math.inf
    kur_rhs = 1.0 / j_act
    cur_rhs = excess_time(dec)
    row = {
        "vg": vg, "vsd": vsd, "j_qr": rep.j, "d_qr": rep.d,
        "d1": rep.d1, "d2": rep.d2, "d3": rep.d3, "fano": fano_val,
        "j_act": j_act, "j_sigma": j_sigma, "mu": rep.mu, "e_t": rep.e_t,
        "var_t": rep.var_t, "e_tau": rep.e_tau, "cov_qt": rep.cov_qt,
        "p00": pop.p00, "p10": pop.p10, "p01": pop.p01, "p11": pop.p11,
        "mi": mi, "tur_lhs": lhs, "tur_rhs": tur_rhs,
        "kur_rhs": kur_rhs, "cur_rhs": cur_rhs,
    }
    if cfg.blockade:
        triple = success_fail_disaster(params)
        row.update(p_suc=triple.p_suc, p_fail=triple.p_fail, p_dis=triple.p_dis)
    else:
        row.update(p_suc=None, p_fail=None, p_dis=None)
    return row


def format_cell(v) -> str:
    """Serialize one cell: 17 significant digits, empty for None."""
    if v is None:
        return ""
    return format(float(v), ".17g")


def _row_worker(args) -> dict:
    cfg, vg, vsd, gate_shift = args
    return compute_row(cfg, vg, vsd, gate_shift)


def sweep_rows(cfg: SweepConfig, gate_shift: bool | None = None) -> list[dict]:
    """Evaluate the whole grid, vsd-major, with a bounded worker pool.

    The output order is fixed by the grid indices, so any worker count
    yields identical results.
    """
    shift = cfg.gate_shift if gate_shift is None else gate_shift
    if shift is None:
        shift = True
    tasks = [
        (cfg, float(vg), float(vsd), shift)
        for vsd in cfg.vsd_values()
        for vg in cfg.vg_values()
    ]
    workers = cfg.resolve_workers()
    if workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_row_worker, tasks, chunksize=chunk))
    return [_row_worker(t) for t in tasks]


def write_csv(rows: list[dict], path: str, columns=CANONICAL_COLUMNS) -> None:
    """Write rows atomically: temp file in the target directory, then
    rename.  UTF-8, LF newlines, header exactly the column list."""
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(format_cell(row[c]) for c in columns) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sweep_to_csv(cfg: SweepConfig, path: str, gate_shift: bool | None = None) -> int:
    """Run the sweep and write the CSV; returns the row count."""
    rows = sweep_rows(cfg, gate_shift=gate_shift)
    write_csv(rows, path, columns=cfg.columns)
    return len(rows)
