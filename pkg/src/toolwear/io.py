"""File formats, run configuration, and dataset loading.

All numeric output uses ``repr`` of the Python float (shortest round-trip
decimal), so ``read(write(x)) == x`` exactly and re-runs are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ValidationError
from .model import ExperimentRecord, PriorConfig
from .sampler import ChainSet
from .segmentation import CHANNELS


def fmt(x) -> str:
    """Full-precision decimal representation of a float."""
    return repr(float(x))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# controls and series

def load_controls(path) -> list[ExperimentRecord]:
    """Controls table: CSV with header id,v_c,f[,tool_life]."""
    records = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["id", "v_c", "f"]:
            raise ValidationError(f"{path}: expected header id,v_c,f[,tool_life]")
        has_life = len(header) >= 4 and header[3].strip() == "tool_life"
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rid = int(row[0])
                v_c, f = float(row[1]), float(row[2])
                life = None
                if has_life and len(row) > 3 and row[3].strip():
                    life = float(row[3])
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if rid in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate experiment id {rid}")
            if v_c <= 0 or f <= 0:
                raise ValidationError(f"{path}:{lineno}: settings must be positive")
            if life is not None and life <= 0:
                raise ValidationError(f"{path}:{lineno}: tool_life must be positive")
            seen.add(rid)
            records.append(ExperimentRecord(id=rid, v_c=v_c, f=f, tool_life=life))
    return records


def load_series(path, record: ExperimentRecord | None = None):
    """Per-experiment series: CSV with header L,Ft,Ff,Fp and strictly increasing L.

    Returns (L, forces); when ``record`` is given the series is attached to it.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["L", *CHANNELS]:
            raise ValidationError(f"{path}: expected header L,Ft,Ff,Fp")
        length, cols = [], {ch: [] for ch in CHANNELS}
        prev = -np.inf
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if values[0] <= prev:
                raise ValidationError(f"{path}:{lineno}: L must be strictly increasing")
            prev = values[0]
            length.append(values[0])
            for ch, v in zip(CHANNELS, values[1:]):
                cols[ch].append(v)
    length = np.array(length)
    forces = {ch: np.array(v) for ch, v in cols.items()}
    if record is not None:
        record.length = length
        record.forces = forces
        record.__post_init__()
    return length, forces


def write_series(path, length, forces) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["L", *CHANNELS])
        for i in range(len(length)):
            w.writerow([fmt(length[i])] + [fmt(forces[ch][i]) for ch in CHANNELS])


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", *CHANNELS])
        for i in range(trace.n_samples):
            w.writerow([i] + [fmt(trace.forces[ch][i]) for ch in CHANNELS])


def load_trace(path):
    """Raw trace CSV (columns sample,Ft,Ff,Fp) -> forces dict."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["sample", *CHANNELS]:
            raise ValidationError(f"{path}: expected header sample,Ft,Ff,Fp")
        cols = {ch: [] for ch in CHANNELS}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                for ch, v in zip(CHANNELS, row[1:]):
                    cols[ch].append(float(v))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed row {row!r}") from exc
    return {ch: np.array(v) for ch, v in cols.items()}


# ---------------------------------------------------------------------------
# draws

def write_draws_csv(path, chains: ChainSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chain", "iteration", *chains.param_names])
        for c in range(chains.n_chains):
            for it in range(chains.n_retained):
                w.writerow([c, it] + [fmt(v) for v in chains.draws[c, it]])


def read_draws_csv(path) -> ChainSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["chain", "iteration"]:
            raise ValidationError(f"{path}: expected draws header chain,iteration,...")
        names = header[2:]
        rows = [(int(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader if r]
    if not rows:
        raise ValidationError(f"{path}: no draws")
    n_chains = max(r[0] for r in rows) + 1
    n_iter = max(r[1] for r in rows) + 1
    draws = np.full((n_chains, n_iter, len(names)), np.nan)
    for c, it, vals in rows:
        draws[c, it] = vals
    if np.any(np.isnan(draws)):
        raise ValidationError(f"{path}: missing (chain, iteration) combinations")
    return ChainSet(
        draws=draws, param_names=names, n_warmup=0, n_retained=n_iter,
        seed=0, accept_stats=np.full(n_chains, np.nan),
        divergences=np.zeros(n_chains, dtype=int),
    )


def write_draws_npz(path, chains: ChainSet) -> None:
    """Compact columnar form; parameter names and layout travel in the file."""
    np.savez_compressed(
        path, draws=chains.draws, param_names=np.array(chains.param_names),
        n_warmup=chains.n_warmup, seed=chains.seed,
        accept_stats=chains.accept_stats, divergences=chains.divergences,
    )


def read_draws_npz(path) -> ChainSet:
    with np.load(path, allow_pickle=False) as z:
        return ChainSet(
            draws=z["draws"], param_names=[str(n) for n in z["param_names"]],
            n_warmup=int(z["n_warmup"]), n_retained=z["draws"].shape[1],
            seed=int(z["seed"]), accept_stats=z["accept_stats"],
            divergences=z["divergences"],
        )


def write_summary_csv(path, summary) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "mean", "sd", "q2.5", "median", "q97.5", "psrf"])
        for name, *vals in summary.rows():
            w.writerow([name] + [fmt(v) for v in vals])


def write_surface_csv(path, grid) -> None:
    """Long-format surface (v_c, f, mean, sd), one row per grid node."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v_c", "f", "mean", "sd"])
        for i, v in enumerate(grid.v_axis):
            for j, f in enumerate(grid.f_axis):
                w.writerow([fmt(v), fmt(f), fmt(grid.mean[i, j]), fmt(grid.sd[i, j])])


def write_surface_matrix(path, grid) -> None:
    """Gnuplot-style matrix: first row f axis, first column v axis."""
    with open(path, "w") as fh:
        fh.write(" ".join(["0"] + [fmt(f) for f in grid.f_axis]) + "\n")
        for i, v in enumerate(grid.v_axis):
            fh.write(" ".join([fmt(v)] + [fmt(x) for x in grid.mean[i]]) + "\n")


# ---------------------------------------------------------------------------
# run configuration

@dataclass
class RunConfig:
    """Validated pipeline settings from a YAML key-value file."""

    seed: int
    output_dir: str
    controls: str
    traces_dir: str | None = None
    series_dir: str | None = None
    channels: list[str] = field(default_factory=lambda: list(CHANNELS))
    segmentation: dict = field(default_factory=dict)
    priors: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=dict)
    grid: list | None = None
    fit_tool_life: bool = True

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ValidationError(f"{path}: invalid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError(f"{path}: config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate(base=Path(path).parent)
        return cfg

    def validate(self, base: Path | None = None) -> None:
        if self.seed is None:
            raise ValidationError("seed is required (no wall-clock default)")
        base = base or Path(".")
        self.controls = str((base / self.controls))
        if not Path(self.controls).exists():
            raise ValidationError(f"controls file not found: {self.controls}")
        for attr in ("traces_dir", "series_dir"):
            val = getattr(self, attr)
            if val is not None:
                setattr(self, attr, str(base / val))
                if not Path(getattr(self, attr)).is_dir():
                    raise ValidationError(f"{attr} not found: {getattr(self, attr)}")
        if self.traces_dir is None and self.series_dir is None:
            raise ValidationError("one of traces_dir or series_dir is required")
        bad = [c for c in self.channels if c not in CHANNELS]
        if bad:
            raise ValidationError(f"unknown channels {bad}")
        self.output_dir = str(base / self.output_dir)
        for key, val in self.priors.items():
            if key not in {f.name for f in fields(PriorConfig)}:
                raise ValidationError(f"unknown prior key {key}")
            if val <= 0:
                raise ValidationError(f"prior scale {key} must be positive")

    def prior_config(self) -> PriorConfig:
        return PriorConfig(**self.priors)

    def echo(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
