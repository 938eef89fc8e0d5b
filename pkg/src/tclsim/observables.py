"""Observables, Markovian/non-Markovian comparison and CSV output."""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import DIM, LEVELS, RawTrajectory, level_index, steady_state_detect

CSV_COLUMNS = ("t_fs", "p_g", "p_e1", "p_e2", "p_m1", "p_m2", "re_c", "im_c", "abs_c", "trace_err", "min_eig")
REPORT_COLUMNS = ("t_fs", "abs_c_nm", "abs_c_m", "ratio")

#: claim 1 slack on |rho_e1e2|
ENHANCEMENT_TOL = 1e-6


@dataclass(eq=False)
class TrajectoryRecord:
    times: np.ndarray
    populations: np.ndarray  # (n, 5) in LEVELS order
    re_c: np.ndarray
    im_c: np.ndarray
    abs_c: np.ndarray
    trace_error: np.ndarray
    min_eigenvalue: np.ndarray
    hermiticity_drift: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.times)

    def population(self, label: str) -> np.ndarray:
        return self.populations[:, level_index(label)]

    @property
    def p_m1(self) -> np.ndarray:
        return self.population("m1")

    def channel(self, name: str) -> np.ndarray:
        if name.startswith("p_"):
            return self.population(name[2:])
        lookup = {"re_c": self.re_c, "im_c": self.im_c, "abs_c": self.abs_c,
                  "trace_err": self.trace_error, "min_eig": self.min_eigenvalue}
        try:
            return lookup[name]
        except KeyError:
            raise ValueError(f"unknown channel {name!r}") from None

    def columns(self) -> dict:
        return {name: (self.times if name == "t_fs" else self.channel(name)) for name in CSV_COLUMNS}

    def equals(self, other: "TrajectoryRecord") -> bool:
        """Bit-exact equality on every CSV column."""
        a, b = self.columns(), other.columns()
        return all(a[k].shape == b[k].shape and np.array_equal(a[k], b[k], equal_nan=True) for k in CSV_COLUMNS)


def extract(raw: RawTrajectory) -> TrajectoryRecord:
    rho = np.asarray(raw.states)
    a, b = level_index("e1"), level_index("e2")
    pops = np.real(np.einsum("kii->ki", rho)).copy()
    re = np.real(rho[:, a, b]).copy()
    im = np.imag(rho[:, a, b]).copy()
    herm = 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))
    min_eig = np.linalg.eigvalsh(herm)[:, 0] if len(rho) else np.zeros(0)
    return TrajectoryRecord(
        times=np.asarray(raw.times, dtype=float).copy(),
        populations=pops,
        re_c=re,
        im_c=im,
        abs_c=np.sqrt(re * re + im * im),
        trace_error=np.asarray(raw.trace_error, dtype=float).copy(),
        min_eigenvalue=min_eig,
        hermiticity_drift=np.asarray(raw.hermiticity_drift, dtype=float).copy(),
    )


def simulate(scenario) -> TrajectoryRecord:
    from .dynamics import integrate

    return extract(integrate(scenario))


def half_rise_time(record: TrajectoryRecord, label: str = "m1") -> float:
    """First time the population reaches half its final value, linearly
    interpolated between samples."""
    p = record.population(label)
    ts = record.times
    target = 0.5 * p[-1]
    k = int(np.argmax(p >= target))
    if k == 0:
        return float(ts[0])
    p0, p1 = p[k - 1], p[k]
    frac = (target - p0) / (p1 - p0)
    return float(ts[k - 1] + frac * (ts[k] - ts[k - 1]))


def steady_value(record: TrajectoryRecord, window: float) -> float:
    """Mean ``|rho_e1e2|`` over the final ``window`` fs."""
    mask = record.times >= record.times[-1] - window
    return float(np.mean(record.abs_c[mask]))


@dataclass(eq=False)
class ComparisonReport:
    times: np.ndarray
    abs_c_nm: np.ndarray
    abs_c_m: np.ndarray
    ratio: np.ndarray
    t_half_nm: float
    t_half_m: float
    steady_nm: float
    steady_m: float
    t_ss_nm: Optional[float]
    t_ss_m: Optional[float]
    coherence_enhanced: bool
    slower_buildup: bool
    steady_exceeds: bool

    def summary(self) -> dict:
        return {
            "t_half_m1_nm": self.t_half_nm,
            "t_half_m1_m": self.t_half_m,
            "steady_abs_c_nm": self.steady_nm,
            "steady_abs_c_m": self.steady_m,
            "t_ss_nm": self.t_ss_nm,
            "t_ss_m": self.t_ss_m,
            "min_ratio": float(np.min(self.ratio)),
            "min_abs_c_difference": float(np.min(self.abs_c_nm - self.abs_c_m)),
            "claim_coherence_enhanced": self.coherence_enhanced,
            "claim_slower_m1_buildup": self.slower_buildup,
            "claim_steady_coherence_exceeds": self.steady_exceeds,
        }


def _safe_steady(record, window, eps):
    try:
        return steady_state_detect(record, window, eps)
    except ValueError:
        return None


def compare(nm: TrajectoryRecord, m: TrajectoryRecord, window: float = 300.0, eps: float = 0.02) -> ComparisonReport:
    """Compare a non-Markovian trajectory against its Markovian twin."""
    if nm.times.shape != m.times.shape or not np.array_equal(nm.times, m.times):
        raise ValueError("trajectories must share an identical time grid")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(
            (nm.abs_c == 0) & (m.abs_c == 0), 1.0, nm.abs_c / m.abs_c
        )
    t_nm, t_m = half_rise_time(nm), half_rise_time(m)
    s_nm = steady_value(nm, window)
    s_m = steady_value(m, window)
    return ComparisonReport(
        times=nm.times.copy(),
        abs_c_nm=nm.abs_c.copy(),
        abs_c_m=m.abs_c.copy(),
        ratio=ratio,
        t_half_nm=t_nm,
        t_half_m=t_m,
        steady_nm=s_nm,
        steady_m=s_m,
        t_ss_nm=_safe_steady(nm, window, eps),
        t_ss_m=_safe_steady(m, window, eps),
        coherence_enhanced=bool(np.all(nm.abs_c >= m.abs_c - ENHANCEMENT_TOL)),
        slower_buildup=t_nm > t_m,
        steady_exceeds=s_nm > s_m,
    )


# --- files ------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory and rename, so a
    failure never leaves a truncated file behind."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException as exc:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        if isinstance(exc, OSError):
            raise OSError(f"cannot write {path}: {exc}") from exc
        raise


def csv_text(obj) -> str:
    if isinstance(obj, TrajectoryRecord):
        header = CSV_COLUMNS
        cols = obj.columns()
        data = [cols[name] for name in header]
    elif isinstance(obj, ComparisonReport):
        header = REPORT_COLUMNS
        data = [obj.times, obj.abs_c_nm, obj.abs_c_m, obj.ratio]
    else:
        raise TypeError(f"cannot write {type(obj).__name__} as CSV")
    lines = [",".join(header)]
    for row in zip(*data):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(obj, path) -> Path:
    """Write a trajectory (or the pointwise part of a comparison report)."""
    path = Path(path)
    atomic_write_text(path, csv_text(obj))
    return path


def summary_csv_text(report: ComparisonReport, extra: Optional[dict] = None) -> str:
    rows = ["metric,value"]
    for k, v in {**(extra or {}), **report.summary()}.items():
        rows.append(f"{k},{v if isinstance(v, str) else _fmt(v)}")
    return "\n".join(rows) + "\n"


def parse_csv(path) -> TrajectoryRecord:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [[float(x) for x in row] for row in reader]
    arr = np.array(rows, dtype=float).reshape(-1, len(CSV_COLUMNS))
    col = {name: arr[:, k].copy() for k, name in enumerate(CSV_COLUMNS)}
    pops = np.stack([col[f"p_{lab}"] for lab in LEVELS], axis=1) if len(arr) else np.zeros((0, DIM))
    return TrajectoryRecord(
        times=col["t_fs"], populations=pops, re_c=col["re_c"], im_c=col["im_c"], abs_c=col["abs_c"],
        trace_error=col["trace_err"], min_eigenvalue=col["min_eig"], hermiticity_drift=None,
    )


def empty_record() -> TrajectoryRecord:
    z = np.zeros(0)
    return TrajectoryRecord(z, np.zeros((0, DIM)), z, z, z, z, z)
