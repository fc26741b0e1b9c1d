"""Load, solar and heat-demand profiles: deterministic synthesis and CSV I/O.

All profile values are nonnegative magnitudes in MW / MW_th / degC. The sign
flip into injection convention (loads and heat extraction negative) happens in
:meth:`ProfileSet.forecast`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coupling import EtmgModel
from .mpc import Forecast


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Peak:
    hour: float
    height: float
    width: float  # standard deviation in hours

    def __post_init__(self):
        if self.height < 0:
            raise ProfileError(f"peak height must be nonnegative, got {self.height}")
        if not self.width > 0:
            raise ProfileError(f"peak width must be positive, got {self.width}")


@dataclass(frozen=True)
class ProfileParams:
    """Daily shapes, repeated periodically over ``steps`` samples of ``dt`` seconds."""

    steps: int = 192
    dt: float = 900.0
    start_hour: float = 0.0  # time of day of sample 0
    load_base: float = 0.25
    load_peaks: tuple[Peak, ...] = (Peak(7.5, 0.35, 1.5), Peak(19.0, 0.5, 2.0))
    heat_base: float = 0.7
    heat_peaks: tuple[Peak, ...] = (Peak(7.0, 0.9, 1.5), Peak(19.5, 1.1, 2.0))
    solar_peak: float = 2.0
    solar_noon: float = 13.0
    solar_halfwidth: float = 6.0  # hours from noon to sunrise/sunset
    ambient_temperature: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "load_peaks", tuple(Peak(*p) if not isinstance(p, Peak) else p for p in self.load_peaks))
        object.__setattr__(self, "heat_peaks", tuple(Peak(*p) if not isinstance(p, Peak) else p for p in self.heat_peaks))
        if self.steps < 1 or not self.dt > 0:
            raise ProfileError("profile synthesis needs steps >= 1 and dt > 0")
        for name in ("load_base", "heat_base", "solar_peak"):
            if getattr(self, name) < 0:
                raise ProfileError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not self.solar_halfwidth > 0:
            raise ProfileError("solar_halfwidth must be positive")


@dataclass(frozen=True)
class ProfileSet:
    """Per-step columns; ``d_er`` is steps x n_res, ``d_ed`` steps x n_load, ``Q_d`` steps x n_demand."""

    d_er: np.ndarray
    d_ed: np.ndarray
    Q_d: np.ndarray
    T_amb: np.ndarray | None = field(default=None)

    def __post_init__(self):
        for name in ("d_er", "d_ed", "Q_d"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            object.__setattr__(self, name, arr)
        if self.T_amb is not None:
            object.__setattr__(self, "T_amb", np.asarray(self.T_amb, dtype=float).reshape(-1))
        lengths = {self.d_er.shape[0], self.d_ed.shape[0], self.Q_d.shape[0]}
        if self.T_amb is not None:
            lengths.add(self.T_amb.shape[0])
        if len(lengths) != 1:
            raise ProfileError(f"profile columns differ in length: {sorted(lengths)}")

    def __len__(self) -> int:
        return self.d_er.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ProfileSet):
            return NotImplemented
        same_amb = (self.T_amb is None and other.T_amb is None) or (
            self.T_amb is not None and other.T_amb is not None and np.array_equal(self.T_amb, other.T_amb)
        )
        return (
            same_amb
            and np.array_equal(self.d_er, other.d_er)
            and np.array_equal(self.d_ed, other.d_ed)
            and np.array_equal(self.Q_d, other.Q_d)
        )

    def forecast(self, model: EtmgModel, ambient_temperature: float) -> Forecast:
        d = model.dims
        if self.d_er.shape[1] != d.n_res or self.d_ed.shape[1] != d.n_load or self.Q_d.shape[1] != d.n_demand:
            raise ProfileError(
                f"profiles have {self.d_er.shape[1]} RES, {self.d_ed.shape[1]} load and {self.Q_d.shape[1]} heat columns; "
                f"model needs {d.n_res}, {d.n_load} and {d.n_demand}"
            )
        amb = self.T_amb if self.T_amb is not None else np.full(len(self), float(ambient_temperature))
        d_t = np.column_stack([-self.Q_d, amb])
        d_e = np.column_stack([self.d_er, -self.d_ed])
        return Forecast(d_t=d_t, d_e=d_e)


def _daily_hours(params: ProfileParams) -> np.ndarray:
    return (params.start_hour + np.arange(params.steps) * params.dt / 3600.0) % 24.0


def _peaks(hours: np.ndarray, base: float, peaks) -> np.ndarray:
    out = np.full(hours.shape, float(base))
    for p in peaks:
        gap = np.abs(hours - p.hour)
        gap = np.minimum(gap, 24.0 - gap)
        out += p.height * np.exp(-0.5 * (gap / p.width) ** 2)
    return out


def synthesize_profiles(params: ProfileParams = ProfileParams()) -> ProfileSet:
    """Household-style double-peak load and heat demand plus a midday solar bell."""
    hours = _daily_hours(params)
    phase = (hours - params.solar_noon) / params.solar_halfwidth
    solar = np.where(np.abs(phase) < 1.0, params.solar_peak * np.cos(0.5 * math.pi * phase) ** 2, 0.0)
    amb = None if params.ambient_temperature is None else np.full(params.steps, float(params.ambient_temperature))
    return ProfileSet(
        d_er=solar,
        d_ed=_peaks(hours, params.load_base, params.load_peaks),
        Q_d=_peaks(hours, params.heat_base, params.heat_peaks),
        T_amb=amb,
    )


def _column_names(prefix: str, count: int) -> list[str]:
    return [prefix] if count == 1 else [f"{prefix}{i + 1}" for i in range(count)]


def write_profiles(profiles: ProfileSet, path) -> None:
    header = ["k"]
    header += _column_names("d_er", profiles.d_er.shape[1])
    header += _column_names("d_ed", profiles.d_ed.shape[1])
    header += _column_names("Q_d", profiles.Q_d.shape[1])
    if profiles.T_amb is not None:
        header.append("T_amb")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(len(profiles)):
            row = [*profiles.d_er[k], *profiles.d_ed[k], *profiles.Q_d[k]]
            if profiles.T_amb is not None:
                row.append(profiles.T_amb[k])
            writer.writerow([k, *(repr(float(v)) for v in row)])


def _group(header: list[str], prefix: str) -> list[int]:
    if prefix in header:
        return [header.index(prefix)]
    cols, i = [], 1
    while f"{prefix}{i}" in header:
        cols.append(header.index(f"{prefix}{i}"))
        i += 1
    return cols


def load_profiles(path) -> ProfileSet:
    """Read a profile CSV with header ``k,d_er,d_ed,Q_d[,T_amb]`` (numbered columns for several units)."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ProfileError(f"{path}: empty profile file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "k":
        raise ProfileError(f"{path}: first column must be 'k', header is {header}")
    groups = {p: _group(header, p) for p in ("d_er", "d_ed", "Q_d")}
    missing = [p for p, cols in groups.items() if not cols]
    if missing:
        raise ProfileError(f"{path}: missing column(s) {missing}")
    amb_col = header.index("T_amb") if "T_amb" in header else None
    known = {0, *sum(groups.values(), []), *([amb_col] if amb_col is not None else [])}
    unknown = [h for i, h in enumerate(header) if i not in known]
    if unknown:
        raise ProfileError(f"{path}: unknown column(s) {unknown}")

    values = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ProfileError(f"{path}: row {line_no} has {len(row)} fields, expected {len(header)}")
        try:
            k = int(row[0])
            nums = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise ProfileError(f"{path}: row {line_no}: {exc}") from None
        if k != len(values):
            raise ProfileError(f"{path}: row {line_no} has k={k}, expected {len(values)}")
        if not all(math.isfinite(v) for v in nums):
            raise ProfileError(f"{path}: row {line_no} contains a non-finite value")
        values.append([0.0, *nums])
    if not values:
        raise ProfileError(f"{path}: no data rows")
    data = np.array(values)
    for prefix in ("d_er", "d_ed", "Q_d"):
        bad = np.argwhere(data[:, groups[prefix]] < 0)
        if bad.size:
            raise ProfileError(f"{path}: row {bad[0, 0] + 2}: {prefix} magnitudes must be nonnegative")
    return ProfileSet(
        d_er=data[:, groups["d_er"]],
        d_ed=data[:, groups["d_ed"]],
        Q_d=data[:, groups["Q_d"]],
        T_amb=None if amb_col is None else data[:, amb_col],
    )
