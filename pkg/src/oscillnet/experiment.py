"""Experiment configuration, orchestration, persistence and comparison.

A run directory holds::

    trajectory.csv         phase-equation integration (t, Re/Im per mode, amplitudes)
    oracle.csv             phases recovered from the linear system (t <= oracle_T)
    phase_differences.csv  t and the real-phase differences of panels a-f
    log_time.csv           ln t and |Im delta| per mode (t > 0)
    phase_stats.csv        tail min/max/convergence of each phase difference
    divergence.csv         per-mode growth classification
    summary.txt            human-readable findings
    manifest.json          config snapshot, version, wall times, sha256 digests

``manifest.json`` is written last and acts as the completion marker.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    PHASE_DIFFERENCE_PANELS,
    IMAG_PANELS,
    LOG_TIME_PANELS,
    available_panels,
    classify_divergence,
    phase_difference,
    phase_difference_stats,
)
from .degenerate import JordanBlockModel
from .io import read_table, read_trajectory_csv, write_table, write_trajectory_csv
from .phase import VARIANTS, PhaseState, integrate_phases, oracle_from_state

MANIFEST = "manifest.json"
_LIST_KEYS = ("re_up", "im_up", "re_dn", "im_dn")


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


class RunError(RuntimeError):
    """A run directory is missing, incomplete or corrupted."""


@dataclass(frozen=True)
class ExperimentConfig:
    """All inputs of one run; defaults reproduce the reference setting.

    Initial phases default to zero for every mode when left as ``None``.
    ``stats_t_min`` starts the phase-difference tail window;
    ``fit_window`` (``t_lo t_hi``) fixes the divergence fit window, otherwise
    the last ``tail_fraction`` of the ln t span is used.
    """

    omega: float = 0.0
    d: float = 1.0
    m: int = 3
    variant: str = "direct"
    re_up: tuple[float, ...] | None = None
    im_up: tuple[float, ...] | None = None
    re_dn: tuple[float, ...] | None = None
    im_dn: tuple[float, ...] | None = None
    dt: float = 1e-3
    T: float = 1000.0
    stride: int = 100
    oracle_T: float = 20.0
    overflow_guard: float = 700.0
    slope_min: float = 0.01
    r2_min: float = 0.99
    convex_max: float = 0.2
    tail_fraction: float = 0.5
    fit_window: tuple[float, ...] | None = None
    converge_amplitude: float = 0.05
    stats_t_min: float = 200.0
    output: str = "runs/table1"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("omega", "d", "dt", "T", "oracle_T", "overflow_guard", "slope_min",
                     "r2_min", "convex_max", "tail_fraction", "converge_amplitude",
                     "stats_t_min"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not self.T > self.dt:
            raise ConfigError(f"T must exceed dt, got T={self.T}")
        if not 0 < self.oracle_T <= self.T:
            raise ConfigError("oracle_T must lie in (0, T]")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if not self.stats_t_min < self.T:
            raise ConfigError("stats_t_min must be below T")
        if not 0 < self.tail_fraction <= 1:
            raise ConfigError("tail_fraction must lie in (0, 1]")
        if self.overflow_guard <= 0:
            raise ConfigError("overflow_guard must be positive")
        for key in _LIST_KEYS:
            v = getattr(self, key)
            if v is not None:
                if len(v) != self.m:
                    raise ConfigError(f"{key} needs {self.m} values, got {len(v)}")
                if not all(math.isfinite(x) for x in v):
                    raise ConfigError(f"{key} must be finite")
        if self.fit_window is not None:
            if len(self.fit_window) != 2 or not 0 < self.fit_window[0] < self.fit_window[1]:
                raise ConfigError("fit_window must be 't_lo t_hi' with 0 < t_lo < t_hi")

    @property
    def model(self) -> JordanBlockModel:
        return JordanBlockModel(self.omega, self.d, self.m)

    def initial_state(self) -> PhaseState:
        parts = [np.zeros(self.m) if getattr(self, k) is None else np.array(getattr(self, k), float)
                 for k in _LIST_KEYS]
        return PhaseState(*parts)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in _LIST_KEYS + ("fit_window",):
            if out[key] is not None:
                out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        kwargs = {}
        for key, value in data.items():
            kwargs[key] = _coerce(key, value)
        return cls(**kwargs)


def _coerce(key: str, value):
    try:
        if key in _LIST_KEYS or key == "fit_window":
            if value is None:
                return None
            if isinstance(value, str):
                value = value.replace(",", " ").split()
            return tuple(float(x) for x in value)
        if key in ("m", "stride"):
            f = float(value)
            if f != int(f):
                raise ValueError(f"not an integer: {value!r}")
            return int(f)
        if key in ("variant", "output"):
            return str(value)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value.strip()
    return entries


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file (optional) and apply ``overrides`` on top of it."""
    data = parse_config_text(Path(path).read_text()) if path is not None else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return ExperimentConfig.from_dict(data)


@dataclass(frozen=True)
class RunManifest:
    run_dir: str
    config: dict
    version: str
    started: float
    finished: float
    files: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        body = {"config": self.config, "version": self.version, "started": self.started,
                "finished": self.finished, "files": self.files}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def verify(self) -> list[str]:
        """Names of files whose digest no longer matches."""
        bad = []
        for name, digest in self.files.items():
            p = Path(self.run_dir) / name
            if not p.exists() or sha256_file(p) != digest:
                bad.append(name)
        return bad


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_manifest(run_dir) -> RunManifest:
    run_dir = Path(run_dir)
    p = run_dir / MANIFEST
    if not p.exists():
        raise RunError(f"{run_dir}: no {MANIFEST} (run missing or incomplete)")
    body = json.loads(p.read_text())
    return RunManifest(str(run_dir), body["config"], body["version"], body["started"],
                       body["finished"], body["files"])


def _analysis_outputs(cfg: ExperimentConfig, traj):
    """Series and reports derived from a phase trajectory."""
    panels = available_panels(cfg.m, PHASE_DIFFERENCE_PANELS)
    diffs = {k: phase_difference(traj, pair) for k, pair in panels.items()}
    stats = {k: phase_difference_stats(traj, pair, t_min=cfg.stats_t_min,
                                       converge_amplitude=cfg.converge_amplitude)
             for k, pair in panels.items()}
    report = classify_divergence(
        traj, window=cfg.fit_window, tail_fraction=cfg.tail_fraction,
        slope_min=cfg.slope_min, r2_min=cfg.r2_min, convex_max=cfg.convex_max,
        guard=cfg.overflow_guard)
    return panels, diffs, stats, report


def _summary_text(cfg, traj, oracle_dev, panels, stats, report) -> str:
    lines = [f"oscillnet {__version__}",
             f"model: omega={cfg.omega:g} d={cfg.d:g} m={cfg.m} variant={cfg.variant}",
             f"integrator: rk4 dt={cfg.dt:g} T={cfg.T:g} stride={cfg.stride}",
             f"samples: {len(traj)}"]
    if traj.diverged:
        lines.append(f"halted: overflow guard reached at t={traj.halt_time:.6g}")
    lines.append(f"oracle max |phase difference| over t <= {cfg.oracle_T:g}: {oracle_dev:.3e}")
    lo, hi = report.window
    lines.append(f"divergence fit window: t in [{lo:.6g}, {hi:.6g}]")
    for lab, md in report.modes.items():
        onset = "" if md.onset is None else f", onset t={md.onset:.6g}"
        lines.append(f"mode {lab}: {md.text} (slope={md.slope:.4g}, R2={md.r2:.6f}{onset})")
    for k, pair in panels.items():
        s = stats[k]
        state = f"converged to {s.limit:.4g}" if s.converged else "not converged"
        lines.append(f"panel {k} Re[d{pair[0]}]-Re[d{pair[1]}] (t >= {cfg.stats_t_min:g}): "
                     f"min={s.min:.6g} max={s.max:.6g}, {state}")
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, output=None) -> RunManifest:
    """Integrate, cross-check, analyse and persist one configuration.

    On any failure every file written by this call is removed (and the run
    directory too if this call created it) before the error propagates.
    """
    out = Path(output if output is not None else config.output)
    created = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    stale = out / MANIFEST
    if stale.exists():
        stale.unlink()
    written: list[Path] = []
    started = time.time()
    try:
        model = config.model
        init = config.initial_state()
        traj = integrate_phases(model, config.variant, init, dt=config.dt, T=config.T,
                                stride=config.stride, guard=config.overflow_guard)
        oracle = oracle_from_state(model, config.variant, init, dt=config.dt,
                                   T=config.oracle_T, stride=config.stride)
        n = len(oracle)
        if traj.diverged or len(traj) < n:
            n = min(n, len(traj) - (1 if traj.diverged else 0))
        oracle_dev = float(np.max(np.abs(traj.states[:n] - oracle.states[:n]))) if n else 0.0

        panels, diffs, stats, report = _analysis_outputs(config, traj)

        def emit(name, writer):
            p = out / name
            written.append(p)
            writer(p)

        emit("trajectory.csv", lambda p: write_trajectory_csv(p, traj, config.overflow_guard))
        emit("oracle.csv", lambda p: write_trajectory_csv(p, oracle, config.overflow_guard))
        emit("phase_differences.csv", lambda p: write_table(
            p, ["t"] + [f"{k}:Re_d{a}-Re_d{b}" for k, (a, b) in panels.items()],
            [traj.times] + list(diffs.values())))
        pos = traj.times > 0
        emit("log_time.csv", lambda p: write_table(
            p, ["ln_t"] + [f"abs_Im_d{lab}" for lab in traj.labels],
            [np.log(traj.times[pos])] + [np.abs(traj.im(lab)[pos]) for lab in traj.labels]))
        emit("phase_stats.csv", lambda p: _write_rows(
            p, ["panel", "pair", "min", "max", "amplitude", "converged", "limit"],
            [[k, f"{s.pair[0]}-{s.pair[1]}", s.min, s.max, s.amplitude, int(s.converged),
              "" if s.limit is None else s.limit] for k, s in stats.items()]))
        emit("divergence.csv", lambda p: _write_rows(
            p, ["mode", "classification", "slope", "intercept", "r2", "curvature", "onset"],
            [[lab, md.classification, md.slope, md.intercept, md.r2, md.curvature,
              "" if md.onset is None else md.onset] for lab, md in report.modes.items()]))
        emit("summary.txt", lambda p: p.write_text(
            _summary_text(config, traj, oracle_dev, panels, stats, report)))

        files = {p.name: sha256_file(p) for p in written}
        manifest = RunManifest(str(out), config.to_dict(), __version__, started,
                               time.time(), files)
        (out / MANIFEST).write_text(manifest.to_json())
        return manifest
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if created:
            try:
                out.rmdir()
            except OSError:
                pass
        raise


def _write_rows(path, header, rows) -> None:
    def cell(v):
        return "%.17g" % v if isinstance(v, float) else str(v)

    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(cell(v) for v in r) + "\n")


def read_divergence(run_dir) -> dict[str, str]:
    out = {}
    with (Path(run_dir) / "divergence.csv").open() as fh:
        next(fh)
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) >= 2:
                out[parts[0]] = parts[1]
    return out


def reanalyse(run_dir) -> dict[str, str]:
    """Classify the persisted trajectory again with the run's thresholds."""
    manifest = load_manifest(run_dir)
    cfg = ExperimentConfig.from_dict(manifest.config)
    traj = read_trajectory_csv(Path(run_dir) / "trajectory.csv")
    return _analysis_outputs(cfg, traj)[3].classifications()


FIGURES = ("f4", "f5", "f6")


def export_plot_data(run_dir, figure: str, out_dir=None) -> list[Path]:
    """Two-column (abscissa, ordinate) files, one per figure panel.

    ``f4``: t vs real-phase difference; ``f5``: t vs Im delta;
    ``f6``: ln t vs |Im delta| (t > 0). Files go to ``<run_dir>/plots``
    unless ``out_dir`` is given. Nothing is written when a series is
    missing or the trajectory is empty.
    """
    if figure not in FIGURES:
        raise ValueError(f"figure must be one of {FIGURES}, got {figure!r}")
    run_dir = Path(run_dir)
    load_manifest(run_dir)
    traj_path = run_dir / "trajectory.csv"
    if not traj_path.exists():
        raise RunError(f"{run_dir}: missing trajectory.csv")
    traj = read_trajectory_csv(traj_path)
    if len(traj) == 0:
        raise RunError(f"{traj_path}: empty trajectory")

    series: list[tuple[str, str, str, np.ndarray, np.ndarray]] = []
    if figure == "f4":
        for k, pair in PHASE_DIFFERENCE_PANELS.items():
            try:
                y = phase_difference(traj, pair)
            except KeyError:
                raise RunError(f"series Re_d{pair[0]}-Re_d{pair[1]} missing (m={traj.m})") from None
            series.append((f"f4{k}.tsv", "t", f"Re_d{pair[0]}-Re_d{pair[1]}", traj.times, y))
    else:
        panels = IMAG_PANELS if figure == "f5" else LOG_TIME_PANELS
        pos = traj.times > 0
        for k, lab in panels.items():
            try:
                im = traj.im(lab)
            except KeyError:
                raise RunError(f"series Im_d{lab} missing (m={traj.m})") from None
            if figure == "f5":
                series.append((f"f5{k}.tsv", "t", f"Im_d{lab}", traj.times, im))
            else:
                series.append((f"f6{k}.tsv", "ln_t", f"abs_Im_d{lab}",
                               np.log(traj.times[pos]), np.abs(im[pos])))
        if figure == "f6" and not pos.any():
            raise RunError(f"{traj_path}: no samples with t > 0")

    dest = Path(out_dir) if out_dir is not None else run_dir / "plots"
    dest.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, xl, yl, x, y in series:
        p = dest / name
        with p.open("w") as fh:
            fh.write(f"# {xl}\t{yl}\n")
            for a, b in zip(x, y):
                fh.write(f"{a:.17g}\t{b:.17g}\n")
        paths.append(p)
    return paths


@dataclass(frozen=True)
class CompareReport:
    max_deviation: dict[str, float]
    classification_diffs: dict[str, tuple[str, str]]
    samples: int

    @property
    def overall(self) -> float:
        return max(self.max_deviation.values(), default=0.0)


def compare_runs(run_a, run_b) -> CompareReport:
    """Per-series max absolute deviation and classification differences.

    Series are compared over the common leading samples, which must share
    their sample times.
    """
    ma, mb = load_manifest(run_a), load_manifest(run_b)
    if int(ma.config["m"]) != int(mb.config["m"]):
        raise ConfigError(f"incompatible runs: m={ma.config['m']} vs m={mb.config['m']}")
    _, ha, da = read_table(Path(run_a) / "trajectory.csv")
    _, hb, db = read_table(Path(run_b) / "trajectory.csv")
    n = min(len(da), len(db))
    if n and np.max(np.abs(da[:n, 0] - db[:n, 0])) > 1e-9 * max(1.0, abs(da[n - 1, 0])):
        raise ConfigError("incompatible runs: sample times differ")
    dev = {}
    for j, name in enumerate(ha[1:], 1):
        with np.errstate(invalid="ignore"):
            diff = np.abs(da[:n, j] - db[:n, j])
        dev[name] = float(np.max(diff)) if n else 0.0
    ca, cb = read_divergence(run_a), read_divergence(run_b)
    diffs = {k: (ca.get(k, ""), cb.get(k, "")) for k in sorted(set(ca) | set(cb))
             if ca.get(k) != cb.get(k)}
    return CompareReport(dev, diffs, n)


def _sweep_worker(args):
    cfg_dict, out = args
    return run_experiment(ExperimentConfig.from_dict(cfg_dict), out)


def run_sweep(configs: list[ExperimentConfig], root, workers: int | None = None) -> list[RunManifest]:
    """Run independent configurations in a process pool.

    Run ``i`` goes to ``<root>/run_<i>``; results come back in config order.
    """
    root = Path(root)
    jobs = [(c.to_dict(), root / f"run_{i:03d}") for i, c in enumerate(configs)]
    if workers == 1:
        return [_sweep_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_worker, jobs))


def with_overrides(config: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return replace(config, **kwargs)
