"""CSV outputs of runs and comparisons.

Column schemas (one header row each):

  peak_<name>.csv        step, cycle, time_us, peak_c, decision
  events_<name>.csv      cycle, decision_kind, flagged_components, migrations,
                         peak_temp_before, control_flits
  latency_cdf_<name>.csv latency_cycles, cdf
  compare_peak.csv       step, cycle, <one peak column per variant>
  compare_summary.csv    variant, triggers, reallocate, reroute, max_peak_c,
                         mean_latency_cycles, latency_delta_pct, control_bw_gbps

Series rows cover the simulated steps only; the warmup state is recorded in
the manifest, so a zero-length run yields header-only series files.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dtm import write_event_log
from .engine import RunReport
from .errors import ConfigurationError

PEAK_COLUMNS = ["step", "cycle", "time_us", "peak_c", "decision"]


def _outdir(path: str | Path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {p}: {exc}") from exc
    probe = p / ".write_probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigurationError(f"output directory {p} is not writable") from exc
    return p


def write_manifest(path: str | Path, report: RunReport, extra: dict | None = None) -> None:
    items = dict(report.manifest)
    items["warmup_peak_c"] = f"{report.peak[0]:.6f}"
    items.update(extra or {})
    with open(path, "w") as fh:
        for k in sorted(items):
            fh.write(f"{k} = {items[k]}\n")


def emit_plotdata(report: RunReport, outdir: str | Path, name: str = "run") -> list[Path]:
    out = _outdir(outdir)
    files = [out / f"peak_{name}.csv", out / f"events_{name}.csv", out / f"latency_cdf_{name}.csv"]
    us_per_cycle = 1e6 / report.clock_hz
    with open(files[0], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PEAK_COLUMNS)
        for i in range(1, len(report.peak)):
            c = int(report.cycles[i])
            w.writerow([i, c, f"{c * us_per_cycle:.3f}", f"{report.peak[i]:.6f}", report.decisions[i]])
    write_event_log(files[1], report.events)
    with open(files[2], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["latency_cycles", "cdf"])
        lat = np.sort(report.latencies)
        if len(lat):
            vals, idx = np.unique(lat, return_index=True)
            counts = np.append(idx[1:], len(lat))
            for v, c in zip(vals, counts):
                w.writerow([int(v), f"{c / len(lat):.6f}"])
    return files


def emit_comparison(reports: dict[str, RunReport], outdir: str | Path, window: int = 100_000) -> list[Path]:
    out = _outdir(outdir)
    files: list[Path] = []
    for name, r in reports.items():
        files += emit_plotdata(r, out, name)
    names = list(reports)
    first = reports[names[0]]
    joined = out / "compare_peak.csv"
    with open(joined, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "cycle"] + names)
        for i in range(1, len(first.peak)):
            w.writerow([i, int(first.cycles[i])] + [f"{reports[n].peak[i]:.6f}" for n in names])
    summary = out / "compare_summary.csv"
    base_lat = first.latency_mean
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "triggers", "reallocate", "reroute", "max_peak_c",
                    "mean_latency_cycles", "latency_delta_pct", "control_bw_gbps"])
        for n in names:
            r = reports[n]
            tc = r.trigger_counts()
            delta = 100.0 * (r.latency_mean - base_lat) / base_lat if base_lat else 0.0
            w.writerow([n, r.triggers, tc["reallocate"], tc["reroute"], f"{r.peak.max():.4f}",
                        f"{r.latency_mean:.3f}", f"{delta:.3f}",
                        f"{r.control_bandwidth_bps(window) / 1e9:.6f}"])
    return files + [joined, summary]
