"""Command-line harness: dataset generation, training, simulation, comparison and accounting."""
from __future__ import annotations

import csv
import functools
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

from .errors import ConfigurationError, HorizonRangeError, ModelError, ProtocolViolation, TrainingError

OUT_ENV = "WDTM_OUT"
_ERRORS = (ConfigurationError, ModelError, TrainingError, HorizonRangeError, ProtocolViolation,
           OSError, ValueError)


def _fail_cleanly(fn):
    """Turn library errors into a single-line ``Error: Kind: message`` and a nonzero exit."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _ERRORS as exc:
            msg = " ".join(str(exc).split())
            raise click.ClickException(f"{type(exc).__name__}: {msg}") from exc
    return wrapper


def _common(fn):
    fn = click.option("-c", "--config", "config_path", type=click.Path(dir_okay=False),
                      help="INI config file.")(fn)
    fn = click.option("-s", "--set", "overrides", multiple=True, metavar="KEY=VALUE",
                      help="Override a config key (section.key=value or key=value).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Root seed (experiment.seed).")(fn)
    return fn


def _settings(config_path, overrides, seed):
    from .config import parse_config
    ov = list(overrides)
    if seed is not None:
        ov.append(f"experiment.seed={seed}")
    return parse_config(config_path, ov)


def _default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "runs")) / name


def _echo_config(settings, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.ini").write_text(settings.to_ini())


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def main(verbose: int):
    """Wireless NoC thermal management experiments."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command("gen-data")
@_common
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None, help="Dataset file.")
@_fail_cleanly
def gen_data(config_path, overrides, seed, out):
    """Generate RC-oracle training trajectories."""
    from .ann.dataset import generate_training_data, save_dataset
    from .thermal import build_rc_model
    st = _settings(config_path, overrides, seed)
    cfg = st.experiment()
    model = build_rc_model(cfg.topology(), cfg.thermal, cfg.power)
    d = st["dataset"]
    data = generate_training_data(model, d["n_scenarios"], d["steps"], st.seed("dataset"))
    path = Path(out) if out else _default_out("data") / "dataset.bin"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(path, data)
    _echo_config(st, path.parent)
    click.echo(f"dataset {path}: {data.n_scenarios} scenarios x {data.steps} steps x "
               f"{data.n_components} components")


@main.command()
@_common
@click.option("-d", "--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None, help="Model file.")
@_fail_cleanly
def train(config_path, overrides, seed, data_path, out):
    """Train the predictor and report held-out RMSE."""
    from .ann.dataset import load_dataset
    from .ann.io import save_model
    from .ann.train import train as fit
    st = _settings(config_path, overrides, seed)
    data = load_dataset(data_path)

    def progress(epoch, loss, rmse):
        click.echo(f"epoch {epoch}: train_mse={loss:.4f} val_rmse={rmse:.4f}")

    model, rep = fit(data, st.hyper(), progress=progress)
    path = Path(out) if out else _default_out("model") / "model.wdtm"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(path, model, st.quant())
    with open(path.with_suffix(".history.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_mse", "val_rmse"])
        w.writerows(rep.history)
    _echo_config(st, path.parent)
    click.echo(f"model {path}: baseline_rmse={rep.baseline_rmse:.4f} best_rmse={rep.best_rmse:.4f} "
               f"epoch={rep.best_epoch} seconds={rep.seconds:.1f}")


def _summary_line(name: str, r, window: int) -> str:
    tc = r.trigger_counts()
    return (f"{name}: max_peak={r.peak.max():.3f}C final_peak={r.peak[-1]:.3f}C "
            f"triggers={r.triggers} reallocate={tc['reallocate']} reroute={tc['reroute']} "
            f"mean_latency={r.latency_mean:.2f}cyc control_bw={r.control_bandwidth_bps(window) / 1e9:.4f}Gbps")


@main.command()
@_common
@click.option("-m", "--model", "model_path", type=click.Path(dir_okay=False), default=None)
@click.option("-o", "--out", type=click.Path(file_okay=False), default=None, help="Run directory.")
@_fail_cleanly
def simulate(config_path, overrides, seed, model_path, out):
    """One co-simulation run; writes plot CSVs, the event log and a manifest."""
    from .engine import run
    from .reporting import emit_plotdata, write_manifest
    ov = list(overrides) + ([f"experiment.model_path={model_path}"] if model_path else [])
    st = _settings(config_path, ov, seed)
    cfg = st.experiment()
    outdir = Path(out) if out else _default_out("simulate")
    report = run(cfg)
    emit_plotdata(report, outdir, cfg.dtm.variant.value)
    _echo_config(st, outdir)
    write_manifest(outdir / "manifest.txt", report)
    click.echo(_summary_line(cfg.dtm.variant.value, report, cfg.dtm.window))


def _parse_variants(spec: str, base):
    """'off,combined,combined@64,reroute_only' -> {name: DtmConfig}."""
    from .dtm import Variant
    out = {}
    for item in filter(None, (s.strip() for s in spec.split(","))):
        name, _, th = item.partition("@")
        try:
            v = Variant(name)
        except ValueError as exc:
            raise ConfigurationError(f"unknown variant {name!r}") from exc
        d = replace(base, variant=v, t_th=float(th) if th else base.t_th)
        out[item.replace("@", "_t")] = d
    if not out:
        raise ConfigurationError("no variants given")
    return out


@main.command()
@_common
@click.option("-m", "--model", "model_path", type=click.Path(dir_okay=False), default=None)
@click.option("--variants", default="off,combined,reroute_only", show_default=True,
              help="Comma list of off|combined|reroute_only, optionally @threshold.")
@click.option("-o", "--out", type=click.Path(file_okay=False), default=None)
@_fail_cleanly
def compare(config_path, overrides, seed, model_path, variants, out):
    """Run DTM variants on the same workload and write aligned series."""
    from .engine import compare as run_compare
    from .reporting import emit_comparison, write_manifest
    ov = list(overrides) + ([f"experiment.model_path={model_path}"] if model_path else [])
    st = _settings(config_path, ov, seed)
    cfg = st.experiment()
    vs = _parse_variants(variants, cfg.dtm)
    outdir = Path(out) if out else _default_out("compare")
    reports = run_compare(cfg, vs)
    emit_comparison(reports, outdir, cfg.dtm.window)
    _echo_config(st, outdir)
    for name, r in reports.items():
        write_manifest(outdir / f"manifest_{name}.txt", r)
        click.echo(_summary_line(name, r, cfg.dtm.window))


@main.command()
@_common
@click.option("--interval", type=click.Choice(["100us", "1ms", "10ms", "all"]), default="all",
              show_default=True)
@_fail_cleanly
def memcalc(config_path, overrides, seed, interval):
    """Predictor storage next to a table-driven estimator, with published figures."""
    from .ann.footprint import REFERENCE_LUT, lut_estimator_footprint, memory_footprint
    from .ann.network import init_model
    from .ann.quantized import build_quantized
    st = _settings(config_path, overrides, seed)
    qm = build_quantized(init_model(seed=0), st.quant())
    fp = memory_footprint(qm)
    click.echo("item,bytes,KiB,kB,published")
    refs = {"reg_bank": "1.2KB", "weights": "300KB", "threshold_lut": "0.048KB",
            "activation_lut": "1.32KB", "total": "302.568KB"}
    for k, v in fp.as_dict().items():
        click.echo(f"ann_{k},{v},{v / 1024:.4f},{v / 1000:.4f},{refs[k]}")
    labels = list(REFERENCE_LUT) if interval == "all" else [interval]
    click.echo("interval,rows,bytes,MB,published_MB,ratio_to_ann")
    for lab in labels:
        rows, ref = REFERENCE_LUT[lab]
        b = lut_estimator_footprint(rows)
        click.echo(f"{lab},{rows},{b},{b / 1e6:.2f},{ref:g},{b / fp.total:.1f}")
    click.echo(f"latency_cycles={qm.latency_cycles()} latency_us={qm.latency_seconds() * 1e6:.4f} "
               f"(published 1.1226us) mac_units={qm.fmt.mac_units}")


@main.command("dump-topology")
@_common
@click.option("--routes", is_flag=True, help="Also print the converged next-hop table.")
@_fail_cleanly
def dump_topology(config_path, overrides, seed, routes):
    """Print components, links and wireless interfaces."""
    from .routing import init_routes
    st = _settings(config_path, overrides, seed)
    topo = st.experiment().topology()
    click.echo(topo.dump(), nl=False)
    if routes:
        click.echo(init_routes(topo).route_dump(), nl=False)


if __name__ == "__main__":
    sys.exit(main())
