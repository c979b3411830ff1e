import csv

import pytest

from winoc_dtm.dtm import DtmConfig
from winoc_dtm.engine import ExperimentConfig, compare, run
from winoc_dtm.errors import ConfigurationError
from winoc_dtm.reporting import PEAK_COLUMNS, emit_comparison, emit_plotdata, write_manifest

OFF = DtmConfig(variant="off")


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_empty_run_gives_header_only(tmp_path):
    r = run(ExperimentConfig(duration=0, dtm=OFF))
    files = emit_plotdata(r, tmp_path, "off")
    assert [f.name for f in files] == ["peak_off.csv", "events_off.csv", "latency_cdf_off.csv"]
    assert rows(files[0]) == [PEAK_COLUMNS]
    assert len(rows(files[1])) == 1 and rows(files[2]) == [["latency_cycles", "cdf"]]
    write_manifest(tmp_path / "manifest.txt", r)
    assert "warmup_peak_c = 60.000000" in (tmp_path / "manifest.txt").read_text()


def test_peak_series_schema(tmp_path):
    r = run(ExperimentConfig(duration=200_000, dtm=OFF))
    out = rows(emit_plotdata(r, tmp_path)[0])
    assert len(out) == 1 + 8
    assert out[4] == ["4", "100000", "40.000", f"{r.peak[4]:.6f}", "none"]


def test_comparison_files_and_alignment(tmp_path):
    reps = compare(ExperimentConfig(duration=200_000), {"a": OFF, "b": OFF})
    files = emit_comparison(reps, tmp_path)
    names = sorted(f.name for f in files)
    assert sum(n.startswith("peak_") for n in names) == 2
    assert "compare_peak.csv" in names and "compare_summary.csv" in names
    joined = rows(tmp_path / "compare_peak.csv")
    assert joined[0] == ["step", "cycle", "a", "b"] and len(joined) == 9
    summary = rows(tmp_path / "compare_summary.csv")
    assert summary[1][0] == "a" and summary[1][1] == "0"


def test_rerun_is_byte_identical(tmp_path):
    r = run(ExperimentConfig(duration=200_000, dtm=OFF))
    a = [p.read_bytes() for p in emit_plotdata(r, tmp_path / "a")]
    b = [p.read_bytes() for p in emit_plotdata(r, tmp_path / "b")]
    assert a == b


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    r = run(ExperimentConfig(duration=0, dtm=OFF))
    with pytest.raises(ConfigurationError):
        emit_plotdata(r, blocker / "sub")
