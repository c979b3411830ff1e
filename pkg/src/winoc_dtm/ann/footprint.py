"""Storage accounting for the predictor hardware and for a table-driven estimator."""
from __future__ import annotations

from dataclasses import dataclass

from .quantized import QuantizedModel

# values printed in the published memory tables, for side-by-side reports
REFERENCE_ANN_KB = {"reg_bank": 1.2, "weights": 300.0, "threshold_lut": 0.048,
                    "activation_lut": 1.32, "total": 302.568}
REFERENCE_LUT = {"100us": (3000, 1382.0), "1ms": (1700, 784.0), "10ms": (1000, 460.0)}
LUT_ENTRIES_PER_ROW = 1920  # one byte per sample, see ``lut_estimator_footprint``


@dataclass(frozen=True)
class Footprint:
    reg_bank: int
    weights: int
    threshold_lut: int
    activation_lut: int

    @property
    def total(self) -> int:
        return self.reg_bank + self.weights + self.threshold_lut + self.activation_lut

    def as_dict(self) -> dict[str, int]:
        return {"reg_bank": self.reg_bank, "weights": self.weights,
                "threshold_lut": self.threshold_lut, "activation_lut": self.activation_lut,
                "total": self.total}


def _bytes(n_entries: int, bits: int) -> int:
    return (n_entries * bits + 7) // 8


def memory_footprint(qm: QuantizedModel) -> Footprint:
    """Bytes per storage block, computed from the architecture and the declared widths."""
    f = qm.fmt
    n_util = qm.n_in - 1  # the horizon code is an FSM constant, not a register
    return Footprint(reg_bank=_bytes(n_util, f.input_bits),
                     weights=_bytes(qm.n_weights, f.weight_bits),
                     threshold_lut=_bytes(len(qm.thr_lut), 8),
                     activation_lut=_bytes(len(qm.act_lut), f.act_bits))


def kib(n_bytes: int) -> float:
    return n_bytes / 1024.0


def kb(n_bytes: int) -> float:
    return n_bytes / 1000.0


def lut_estimator_footprint(rows: int, n_components: int = 240,
                            entries_per_row: int = LUT_ENTRIES_PER_ROW) -> int:
    """rows x components x entries per row, one byte per stored temperature."""
    if rows < 0:
        raise ValueError("rows must be >= 0")
    return rows * n_components * entries_per_row


def memcalc_report(qm: QuantizedModel) -> list[dict]:
    """Computed sizes next to the published ones.

    The published table mixes units (its activation table is 1352 B in KiB, its
    threshold table 48 B in decimal kB), so both conversions are listed.
    """
    fp = memory_footprint(qm)
    rows = [{"item": f"ann_{k}", "bytes": v, "KiB": kib(v), "kB": kb(v),
             "reference": f"{REFERENCE_ANN_KB[k]}KB"} for k, v in fp.as_dict().items()]
    for label, (n_rows, ref_mb) in REFERENCE_LUT.items():
        b = lut_estimator_footprint(n_rows)
        rows.append({"item": f"lut_{label}_{n_rows}rows", "bytes": b, "MB": b / 1e6,
                     "reference": f"{ref_mb:g}MB", "ratio_to_ann": b / fp.total})
    return rows
