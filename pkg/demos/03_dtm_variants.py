"""Compare DTM off, combined at two thresholds, and reroute-only on the hotspot workload.

Needs a trained model (see 02_train_and_quantize.py).  CSVs land in ./demo_out.

    python3 demos/03_dtm_variants.py model.wdtm [duration_cycles]
"""
import sys

from winoc_dtm.ann.io import load_model
from winoc_dtm.dtm import DtmConfig
from winoc_dtm.engine import ExperimentConfig, compare
from winoc_dtm.reporting import emit_comparison

model = load_model(sys.argv[1])
duration = int(sys.argv[2]) if len(sys.argv) > 2 else 2_000_000
variants = {
    "off": DtmConfig(variant="off"),
    "combined_68": DtmConfig(t_th=68),
    "combined_64": DtmConfig(t_th=64),
    "reroute_only": DtmConfig(variant="reroute_only"),
}
reports = compare(ExperimentConfig(duration=duration), variants, model)
for name, r in reports.items():
    tc = r.trigger_counts()
    print(f"{name:13s} max peak {r.peak.max():6.2f} C  triggers {r.triggers:3d} "
          f"(reallocate {tc['reallocate']}, reroute {tc['reroute']})")
files = emit_comparison(reports, "demo_out")
print(f"wrote {len(files)} files to demo_out/")
