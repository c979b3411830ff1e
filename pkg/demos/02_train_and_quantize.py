"""Generate oracle trajectories, train the predictor, and compare float and integer inference.

Uses the default 250 x 3000 dataset (a few minutes).  --quick trains on a smaller slice
in about a minute, at the cost of a noticeably weaker model.

    python3 demos/02_train_and_quantize.py [--quick] [--out model.wdtm]
"""
import argparse

import numpy as np

from winoc_dtm.ann.dataset import generate_training_data
from winoc_dtm.ann.footprint import memory_footprint
from winoc_dtm.ann.inference import predict
from winoc_dtm.ann.io import save_model
from winoc_dtm.ann.quantized import build_quantized, dequantize_horizon, dequantize_inputs, quantized_predict
from winoc_dtm.ann.train import TrainHyper, train
from winoc_dtm.thermal import build_rc_model
from winoc_dtm.topology import default_topology

ap = argparse.ArgumentParser()
ap.add_argument("--quick", action="store_true")
ap.add_argument("--out", default="model.wdtm")
args = ap.parse_args()

rc = build_rc_model(default_topology())
scen, steps, epochs = (60, 3000, 3) if args.quick else (250, 3000, 8)
data = generate_training_data(rc, scen, steps, seed=1)
model, rep = train(data, TrainHyper(epochs=epochs),
                   progress=lambda e, loss, rmse: print(f"epoch {e}: val rmse {rmse:.3f} C"))
print(f"held-out RMSE {rep.best_rmse:.3f} C (untrained {rep.baseline_rmse:.3f} C)")

qm = build_quantized(model)
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(200):
    u8, h8, t0 = rng.integers(0, 256, 240), int(rng.integers(0, 256)), rng.uniform(45, 75, 240)
    q = quantized_predict(qm, u8, h8, t0, 68)
    f = predict(model, dequantize_inputs(u8), dequantize_horizon(h8), t0)
    worst = max(worst, float(np.abs(q.temps - f).max()))
print(f"integer vs float worst gap {worst:.3f} C over 200 inputs")
print(f"pipeline latency {qm.latency_cycles()} cycles, storage {memory_footprint(qm).total} bytes")
save_model(args.out, model)
print(f"saved {args.out}")
