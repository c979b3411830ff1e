"""Build the default fabric, route it, and watch the hotspot workload heat the chip with no DTM.

    python3 demos/01_fabric_and_heat.py
"""
import numpy as np

from winoc_dtm.dtm import DtmConfig
from winoc_dtm.engine import ExperimentConfig, run, steady_peak
from winoc_dtm.routing import init_routes
from winoc_dtm.topology import default_topology

topo = default_topology()
print(f"{topo.n_cores} cores, {topo.n_switches} switches, {topo.n_links} links, "
      f"{topo.n_components} thermal nodes")
print(f"wireless interfaces at switches {topo.wireless_interfaces}")
print(f"average hop count {topo.average_hop_count():.3f}")

routes = init_routes(topo)
print(f"next hop from switch 0 toward switch 63: {routes.active[0, 63]}")

cfg = ExperimentConfig(duration=2_000_000, dtm=DtmConfig(variant="off"))
report = run(cfg)
cross = int(np.argmax(report.peak > cfg.dtm.t_th))
print(f"warmup peak {report.peak[0]:.2f} C, after 2M cycles {report.peak[-1]:.2f} C, "
      f"steady state {steady_peak(cfg):.2f} C")
print(f"crosses {cfg.dtm.t_th} C at cycle {report.cycles[cross]}")
