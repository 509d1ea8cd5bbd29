"""A route breaks mid-flow: node 2 drives away from its relay at t=5 s.

Prints where packets were dropped and why, for each protocol. On-demand
protocols notice the break through MAC retry exhaustion and report it back to
the source; DSDV marks the route broken and advertises it.
"""

from collections import Counter

from manetsim.metrics import DROP
from manetsim.mobility import GridSpec, MobilityScenario, Waypoint
from manetsim.scenario import ScenarioConfig, run_scenario
from manetsim.traffic import Flow

DURATION = 20.0
TRACES = [
    [Waypoint(0.0, 0, 0)],
    [Waypoint(0.0, 200, 0)],
    [Waypoint(0.0, 400, 0), Waypoint(5.0, 400, 0, 20.0), Waypoint(20.0, 700, 0)],
]

for protocol in ("aodv", "dsr", "dsdv"):
    mob = MobilityScenario(GridSpec(), DURATION, TRACES)
    cfg = ScenarioConfig(protocol=protocol, n_nodes=3, duration=DURATION, flows=[])
    start = 1.0 if protocol != "dsdv" else 0.5
    res = run_scenario(cfg, keep_records=True, mobility=mob, flows=[Flow(0, 2, start, rate=4.0)])
    drops = Counter((r.node, r.reason) for r in res.records if r.kind == DROP and r.pkt_type == "cbr")
    first = min((r.time for r in res.records if r.kind == DROP and r.pkt_type == "cbr"), default=None)
    m = res.metrics
    print(f"{protocol}: received {m.received}/{m.sent}, first drop at {first and round(first, 3)} s")
    for (node, reason), count in sorted(drops.items()):
        print(f"    node {node} dropped {count} packets ({reason})")
