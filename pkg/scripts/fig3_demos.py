#!/usr/bin/env python3
"""Run every built-in demo on the 8-node demonstration network.

Prints the per-message path for each demo plus the proactive routing
tables, which is the quickest way to eyeball the whole system.
"""

import argparse

from cubenet.scenario import FIG3_DEMOS, build_fixture_fig3
from cubenet.simulator import Simulator


def message_paths(trace):
    paths = {}
    for ev in trace:
        if ev.kind in ("send", "resolve", "forward", "backtrack", "lookup", "deliver", "resolved"):
            if ev.msg is not None:
                paths.setdefault(ev.msg, []).append((ev.kind, ev.node))
    return paths


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--demo", choices=sorted(FIG3_DEMOS), default=None, help="run just one demo")
    args = parser.parse_args()
    demos = [args.demo] if args.demo else sorted(FIG3_DEMOS)
    for demo in demos:
        sc = build_fixture_fig3(demo=demo)
        res = Simulator(sc).run()
        print(f"== {demo} (mode={sc.mode})")
        for mid, steps in sorted(message_paths(res.trace).items()):
            if all(tick_kind != "send" and tick_kind != "resolve" for tick_kind, _ in steps):
                continue
            rendered = " ".join(f"{kind}@{node}" for kind, node in steps)
            print(f"   msg {mid}: {rendered}")
        if sc.mode == "proactive":
            for name in sorted(res.sim.net.nodes):
                table = res.sim.net.nodes[name].table
                print(f"   table {name}: {table.render()}")
        m = res.metrics
        print(f"   delivered {m.delivered}/{m.sent}, mean_hops {m.mean_hops}, mean_stretch {m.mean_stretch}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
