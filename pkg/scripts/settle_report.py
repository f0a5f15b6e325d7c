"""Settle-time report for a preset: when does the binarized pattern stop changing."""

import argparse
import math

import numpy as np

from lhzbench.analog import get_preset
from lhzbench.bench import monte_carlo
from lhzbench.lhz import compile_layout, single_tile
from lhzbench.problem import complete_graph, maxcut_to_ising
from lhzbench.sim import SimConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="cmos-like-13ghz")
    ap.add_argument("--layout", choices=("tile", "k4"), default="tile")
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps-per-pump", type=int, default=128)
    args = ap.parse_args()

    preset = get_preset(args.preset)
    layout = single_tile() if args.layout == "tile" else compile_layout(maxcut_to_ising(complete_graph(4)))
    net = preset.network(layout)
    cfg = SimConfig.for_network(net, preset.t_end, args.seed, args.steps_per_pump, preset=preset.name)
    stats = monte_carlo(net, layout, cfg, args.runs)
    settled = np.array([t for t in stats.settle_times if math.isfinite(t)])
    print(f"preset {preset.name}, {args.layout}, {stats.runs} runs, t_run {stats.t_run * 1e9:.1f} ns")
    print(f"settled fraction {len(settled) / stats.runs:.2f}")
    if settled.size:
        q = np.percentile(settled, [10, 50, 90]) * 1e9
        print(f"settle time p10/p50/p90 = {q[0]:.1f} / {q[1]:.1f} / {q[2]:.1f} ns")


if __name__ == "__main__":
    main()
