"""Pattern histogram of a single four-spin parity tile under noise-driven start-up."""

import argparse
import itertools

from lhzbench.analog import get_preset
from lhzbench.bench import even_pattern, monte_carlo
from lhzbench.lhz import single_tile
from lhzbench.sim import SimConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="ideal-1ghz")
    ap.add_argument("--runs", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps-per-pump", type=int, default=128)
    args = ap.parse_args()

    preset = get_preset(args.preset)
    layout = single_tile()
    net = preset.network(layout)
    cfg = SimConfig.for_network(net, preset.t_end, args.seed, args.steps_per_pump, preset=preset.name)
    stats = monte_carlo(net, layout, cfg, args.runs)
    print(f"P(even parity) = {stats.even_parity_prob:.3f} over {stats.runs} runs")
    for bits in itertools.product("+-", repeat=4):
        key = "".join(bits)
        count = stats.histogram.get(key, 0)
        tag = "even" if even_pattern(layout, key) else "odd "
        print(f"{key} {tag} {count:5d} {'#' * (60 * count // stats.runs)}")


if __name__ == "__main__":
    main()
