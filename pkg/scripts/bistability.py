"""Phase distribution of one parametric oscillator started from noise."""

import argparse
import math

import numpy as np

from lhzbench.analog import get_preset, single_unit, steady_amplitude
from lhzbench.readout import PUMP_PHASE
from lhzbench.sim import SimConfig, run_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="ideal-1ghz")
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--t-end", type=float, default=400e-9)
    args = ap.parse_args()

    params = get_preset(args.preset).spin
    net = single_unit(params)
    cfg = SimConfig.for_network(net, t_end=args.t_end, seed=args.seed)
    batch = run_batch(net, cfg, range(args.runs))
    x = batch.tail_phasors[:, 0]
    phi = np.angle(np.exp(1j * (np.angle(x) - PUMP_PHASE)))
    zero = np.abs(phi) < math.pi / 2
    print(f"{args.runs} runs: {zero.mean():.2f} near 0, {1 - zero.mean():.2f} near pi")
    print(f"cluster means {np.mean(phi[zero]):+.3f} / {np.angle(np.mean(np.exp(1j * phi[~zero]))):+.3f} rad")
    print(f"mean amplitude {np.mean(np.abs(x)):.4f} V, describing-function estimate "
          f"{steady_amplitude(params, 0.0):.4f} V")
    hist, edges = np.histogram(phi, bins=24, range=(-math.pi, math.pi))
    for h, e in zip(hist, edges):
        print(f"{e:+.2f} {'#' * h}")


if __name__ == "__main__":
    main()
