import math
from dataclasses import replace

import numpy as np
import pytest

from lhzbench.analog import PRESETS, single_unit, tank_energy
from lhzbench.lhz import compile_layout, single_tile
from lhzbench.problem import complete_graph, maxcut_to_ising
from lhzbench.sim import (
    SimConfig, SimulationError, Trace, _integrate, _Kernel, noise_current_std, noise_psd, run,
    run_batch, run_state, settle_index, settle_time, window_steps,
)

IDEAL = PRESETS["ideal-1ghz"]
TANK = replace(IDEAL.spin, G0=0.0, dG=0.0, R_loss=math.inf, I_s=0.0)
T0 = 1.0 / TANK.f0


def zero_crossing_frequency(trace):
    v, t = trace.voltages[:, 0], trace.times
    z = np.flatnonzero((v[:-1] > 0) & (v[1:] <= 0))
    tz = t[z] + (t[z + 1] - t[z]) * v[z] / (v[z] - v[z + 1])
    return (len(tz) - 1) / (tz[-1] - tz[0])


class TestNoise:
    def test_psd_from_resistors(self):
        # 4 k T (R_N / 2) at 10 ohm, 300 K
        assert noise_psd(10.0, 300.0) == pytest.approx(8.28e-20, rel=2e-3)

    def test_current_std_formula(self):
        assert noise_current_std(8.28e-20, 1e-12, 10.0) == pytest.approx(math.sqrt(8.28e-20 / 2e-12) / 10)

    def test_injected_samples_have_predicted_std(self):
        # a tank with an enormous inductor and nothing else: dq = sigma dt xi
        p = replace(TANK, L=1e6, C0=1e-12)
        net = single_unit(p)
        cfg = SimConfig(dt=1e-12, t_end=4000e-12, seed=3)
        qs = []
        _integrate(_Kernel(net), cfg, list(range(250)), lambda s, t, q: qs.append(q[:, 0].copy()), 1)
        inc = np.diff(np.array(qs), axis=0).ravel()
        assert inc.size >= 1_000_000 - 250
        sigma = noise_current_std(cfg.psd, cfg.dt, cfg.R_N)
        assert np.std(inc) / (sigma * cfg.dt) == pytest.approx(1.0, abs=0.02)

    def test_zero_psd_is_deterministic(self):
        cfg = SimConfig(dt=T0 / 64, t_end=5 * T0, S_v=0.0)
        a = run_state(single_unit(IDEAL.spin), cfg, 0)
        b = run_state(single_unit(IDEAL.spin), replace(cfg, seed=0), 0)
        assert np.array_equal(a[0], b[0])


class TestIntegrator:
    def test_free_running_frequency(self):
        cfg = SimConfig(dt=T0 / 128, t_end=100 * T0, S_v=0.0)
        trace = run(single_unit(TANK), cfg, q0=[TANK.C0 * 0.1])
        assert zero_crossing_frequency(trace) == pytest.approx(1e9, rel=5e-3)

    def test_lossless_energy_drift(self):
        cfg = SimConfig(dt=T0 / 128, t_end=100 * T0, S_v=0.0)
        q0 = [TANK.C0 * 0.1]
        q, i = run_state(single_unit(TANK), cfg, q0=q0)
        e0 = tank_energy(q0, [0.0], TANK)[0]
        assert abs(tank_energy(q, i, TANK)[0] - e0) / e0 < 0.01

    @pytest.mark.parametrize("params", [TANK, IDEAL.spin, replace(IDEAL.spin, V_k=0.01)],
                             ids=["lossless", "pumped", "hard-clip"])
    def test_fourth_order_convergence(self, params):
        net = single_unit(params)

        def final(div):
            cfg = SimConfig(dt=T0 / div, t_end=20 * T0, S_v=0.0)
            q, i = run_state(net, cfg, q0=[params.C0 * 0.1])
            return np.array([q[0] / params.C0, i[0] * math.sqrt(params.L / params.C0)])

        ref = final(2048)
        errs = [np.linalg.norm(final(d) - ref) for d in (32, 64, 128)]
        for coarse, fine in zip(errs, errs[1:]):
            assert 8 <= coarse / fine <= 32

    def test_non_finite_state_reported(self):
        p = replace(IDEAL.spin, I_s=0.0, R_loss=math.inf, G0=0.5, dG=0.0)
        cfg = SimConfig(dt=T0 / 16, t_end=4000 * T0, S_v=0.0)
        with pytest.raises(SimulationError):
            run(single_unit(p, 1.9), cfg, q0=[p.C0 * 1e3])


class TestReproducibility:
    def test_batching_does_not_change_runs(self):
        net = IDEAL.network(single_tile())
        cfg = SimConfig.for_network(net, t_end=40e-9, seed=11, steps_per_pump=32)
        together = run_batch(net, cfg, [0, 1, 2])
        alone = run_batch(net, cfg, [2])
        assert np.allclose(together.tail_phasors[2], alone.tail_phasors[0], rtol=1e-12, atol=1e-15)

    def test_same_seed_same_trace(self):
        net = IDEAL.network(single_tile())
        cfg = SimConfig.for_network(net, t_end=10e-9, seed=4, steps_per_pump=32)
        a, b = run(net, cfg, 1), run(net, cfg, 1)
        assert np.array_equal(a.voltages, b.voltages)
        c = run(net, replace(cfg, seed=5), 1)
        assert not np.array_equal(a.voltages, c.voltages)

    def test_reference_phasor_is_pump_half_frequency(self):
        net = IDEAL.network(single_tile())
        cfg = SimConfig.for_network(net, t_end=40e-9, seed=0, steps_per_pump=32)
        b = run_batch(net, cfg, [0])
        assert np.angle(b.reference_phasor) == pytest.approx(-math.pi / 4, abs=1e-3)
        assert abs(b.reference_phasor) == pytest.approx(1.0, abs=1e-3)

    def test_short_tail_rejected(self):
        net = single_unit(IDEAL.spin)
        cfg = SimConfig.for_network(net, t_end=10e-9, seed=0, steps_per_pump=16)
        with pytest.raises(ValueError, match="cycles"):
            run_batch(net, cfg, [0], tail_fraction=0.1)


class TestTraceIO:
    def make(self):
        net = IDEAL.network(compile_layout(maxcut_to_ising(complete_graph(3))))
        cfg = SimConfig.for_network(net, t_end=2e-9, seed=1, steps_per_pump=16)
        return run(net, cfg)

    def test_csv_layout(self, tmp_path):
        tr = self.make()
        path = tmp_path / "t.csv"
        tr.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t," + ",".join(f"unit_{u}" for u in range(tr.n_units))
        assert len(lines) == tr.times.size + 1

    def test_binary_round_trip(self, tmp_path):
        tr = self.make()
        path = tmp_path / "t.bin"
        tr.to_binary(path)
        back = Trace.from_binary(path)
        assert np.array_equal(back.voltages, tr.voltages)
        assert back.labels == tr.labels
        assert path.stat().st_size == tr.times.size * (tr.n_units + 1) * 8

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            Trace(np.arange(3.0), np.zeros((2, 1)), 1.0, 0)
        with pytest.raises(ValueError):
            Trace(np.array([0.0, 0.0]), np.zeros((2, 1)), 1.0, 0)


class TestSettle:
    @pytest.mark.parametrize("patterns, expected", [
        (["a", "b", "b", "b"], 1),
        (["b", "b"], 0),
        (["a", "b"], None),
        (["b"], 0),
        ([], None),
    ])
    def test_settle_index(self, patterns, expected):
        assert settle_index(patterns) == expected

    def test_settle_time_on_trace(self):
        t = np.arange(8) * 1.0
        v = np.array([[-1], [-1], [1], [1], [1], [1], [1], [1]], dtype=float)
        tr = Trace(t, v, 1.0, 0)
        assert settle_time(tr, lambda w: int(np.sign(w.voltages.sum())), 2) == 2.0
        flip = Trace(t, v * np.array([[1]] * 6 + [[-1]] * 2), 1.0, 0)
        assert settle_time(flip, lambda w: int(np.sign(w.voltages.sum())), 2) == math.inf

    def test_window_steps_whole_cycles(self):
        cfg = SimConfig(dt=1e-12, t_end=1e-9)
        assert window_steps(cfg, 1e9, 16) == 16000

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(dt=0.0, t_end=1.0)
        with pytest.raises(ValueError):
            SimConfig(dt=1.0, t_end=0.5)
        with pytest.raises(ValueError):
            SimConfig(dt=1.0, t_end=2.0, seed=-1)
