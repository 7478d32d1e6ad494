"""Tests for config parsing, scenario generation, and the command front end."""

import json

import numpy as np
import pytest

from flocksim.cli import (
    SplitMix64,
    build_system,
    generate_scenario,
    main,
    parse_config,
)
from flocksim.dynamics import make_system
from flocksim.errors import ConfigError, ValidationError
from flocksim.integrator import SolverConfig, solve_piecewise
from flocksim.kernels import CuckerSmaleKernel, SingularKernel

SIM_TEXT = """\
# head-on pair at the sticking threshold
[scenario]
n = 2
d = 1
alpha = 0.5
x_1 = -0.5
x_2 = 0.5
v_1 = 2.0
v_2 = -2.0

[solver]
t_end = 0.7
"""


class TestSplitMix64:
    def test_reference_sequence(self):
        # published outputs of the standard generator for seed 0
        rng = SplitMix64(0)
        assert rng.u64() == 0xE220A8397B1DCDAF
        assert rng.u64() == 0x6E789E6AA1B965F4
        assert rng.u64() == 0x06C45D188009454F

    def test_uniform_range_and_determinism(self):
        a = SplitMix64(42)
        b = SplitMix64(42)
        draws = [a.uniform() for _ in range(200)]
        assert all(0.0 <= u < 1.0 for u in draws)
        assert draws == [b.uniform() for _ in range(200)]
        assert draws != [SplitMix64(43).uniform() for _ in range(200)]

    def test_seed_wraps_to_64_bits(self):
        assert SplitMix64(1 << 64).u64() == SplitMix64(0).u64()


class TestGenerateScenario:
    def test_shapes_and_bounds(self):
        x, v = generate_scenario(7, 3, seed=11, box=2.0, speed=0.5)
        assert x.shape == (7, 3) and v.shape == (7, 3)
        assert np.all(np.abs(x) <= 1.0)
        assert np.all(np.sqrt((v**2).sum(axis=1)) <= 0.5)

    def test_reproducible(self):
        a = generate_scenario(5, 2, seed=3, box=1.0, speed=1.0)
        b = generate_scenario(5, 2, seed=3, box=1.0, speed=1.0)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        c = generate_scenario(5, 2, seed=4, box=1.0, speed=1.0)
        assert not np.array_equal(a[0], c[0])

    def test_positions_consume_the_stream_first(self):
        rng = SplitMix64(9)
        expect = np.array([[2.0 * (rng.uniform() - 0.5) for _ in range(2)] for _ in range(3)])
        x, _ = generate_scenario(3, 2, seed=9, box=2.0, speed=1.5)
        assert np.array_equal(x, expect)


class TestParseConfig:
    def test_full_simulate_config(self):
        cfg = parse_config(SIM_TEXT, command="simulate", out_dir="somewhere")
        assert cfg.command == "simulate"
        assert cfg.out_dir == "somewhere"
        sc = cfg.scenario
        assert (sc.n, sc.d, sc.alpha, sc.mode, sc.kernel) == (2, 1, 0.5, "inline", "singular")
        assert np.array_equal(sc.x, [[-0.5], [0.5]])
        assert np.array_equal(sc.v, [[2.0], [-2.0]])
        assert cfg.solver.t_end == 0.7
        assert cfg.solver.rel_tol == SolverConfig().rel_tol

    def test_twobody_and_converge_sections(self):
        text = (
            "[scenario]\nalpha = 0.25\n"
            "[twobody]\nphi0 = 2.0\ndphi0 = -1.0\n"
        )
        cfg = parse_config(text, command="twobody")
        assert cfg.twobody.phi0 == 2.0
        assert cfg.twobody.dphi0 == -1.0
        assert cfg.twobody.n_levels == 20

        text = (
            "[scenario]\nn = 2\nd = 1\nalpha = 0.5\n"
            "x_1 = -0.5\nx_2 = 0.5\nv_1 = 0.5\nv_2 = -0.5\n"
            "[converge]\nn_list = 5 50 500\n"
        )
        cfg = parse_config(text, command="converge")
        assert cfg.n_list == (5, 50, 500)

    def test_comments_and_blank_lines_ignored(self):
        text = "# leading comment\n\n" + SIM_TEXT + "\n# trailing\n"
        cfg = parse_config(text)
        assert cfg.scenario.n == 2

    def test_build_system_kernel_choice(self):
        sc = parse_config(SIM_TEXT).scenario
        assert isinstance(build_system(sc).kernel, SingularKernel)
        text = SIM_TEXT.replace("alpha = 0.5", "kernel = cucker_smale\nK = 2.0\nbeta = 3.0")
        kernel = build_system(parse_config(text).scenario).kernel
        assert isinstance(kernel, CuckerSmaleKernel)
        assert kernel.K == 2.0 and kernel.beta == 3.0


class TestParseErrors:
    def test_structural_errors_carry_line_numbers(self):
        with pytest.raises(ConfigError, match="line 1") as exc_info:
            parse_config("[weird]\n")
        assert exc_info.value.line == 1
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("[solver]\nrel_tol 1e-9\n")
        with pytest.raises(ConfigError, match="outside any"):
            parse_config("rel_tol = 1e-9\n")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("[solver]\nrel_tol = 1e-9\nrel_tol = 1e-8\n")
        with pytest.raises(ConfigError, match="empty key"):
            parse_config("[solver]\n= 3\n")

    def test_value_errors_name_the_key(self):
        with pytest.raises(ValidationError, match="rel_tolx"):
            parse_config("[solver]\nrel_tolx = 1\n")
        with pytest.raises(ValidationError, match="not a number"):
            parse_config("[solver]\nrel_tol = fast\n")
        with pytest.raises(ValidationError, match="d_stick"):
            parse_config("[solver]\nd_stick = -1e-6\n")
        with pytest.raises(ValidationError, match="alpha") as exc_info:
            parse_config("[scenario]\nalpha = 1.5\n")
        assert exc_info.value.key == "alpha"
        with pytest.raises(ValidationError, match="mode must be"):
            parse_config("[scenario]\nmode = auto\n")
        with pytest.raises(ValidationError, match="kernel must be"):
            parse_config("[scenario]\nkernel = bounded\n")

    def test_inline_row_errors(self):
        base = "[scenario]\nn = 2\nd = 1\nalpha = 0.5\n"
        with pytest.raises(ValidationError, match="missing inline row"):
            parse_config(base + "x_1 = 0.0\nv_1 = 1.0\nv_2 = -1.0\n")
        with pytest.raises(ValidationError, match="expected 1 components"):
            parse_config(base + "x_1 = 0.0 1.0\nx_2 = 1.0\nv_1 = 0.0\nv_2 = 0.0\n")
        with pytest.raises(ValidationError, match="out of range"):
            parse_config(base + "x_1 = 0.0\nx_2 = 1.0\nx_5 = 9.0\nv_1 = 0.0\nv_2 = 0.0\n")
        with pytest.raises(ValidationError, match="inline rows need n and d"):
            parse_config("[scenario]\nalpha = 0.5\nx_1 = 0.0\n")

    def test_command_requirements(self):
        with pytest.raises(ValidationError, match="unknown command"):
            parse_config(SIM_TEXT, command="explode")
        with pytest.raises(ValidationError, match="twobody needs"):
            parse_config("[scenario]\nalpha = 0.5\n", command="twobody")
        with pytest.raises(ValidationError, match="alpha"):
            parse_config("[twobody]\nphi0 = 1.0\ndphi0 = -1.0\n", command="twobody")
        with pytest.raises(ValidationError, match="phi0"):
            parse_config("[scenario]\nalpha = 0.5\n[twobody]\ndphi0 = -1.0\n", command="twobody")
        with pytest.raises(ValidationError, match="converge needs"):
            parse_config(SIM_TEXT, command="converge")
        with pytest.raises(ValidationError, match="required"):
            parse_config("[scenario]\nmode = generate\nn = 2\nd = 1\nalpha = 0.5\n")
        with pytest.raises(ValidationError, match="singular kernel"):
            text = SIM_TEXT.replace("alpha = 0.5\n", "alpha = 0.5\nkernel = cucker_smale\n")
            parse_config(text + "[converge]\nn_list = 5 50\n", command="converge")

    def test_converge_list_validation(self):
        head = (
            "[scenario]\nn = 2\nd = 1\nalpha = 0.5\n"
            "x_1 = -0.5\nx_2 = 0.5\nv_1 = 0.5\nv_2 = -0.5\n"
        )
        for bad in ("n_list = 5", "n_list = 1 5", "n_list = 50 5", "n_list = 5 5"):
            with pytest.raises(ValidationError, match="n_list"):
                parse_config(head + "[converge]\n" + bad + "\n", command="converge")
        with pytest.raises(ValidationError, match="unknown key"):
            parse_config(head + "[converge]\nn_list = 5 50\ncaps = 3\n", command="converge")


@pytest.fixture(scope="module")
def sim_out(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    cfg = root / "run.cfg"
    cfg.write_text(SIM_TEXT, encoding="utf-8")
    out = root / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    return out


def _load_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


class TestSimulateCommand:
    def test_trajectory_round_trips(self, sim_out):
        header = (sim_out / "trajectory.csv").read_text().splitlines()[0]
        assert header == "t,x_1_1,x_2_1,v_1_1,v_2_1"
        data = _load_csv(sim_out / "trajectory.csv")
        traj = solve_piecewise(
            make_system(
                np.array([[-0.5], [0.5]]),
                np.array([[2.0], [-2.0]]),
                SingularKernel(alpha=0.5),
            ),
            SolverConfig(t_end=0.7),
        )
        assert np.array_equal(data[:, 0], traj.t)
        assert np.array_equal(data[:, 1], traj.x[:, 0, 0])
        assert np.array_equal(data[:, 2], traj.x[:, 1, 0])
        assert np.array_equal(data[:, 3], traj.v[:, 0, 0])
        assert np.array_equal(data[:, 4], traj.v[:, 1, 0])

    def test_events_jsonl(self, sim_out):
        lines = (sim_out / "events.jsonl").read_text().splitlines()
        assert len(lines) == 1
        event = json.loads(lines[0])
        assert event["kind"] == "Sticking"
        assert event["group"] == [0, 1]
        assert event["t_event"] == pytest.approx(0.5, abs=1e-3)
        assert event["rel_speed"] < 1e-4

    def test_meta_reparses_to_same_run(self, sim_out):
        meta = (sim_out / "meta.txt").read_text()
        cfg = parse_config(meta, command="simulate")
        traj = solve_piecewise(build_system(cfg.scenario), cfg.solver)
        data = _load_csv(sim_out / "trajectory.csv")
        assert np.array_equal(data[:, 0], traj.t)
        assert np.array_equal(data[:, 1], traj.x[:, 0, 0])

    def test_rerun_is_byte_identical(self, sim_out, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(SIM_TEXT, encoding="utf-8")
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        for name in ("trajectory.csv", "events.jsonl"):
            assert (out / name).read_bytes() == (sim_out / name).read_bytes()

    def test_generated_scenario_runs(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[scenario]\nmode = generate\nn = 3\nd = 2\nalpha = 0.5\nseed = 3\n"
            "[solver]\nt_end = 1.0\n",
            encoding="utf-8",
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        meta = (out / "meta.txt").read_text()
        assert "seed = 3" in meta
        data = _load_csv(out / "trajectory.csv")
        assert data.shape[1] == 1 + 2 * 3 * 2


class TestTwoBodyCommand:
    def _run(self, tmp_path, body):
        cfg = tmp_path / "tb.cfg"
        cfg.write_text(body, encoding="utf-8")
        out = tmp_path / "out"
        assert main(["twobody", "--config", str(cfg), "--out", str(out)]) == 0
        text = (out / "report.txt").read_text().splitlines()
        return {line.split(" = ")[0]: line.split(" = ")[1] for line in text}

    def test_critical_report(self, tmp_path):
        report = self._run(
            tmp_path, "[scenario]\nalpha = 0.5\n[twobody]\nphi0 = 1.0\ndphi0 = -4.0\n"
        )
        assert report["critical_velocity"] == "-4.0"
        assert report["outcome"] == "Stick"
        assert report["stick_time"] == "0.5"
        levels = [k for k in report if k.startswith("level_")]
        assert len(levels) == 19
        assert all(report[k].endswith(" ok") for k in levels)

    def test_collide_report(self, tmp_path):
        report = self._run(
            tmp_path, "[scenario]\nalpha = 0.5\n[twobody]\nphi0 = 1.0\ndphi0 = -5.0\n"
        )
        assert report["outcome"] == "Collide"
        assert float(report["impact_speed"]) == 1.0
        assert float(report["t_hit"]) == pytest.approx(0.5 - np.log(5.0) / 8.0, abs=1e-8)

    def test_no_collision_report(self, tmp_path):
        report = self._run(
            tmp_path, "[scenario]\nalpha = 0.5\n[twobody]\nphi0 = 1.0\ndphi0 = -3.0\n"
        )
        assert report["outcome"] == "NoCollision"
        assert float(report["phi_limit"]) == 0.0625

    def test_bounded_kernel_report(self, tmp_path):
        report = self._run(
            tmp_path,
            "[scenario]\nkernel = cucker_smale\nK = 1.0\nbeta = 2.0\n"
            "[twobody]\nphi0 = 1.0\ndphi0 = -1.0\n"
            "[solver]\nt_end = 1.0\n",
        )
        assert report["floor_ok"] == "True"
        assert float(report["floor_min_ratio"]) >= 1.0 - 1e-6


class TestConvergeCommand:
    def test_free_family_zero_gaps(self, tmp_path):
        cfg = tmp_path / "cv.cfg"
        cfg.write_text(
            "[scenario]\nn = 2\nd = 1\nalpha = 0.5\n"
            "x_1 = -0.5\nx_2 = 0.5\nv_1 = 0.5\nv_2 = -0.5\n"
            "[solver]\nt_end = 2.0\n"
            "[converge]\nn_list = 5 50\n",
            encoding="utf-8",
        )
        out = tmp_path / "out"
        assert main(["converge", "--config", str(cfg), "--out", str(out)]) == 0
        rows = (out / "convergence.csv").read_text().splitlines()
        assert rows[0] == "n,sup_dx,sup_dv,reference_gap_x,reference_gap_v"
        assert rows[1] == "5,,,0.0,0.0"
        assert rows[2] == "50,0.0,0.0,0.0,0.0"


class TestDiagnoseCommand:
    def test_critical_pair_report(self, tmp_path):
        cfg = tmp_path / "dg.cfg"
        cfg.write_text(SIM_TEXT, encoding="utf-8")
        out = tmp_path / "out"
        assert main(["diagnose", "--config", str(cfg), "--out", str(out)]) == 0
        report = {}
        for line in (out / "report.txt").read_text().splitlines():
            key, _, value = line.partition(" = ")
            report[key] = value
        assert report["n_events"] == "1"
        assert report["n_sticking"] == "1"
        assert float(report["mean_velocity_drift"]) <= 1e-8
        assert float(report["r_violation"]) <= 1e-8
        assert float(report["ordered_sum_violation"]) <= 1e-8
        assert float(report["velocity_bound_margin"]) >= 0.0
        assert abs(float(report["holder_exponent"]) - 0.5) < 0.1
        assert report["integrability_1"].split() == ["0", "1", report["integrability_1"].split()[2], "Divergent"]
        series = (out / "r_series.csv").read_text().splitlines()
        assert series[0] == "t,r"
        assert series[1] == "0.0,32.0"
        assert len(series) > 10


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_invalid_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[weird]\n", encoding="utf-8")
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "unknown section" in capsys.readouterr().err

    def test_runtime_failure(self, tmp_path, capsys):
        cfg = tmp_path / "hot.cfg"
        cfg.write_text(
            SIM_TEXT.replace("v_1 = 2.0", "v_1 = 2.5")
            .replace("v_2 = -2.0", "v_2 = -2.5")
            .replace("t_end = 0.7", "t_end = 2.0\nmax_segments = 1"),
            encoding="utf-8",
        )
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
        assert "segment" in capsys.readouterr().err
