import json
import math
from pathlib import Path

import numpy as np
import pytest

from oscillnet.experiment import (
    ConfigError,
    ExperimentConfig,
    RunError,
    compare_runs,
    export_plot_data,
    load_config,
    load_manifest,
    parse_config_text,
    reanalyse,
    run_experiment,
    run_sweep,
)
from oscillnet.phase import PhaseIntegrationError

ROOT = Path(__file__).resolve().parents[1]
SHORT = dict(T=100.0, stats_t_min=50.0, stride=50)


def short_config(**kw):
    kw = {**SHORT, **kw}
    kw.setdefault("oracle_T", min(20.0, kw["T"]))
    return ExperimentConfig(**kw)


@pytest.fixture(scope="module")
def short_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "a"
    return run_experiment(short_config(), out)


class TestConfig:
    def test_defaults_are_reference_setting(self):
        c = ExperimentConfig()
        assert (c.omega, c.d, c.m, c.variant) == (0.0, 1.0, 3, "direct")
        assert np.all(c.initial_state().to_vector() == 0)
        assert (c.dt, c.T, c.stride) == (1e-3, 1000.0, 100)
        assert (c.slope_min, c.r2_min, c.tail_fraction) == (0.01, 0.99, 0.5)

    def test_shipped_config_matches_defaults(self):
        c = load_config(ROOT / "experiments" / "table1.cfg")
        assert c == ExperimentConfig(re_up=(0, 0, 0), im_up=(0, 0, 0), re_dn=(0, 0, 0),
                                     im_dn=(0, 0, 0))

    def test_parse(self):
        d = parse_config_text("# c\nomega = 1.5  # inline\nre_up = 0.1 0.2\n\nvariant=unitary\n")
        assert d == {"omega": "1.5", "re_up": "0.1 0.2", "variant": "unitary"}

    def test_overrides_take_precedence(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("d = 2\nm = 2\n")
        c = load_config(p, {"d": 0.5, "T": None})
        assert c.d == 0.5 and c.m == 2 and c.T == 1000.0

    @pytest.mark.parametrize("text", ["colour = red\n", "omega 1\n", "d = 1\nd = 2\n",
                                      "m = 2.5\n", "omega = x\n", "m = 0\n", "dt = 0\n",
                                      "T = 0.0005\n", "variant = both\n", "re_up = 1 2\n",
                                      "stride = 0\n", "tail_fraction = 1.5\n",
                                      "omega = nan\n", "oracle_T = 2000\n",
                                      "stats_t_min = 1000\n", "fit_window = 5 1\n"])
    def test_rejects(self, tmp_path, text):
        p = tmp_path / "c.cfg"
        p.write_text(text)
        with pytest.raises(ConfigError):
            load_config(p)

    def test_dict_round_trip(self):
        c = short_config(re_up=(0.1, 0.2, 0.3), fit_window=(1.0, 30.0))
        assert ExperimentConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


class TestRun:
    def test_outputs_and_manifest(self, short_run):
        run_dir = Path(short_run.run_dir)
        names = {"trajectory.csv", "oracle.csv", "phase_differences.csv", "log_time.csv",
                 "phase_stats.csv", "divergence.csv", "summary.txt"}
        assert set(short_run.files) == names
        assert (run_dir / "manifest.json").exists()
        assert short_run.verify() == []
        m = load_manifest(run_dir)
        assert m.files == short_run.files and m.config["T"] == 100.0
        assert m.finished >= m.started

    def test_summary_declares_logarithmic_modes(self, short_run):
        text = (Path(short_run.run_dir) / "summary.txt").read_text()
        assert "mode 1u: logarithmic divergence" in text
        assert "mode 1d: logarithmic divergence" in text
        assert "mode 3u: bounded" in text

    def test_phase_difference_columns(self, short_run):
        header = (Path(short_run.run_dir) / "phase_differences.csv").read_text().splitlines()[0]
        assert header == ("t,a:Re_d1d-Re_d1u,b:Re_d2d-Re_d1u,c:Re_d2u-Re_d1d,"
                          "d:Re_d2d-Re_d2u,e:Re_d3d-Re_d2u,f:Re_d3u-Re_d3d")

    def test_digest_detects_tampering(self, tmp_path):
        m = run_experiment(short_config(T=5.0, stats_t_min=1.0), tmp_path / "r")
        p = Path(m.run_dir) / "summary.txt"
        p.write_text(p.read_text() + "x")
        assert m.verify() == ["summary.txt"]

    def test_reanalysis_reproduces_classification(self, short_run):
        from oscillnet.experiment import read_divergence

        assert reanalyse(short_run.run_dir) == read_divergence(short_run.run_dir)

    def test_deterministic_files(self, short_run, tmp_path):
        again = run_experiment(short_config(), tmp_path / "b")
        assert again.files == short_run.files

    def test_failure_cleans_up(self, tmp_path):
        out = tmp_path / "fail"
        with pytest.raises(PhaseIntegrationError):
            run_experiment(short_config(d=0.0), out)
        assert not out.exists()

    def test_failure_keeps_existing_directory_but_removes_files(self, tmp_path):
        out = tmp_path / "existing"
        out.mkdir()
        (out / "keep.txt").write_text("x")
        with pytest.raises(PhaseIntegrationError):
            run_experiment(short_config(d=0.0), out)
        assert sorted(p.name for p in out.iterdir()) == ["keep.txt"]

    @pytest.mark.xfail(strict=True, raises=PhaseIntegrationError,
                       reason="with all-zero initial phases and d = 0, psi_1u passes through "
                       "zero at t = sqrt(3) - 1 and the phase is undefined there")
    def test_zero_coupling_summary_all_bounded(self, tmp_path):
        m = run_experiment(short_config(d=0.0), tmp_path / "z")
        text = (Path(m.run_dir) / "summary.txt").read_text()
        assert text.count(": bounded") == 6

    def test_zero_coupling_generic_phases(self, tmp_path):
        rng = np.random.default_rng(1)
        init = {k: tuple(rng.uniform(-0.3, 0.3, 3)) for k in ("re_up", "im_up", "re_dn", "im_dn")}
        m = run_experiment(short_config(d=0.0, **init), tmp_path / "z")
        text = (Path(m.run_dir) / "summary.txt").read_text()
        assert "mode 3u: bounded" in text and "mode 3d: bounded" in text
        assert "mode 1u: logarithmic divergence" in text

    @pytest.mark.xfail(strict=True, raises=PhaseIntegrationError,
                       reason="for omega = d and all-zero phases psi_3d(t) = cos(sqrt(2) t), "
                       "which vanishes at t = pi / (2 sqrt 2)")
    def test_nonzero_frequency_from_zero_phases_completes(self, tmp_path):
        run_experiment(short_config(omega=1.0), tmp_path / "w")

    def test_nonzero_frequency_singularity_time(self, tmp_path):
        with pytest.raises(PhaseIntegrationError) as info:
            run_experiment(short_config(omega=1.0), tmp_path / "w")
        assert info.value.time == pytest.approx(math.pi / (2 * math.sqrt(2)), abs=2e-3)

    def test_nonzero_frequency_generic_phases_completes(self, tmp_path):
        rng = np.random.default_rng(1)
        init = {k: tuple(rng.uniform(-0.3, 0.3, 3)) for k in ("re_up", "im_up", "re_dn", "im_dn")}
        m = run_experiment(short_config(omega=1.0, **init), tmp_path / "w")
        text = (Path(m.run_dir) / "summary.txt").read_text()
        assert text.count("mode ") == 6


class TestExport:
    def test_f4(self, short_run, tmp_path):
        paths = export_plot_data(short_run.run_dir, "f4", tmp_path / "f4")
        assert [p.name for p in paths] == [f"f4{k}.tsv" for k in "abcdef"]
        first = paths[0].read_text().splitlines()
        assert first[0] == "# t\tRe_d1d-Re_d1u"
        assert all(len(line.split("\t")) == 2 for line in first[1:])

    def test_f5(self, short_run, tmp_path):
        paths = export_plot_data(short_run.run_dir, "f5", tmp_path / "f5")
        assert len(paths) == 6

    def test_f6_log_time(self, short_run, tmp_path):
        paths = export_plot_data(short_run.run_dir, "f6", tmp_path / "f6")
        assert [p.name for p in paths] == ["f6a.tsv", "f6b.tsv"]
        data = np.loadtxt(paths[0])
        assert data[0, 0] == pytest.approx(math.log(0.05))
        assert np.all(data[:, 1] >= 0)

    def test_default_destination(self, tmp_path):
        m = run_experiment(short_config(T=5.0, stats_t_min=1.0), tmp_path / "r")
        paths = export_plot_data(m.run_dir, "f6")
        assert all(p.parent == Path(m.run_dir) / "plots" for p in paths)

    def test_empty_trajectory(self, tmp_path):
        m = run_experiment(short_config(T=5.0, stats_t_min=1.0), tmp_path / "r")
        traj = Path(m.run_dir) / "trajectory.csv"
        kept = [ln for ln in traj.read_text().splitlines(True) if ln.startswith("#")]
        header = traj.read_text().splitlines(True)[len(kept)]
        traj.write_text("".join(kept) + header)
        with pytest.raises(RunError):
            export_plot_data(m.run_dir, "f4", tmp_path / "out")
        assert not (tmp_path / "out").exists()

    def test_missing_series_for_small_m(self, tmp_path):
        m = run_experiment(short_config(m=1, T=5.0, stats_t_min=1.0), tmp_path / "r")
        with pytest.raises(RunError):
            export_plot_data(m.run_dir, "f4", tmp_path / "out")
        assert not (tmp_path / "out").exists()

    def test_incomplete_run(self, tmp_path):
        with pytest.raises(RunError):
            export_plot_data(tmp_path, "f4")

    def test_bad_figure(self, short_run):
        with pytest.raises(ValueError):
            export_plot_data(short_run.run_dir, "f7")


class TestCompare:
    def test_same_config_zero_deviation(self, short_run, tmp_path):
        b = run_experiment(short_config(), tmp_path / "b")
        rep = compare_runs(short_run.run_dir, b.run_dir)
        assert rep.overall == 0.0 and rep.classification_diffs == {}

    def test_zero_frequency_direct_vs_unitary(self, short_run, tmp_path):
        b = run_experiment(short_config(variant="unitary"), tmp_path / "u")
        assert compare_runs(short_run.run_dir, b.run_dir).overall < 1e-12

    def test_coupling_change_reports_classification_diff(self, tmp_path):
        rng = np.random.default_rng(1)
        init = {k: tuple(rng.uniform(-0.3, 0.3, 3)) for k in ("re_up", "im_up", "re_dn", "im_dn")}
        a = run_experiment(short_config(d=1.0, **init), tmp_path / "d1")
        b = run_experiment(short_config(d=0.0, **init), tmp_path / "d0")
        rep = compare_runs(a.run_dir, b.run_dir)
        assert rep.classification_diffs
        assert rep.classification_diffs["2u"][0] == "bounded"
        assert rep.overall > 0.1

    def test_different_m_rejected(self, short_run, tmp_path):
        b = run_experiment(short_config(m=2), tmp_path / "m2")
        with pytest.raises(ConfigError):
            compare_runs(short_run.run_dir, b.run_dir)


def test_sweep_in_config_order(tmp_path):
    cfgs = [short_config(T=5.0, stats_t_min=1.0, d=d) for d in (1.0, 0.5, 2.0)]
    out = run_sweep(cfgs, tmp_path, workers=2)
    assert [m.config["d"] for m in out] == [1.0, 0.5, 2.0]
    serial = run_sweep(cfgs, tmp_path / "serial", workers=1)
    assert [m.files for m in out] == [m.files for m in serial]
