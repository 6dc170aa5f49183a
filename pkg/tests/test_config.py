import pytest

from porouscity.config import Config, dump_config, parse_config
from porouscity.errors import NonPositiveParameter, TypeMismatch, UnknownKey


def parse_text(text):
    return parse_config(text, is_text=True)


class TestParse:
    def test_empty_file_gives_shipped_defaults(self):
        cfg = parse_text("")
        assert cfg.scenario.u_max == 50.0
        assert cfg.scenario.rho_max == 2000.0
        assert cfg.scenario.kappa_max == 18.0
        assert cfg.physics.nu == 1.25
        assert cfg.physics.mu == 3.6e-8
        assert cfg.physics.tau == 0.009
        assert cfg.time.dt == 5e-4
        assert cfg.time.t_end == 0.5

    def test_override_and_comments(self):
        cfg = parse_text(
            "# relaxation sweep\n"
            "physics.tau = 0.09   # slower drivers\n"
            "\n"
            "scenario.preset = disperse\n"
        )
        assert cfg.physics.tau == 0.09
        assert cfg.scenario.preset == "disperse"
        assert cfg.physics.nu == 1.25  # untouched default

    def test_unknown_key(self):
        with pytest.raises(UnknownKey):
            parse_text("physics.viscoelasticity = 3\n")

    def test_type_mismatch(self):
        with pytest.raises(TypeMismatch):
            parse_text("time.dt = fast\n")
        with pytest.raises(TypeMismatch):
            parse_text("time.snapshot_stride = 2.5\n")
        with pytest.raises(TypeMismatch):
            parse_text("just some words\n")

    def test_non_positive_parameter(self):
        with pytest.raises(NonPositiveParameter):
            parse_text("time.dt = -1\n")
        with pytest.raises(NonPositiveParameter):
            parse_text("physics.tau = 0\n")
        with pytest.raises(NonPositiveParameter):
            parse_text("scenario.u_max = -50\n")

    def test_bool_and_format_validation(self):
        cfg = parse_text("output.figures = false\noutput.format = both\n")
        assert cfg.output.figures is False
        assert cfg.output.format == "both"
        with pytest.raises(TypeMismatch):
            parse_text("output.format = hdf5\n")
        with pytest.raises(TypeMismatch):
            parse_text("output.figures = maybe\n")

    def test_center_requires_both_coordinates(self):
        with pytest.raises(TypeMismatch):
            parse_text("scenario.center_x = 5.0\n")
        cfg = parse_text("scenario.center_x = 5.0\nscenario.center_y = 4.0\n")
        assert cfg.scenario.center == (5.0, 4.0)

    def test_threads_env_override(self, monkeypatch):
        monkeypatch.setenv("TRAFFIC_THREADS", "7")
        assert parse_text("run.threads = 2\n").threads == 7
        monkeypatch.delenv("TRAFFIC_THREADS")
        assert parse_text("run.threads = 2\n").threads == 2


class TestRoundTrip:
    def test_defaults_round_trip(self, monkeypatch):
        monkeypatch.delenv("TRAFFIC_THREADS", raising=False)
        cfg = Config()
        assert parse_text(dump_config(cfg)) == cfg

    def test_overridden_round_trip(self, monkeypatch):
        monkeypatch.delenv("TRAFFIC_THREADS", raising=False)
        cfg = parse_text(
            "physics.tau = 0.09\n"
            "scenario.q0 = 12345.678901234567\n"
            "scenario.eps_center = 0.53\n"
            "time.dt = 0.00025\n"
            "output.format = vtk\n"
        )
        assert parse_text(dump_config(cfg)) == cfg

    def test_file_round_trip(self, tmp_path, monkeypatch):
        monkeypatch.delenv("TRAFFIC_THREADS", raising=False)
        cfg = Config()
        cfg.scenario.kappa_max = 1.8
        p = tmp_path / "run.cfg"
        p.write_text(dump_config(cfg))
        assert parse_config(p) == cfg
