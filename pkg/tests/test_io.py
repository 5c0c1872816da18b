"""Config parsing, checkpoints, history files, and diagnostics sinks."""
import json

import numpy as np
import pytest

from dirac_split import (ConfigError, DiagnosticsWriter, FormatError, Mesh,
                         OdeOptions, SchemeParams, SpinorField, parse_config,
                         read_field, read_history, run, serialize_config,
                         write_field, write_history, zero_field)

MINIMAL = json.dumps({
    "params": {"m": 0, "alpha": 0, "beta": 0},
    "tau": 0.5, "T": 1,
    "profile": {"kind": "homogeneous", "u": [1, 0], "v": [0, 0]},
})


def random_field(rng, tau=0.25, j_min=-5, j_max=5, step=3):
    n = j_max - j_min + 1
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return SpinorField(Mesh(tau, j_min, j_max), u, v, step)


class TestParseConfig:
    def test_minimal_config_fills_defaults(self):
        spec = parse_config(MINIMAL)
        assert spec.params == SchemeParams(0.0, 0.0, 0.0)
        assert spec.ode == OdeOptions(16, True, True)
        assert spec.outputs.checkpoint_every == 0
        assert spec.profile.kind == "homogeneous"
        assert spec.n_steps == 2

    def test_negative_mass_rejected(self):
        bad = MINIMAL.replace('"m": 0', '"m": -1')
        with pytest.raises(ConfigError, match="nonnegative"):
            parse_config(bad)

    def test_missing_keys_named(self):
        for key in ("tau", "T", "params"):
            obj = json.loads(MINIMAL)
            del obj[key]
            with pytest.raises(ConfigError, match=key):
                parse_config(json.dumps(obj))

    def test_unknown_keys_fatal(self):
        obj = json.loads(MINIMAL)
        obj["taus"] = 0.25
        with pytest.raises(ConfigError, match="taus"):
            parse_config(json.dumps(obj))
        obj = json.loads(MINIMAL)
        obj["profile"]["widht"] = 1.0
        with pytest.raises(ConfigError, match="widht"):
            parse_config(json.dumps(obj))

    def test_round_trip(self):
        obj = json.loads(MINIMAL)
        obj["ode"] = {"substeps_per_tau": 4, "project_norm": False}
        obj["outputs"] = {"checkpoint_every": 5,
                          "diagnostics_path": "d.ndjson"}
        spec = parse_config(json.dumps(obj))
        again = parse_config(serialize_config(spec))
        assert again == spec

    def test_not_json(self):
        with pytest.raises(ConfigError):
            parse_config("tau: 0.5")

    def test_gaussian_profile(self):
        obj = json.loads(MINIMAL)
        obj["profile"] = {"kind": "gaussian_packet", "width": 0.5,
                          "amplitude_u": [0.1, 0.2], "amplitude_v": [0, -0.3]}
        spec = parse_config(json.dumps(obj))
        assert spec.profile.amplitude_u == 0.1 + 0.2j
        assert spec.profile.amplitude_v == -0.3j


class TestFieldCheckpoints:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(211)
        f = random_field(rng)
        path = tmp_path / "f.txt"
        write_field(f, path)
        g = read_field(path)
        assert g.mesh == f.mesh and g.step_index == f.step_index
        assert np.array_equal(g.u, f.u) and np.array_equal(g.v, f.v)

    def test_header_format(self, tmp_path):
        f = zero_field(Mesh(0.5, -1, 1), step_index=7)
        path = tmp_path / "f.txt"
        write_field(f, path)
        first = path.read_text().splitlines()[0]
        assert first == "tau=0.5 jmin=-1 jmax=1 n=7"

    def test_malformed_header_names_line(self, tmp_path):
        path = tmp_path / "f.txt"
        path.write_text("nonsense\n")
        with pytest.raises(FormatError, match="line 1"):
            read_field(path)

    def test_extreme_values_round_trip(self, tmp_path):
        f = SpinorField(Mesh(0.25, 0, 1),
                        [1e-300 + 1e300j, 5e-324], [0.1 + 1 / 3j, -0.0])
        path = tmp_path / "f.txt"
        write_field(f, path)
        g = read_field(path)
        assert np.array_equal(g.u, f.u) and np.array_equal(g.v, f.v)


class TestHistoryFiles:
    def test_single_zero_frame_round_trip(self, tmp_path):
        h = run(zero_field(Mesh(0.5, 0, 1)), SchemeParams(0, 0, 0), 0,
                OdeOptions())
        path = tmp_path / "h.txt"
        write_history(h, path)
        g = read_history(path)
        assert len(g.frames) == 1
        assert np.array_equal(g.frames[0].u, h.frames[0].u)

    def test_ten_frame_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(223)
        f = random_field(rng, step=0)
        h = run(f, SchemeParams(1.0, 1.0, 0.5), 9,
                OdeOptions(substeps_per_tau=2))
        path = tmp_path / "h.txt"
        write_history(h, path)
        g = read_history(path, h.params, h.ode)
        assert len(g.frames) == 10
        for a, b in zip(g.frames, h.frames):
            assert a.mesh == b.mesh and a.step_index == b.step_index
            assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)

    def test_truncated_file_names_frame(self, tmp_path):
        rng = np.random.default_rng(227)
        f = random_field(rng, step=0)
        h = run(f, SchemeParams(0, 0, 0), 2, OdeOptions())
        path = tmp_path / "h.txt"
        write_history(h, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(FormatError, match="frame 2"):
            read_history(path)


class TestDiagnosticsWriter:
    def test_writes_ordered_ndjson(self, tmp_path):
        path = tmp_path / "d.ndjson"
        with DiagnosticsWriter(path) as sink:
            run(zero_field(Mesh(0.5, 0, 1)), SchemeParams(0, 0, 0), 3,
                OdeOptions(), sink=sink)
        records = [json.loads(l) for l in path.read_text().splitlines()]
        assert [r["n"] for r in records] == [0, 1, 2, 3]
        assert set(records[0]) == {"n", "t", "l2", "interaction"}

    def test_rejects_gaps(self, tmp_path):
        with DiagnosticsWriter(tmp_path / "d.ndjson") as sink:
            sink({"n": 0, "t": 0.0, "l2": 0.0, "interaction": 0.0})
            with pytest.raises(FormatError):
                sink({"n": 2, "t": 1.0, "l2": 0.0, "interaction": 0.0})
