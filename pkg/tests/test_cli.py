import json
import subprocess
import sys

import numpy as np
import pytest

from modal_qcrb.cli import (
    REPORT_SCHEMA,
    ReportBundle,
    export_detection_modes_for,
    main,
)
from conftest import OMEGA0, VARIANCE, W0


def read_matrix_csv(path):
    lines = path.read_text().strip().splitlines()
    labels = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    return labels, np.array(rows)


def run_cli(args):
    return main(args)


class TestQfimCommand:
    def test_displaced_beam_diagonal(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(
            [
                "qfim",
                "--family",
                "displaced-beam",
                "--geometry",
                '{"w0": 1.0}',
                "--state",
                '{"kind": "coherent", "nbar": 1.0}',
                "--out",
                str(out),
            ]
        )
        assert code == 0
        labels, matrix = read_matrix_csv(out / "qfim.csv")
        assert labels == ["x0", "y0"]
        assert np.allclose(np.diag(matrix), 4.0, rtol=1e-6)
        assert abs(matrix[0, 1]) < 1e-10
        _, inverse = read_matrix_csv(out / "qfim_inverse.csv")
        assert np.allclose(np.diag(inverse), 0.25, rtol=1e-6)

    def test_pulse_with_fock_probe(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(
            [
                "qfim",
                "--family",
                "gaussian-pulse",
                "--geometry",
                json.dumps({"omega0": OMEGA0, "variance": VARIANCE}),
                "--state",
                '{"kind": "fock", "n": 2}',
                "--out",
                str(out),
            ]
        )
        assert code == 0
        labels, matrix = read_matrix_csv(out / "qfim.csv")
        scale = np.max(np.abs(matrix))
        assert abs(matrix[0, 0]) < 1e-9 * scale  # no phase reference
        assert abs(matrix[0, 2]) < 1e-9 * scale
        assert matrix[1, 1] == pytest.approx(8.0 * VARIANCE, rel=1e-6)

    def test_unknown_family_exit_code(self, tmp_path, capsys):
        code = run_cli(
            [
                "qfim",
                "--family",
                "unknown-thing",
                "--state",
                '{"kind": "coherent", "nbar": 1.0}',
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 2
        err = capsys.readouterr().err
        assert "gaussian-beam" in err and "displaced-beam" in err

    def test_invalid_state_kind(self, tmp_path):
        code = run_cli(
            [
                "qfim",
                "--family",
                "displaced-beam",
                "--geometry",
                '{"w0": 1.0}',
                "--state",
                '{"kind": "cat"}',
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 2

    def test_engine_error_exit_code(self, tmp_path):
        # thermal nbar=8 needs a cutoff beyond the hard cap
        code = run_cli(
            [
                "qfim",
                "--family",
                "displaced-beam",
                "--geometry",
                '{"w0": 1.0}',
                "--state",
                '{"kind": "thermal", "nbar": 8.0}',
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 1

    def test_config_file_with_flag_override(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "family": "displaced-beam",
                    "geometry": {"w0": 1.0},
                    "state": {"kind": "coherent", "nbar": 1.0},
                    "repetitions": 4,
                    "out": str(tmp_path / "from-file"),
                }
            )
        )
        out = tmp_path / "override"
        code = run_cli(["qfim", "--config", str(config), "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["bounds"]["repetitions"] == 4
        assert report["bounds"]["multiparameter"][0] == pytest.approx(
            0.25 / 4.0, rel=1e-6
        )

    def test_report_schema(self, tmp_path):
        jsonschema = pytest.importorskip("jsonschema")
        for family, geometry in (
            ("displaced-beam", {"w0": 1.0}),
            ("gaussian-beam", {"w0": 1.0, "k": 10.0}),
            ("gaussian-beam-carrier", {"w0": 1.0, "k": 10.0}),
            ("gaussian-pulse", {"omega0": OMEGA0, "variance": VARIANCE}),
        ):
            out = tmp_path / family
            code = run_cli(
                [
                    "qfim",
                    "--family",
                    family,
                    "--geometry",
                    json.dumps(geometry),
                    "--state",
                    '{"kind": "coherent", "nbar": 1.0}',
                    "--out",
                    str(out),
                ]
            )
            assert code == 0
            report = json.loads((out / "report.json").read_text())
            jsonschema.validate(report, REPORT_SCHEMA)

    def test_provenance_records_fd_step(self, tmp_path):
        out = tmp_path / "fd"
        code = run_cli(
            [
                "qfim",
                "--family",
                "displaced-beam",
                "--geometry",
                '{"w0": 1.0}',
                "--state",
                '{"kind": "coherent", "nbar": 1.0}',
                "--fd-step",
                "1e-4",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["provenance"]["derivative_method"] == "finite-difference"
        assert report["provenance"]["fd_step"] == pytest.approx(1e-4)
        labels, matrix = read_matrix_csv(out / "qfim.csv")
        assert np.allclose(np.diag(matrix), 4.0, rtol=1e-5)

    def test_bundle_round_trip(self, tmp_path):
        out = tmp_path / "run"
        run_cli(
            [
                "qfim",
                "--family",
                "displaced-beam",
                "--geometry",
                '{"w0": 1.0}',
                "--state",
                '{"kind": "coherent", "nbar": 1.0}',
                "--out",
                str(out),
            ]
        )
        text = (out / "report.json").read_text()
        bundle = ReportBundle.from_json(text)
        assert bundle.to_json() + "\n" == text


class TestAttainabilityCommand:
    def test_beam_pair_table(self, tmp_path):
        out = tmp_path / "att"
        code = run_cli(
            [
                "attainability",
                "--family",
                "gaussian-beam",
                "--geometry",
                '{"w0": 1.0, "k": 10.0}',
                "--state",
                '{"kind": "coherent", "nbar": 1.0}',
                "--out",
                str(out),
            ]
        )
        assert code == 0
        lines = (out / "attainability.csv").read_text().strip().splitlines()
        assert lines[0] == (
            "param_a,param_b,Im_overlap,normalized_Im_overlap,"
            "commutator_expectation,attainable_flag"
        )
        rows = {tuple(l.split(",")[:2]): l.split(",") for l in lines[1:]}
        x0_tilt = rows[("x0", "tilt_x")]
        assert float(x0_tilt[3]) == pytest.approx(1.0, rel=1e-6)
        assert x0_tilt[5] == "false"
        x0_y0 = rows[("x0", "y0")]
        assert x0_y0[5] == "true"

    def test_pulse_all_attainable(self, tmp_path):
        out = tmp_path / "att"
        code = run_cli(
            [
                "attainability",
                "--family",
                "gaussian-pulse",
                "--geometry",
                json.dumps({"omega0": OMEGA0, "variance": VARIANCE}),
                "--state",
                '{"kind": "coherent", "nbar": 1.0}',
                "--out",
                str(out),
            ]
        )
        assert code == 0
        lines = (out / "attainability.csv").read_text().strip().splitlines()[1:]
        assert len(lines) == 3
        assert all(line.endswith("true") for line in lines)


class TestDetectionModesCommand:
    def test_displacement_samples(self, tmp_path, displaced_family):
        out = tmp_path / "modes"
        code = run_cli(
            [
                "detection-modes",
                "--family",
                "displaced-beam",
                "--geometry",
                '{"w0": 1.0}',
                "--state",
                '{"kind": "coherent", "nbar": 1.0}',
                "--out",
                str(out),
            ]
        )
        assert code == 0
        sidecar = json.loads((out / "detection_modes.json").read_text())
        assert sidecar["weights"][0] == pytest.approx(1.0 / W0, rel=1e-9)
        assert sidecar["degenerate"] == [False, False]

        lines = (out / "modes_x0.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header == ["x", "y", "detection_re", "detection_im", "readout_re", "readout_im"]
        # detection mode is i (2x/w0^2) f / w: purely imaginary, odd in x
        first = [float(v) for v in lines[1].split(",")]
        x, y = first[0], first[1]
        f0 = displaced_family.evaluate_mode(0)
        expected = (
            1j * (2.0 * x / W0**2) * f0.samples[0, 0] / sidecar["weights"][0]
        )
        assert first[2] == pytest.approx(expected.real, abs=1e-12)
        assert first[3] == pytest.approx(expected.imag, rel=1e-6)

    def test_degenerate_parameter_export(self, tmp_path, displaced_family):
        # family with a dead parameter: empty samples, zero weight, flag
        from conftest import with_idle_parameter

        padded = with_idle_parameter(displaced_family)
        bundle = export_detection_modes_for(padded, tmp_path / "deg")
        assert bundle.report["degenerate"] == [False, False, True]
        assert bundle.report["weights"][2] == 0.0
        lines = (tmp_path / "deg" / "modes_idle.csv").read_text().strip().splitlines()
        assert len(lines) == 1  # header only

    def test_proportional_modes_documented(self, tmp_path):
        # x0 and tilt_x detection modes are proportional: the second is
        # dropped from the readout basis and its pivot norm recorded
        out = tmp_path / "beam-modes"
        code = run_cli(
            [
                "detection-modes",
                "--family",
                "gaussian-beam",
                "--geometry",
                '{"w0": 1.0, "k": 10.0}',
                "--state",
                '{"kind": "coherent", "nbar": 1.0}',
                "--out",
                str(out),
            ]
        )
        assert code == 0
        sidecar = json.loads((out / "detection_modes.json").read_text())
        dropped = sidecar["readout_basis"]["dependent_on_predecessors"]
        assert "tilt_x" in dropped and "tilt_y" in dropped
        assert sidecar["readout_basis"]["pivot_norms"]["tilt_x"] < 1e-6


class TestDeterminism:
    def test_repeated_runs_byte_identical(self, tmp_path):
        argv = [
            sys.executable,
            "-m",
            "modal_qcrb",
            "qfim",
            "--family",
            "displaced-beam",
            "--geometry",
            '{"w0": 1.0}',
            "--state",
            '{"kind": "coherent", "nbar": 1.0}',
        ]
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run
            result = subprocess.run(
                argv + ["--out", str(out)], capture_output=True, text=True
            )
            assert result.returncode == 0, result.stderr
            outs.append(out)
        for name in ("report.json", "qfim.csv", "qfim_inverse.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


class TestListFamilies:
    def test_prints_registry(self, capsys):
        assert run_cli(["list-families"]) == 0
        listing = json.loads(capsys.readouterr().out)
        assert set(listing) == {
            "displaced-beam",
            "gaussian-beam",
            "gaussian-beam-carrier",
            "gaussian-pulse",
        }
        assert "build" not in listing["gaussian-beam"]
