import csv
import json
import os

import numpy as np
import pytest

from hlddc import cli
from hlddc.errors import DuplicateFrequency, EmptyFile, InputError, IoError, MalformedRow
from hlddc.lti import RationalTF
from hlddc.synthesis import SynthesisOptions, sample_grid, sample_plant, synthesize_hlddc

DC_ARGS = ["--plant-num", "0.01", "--plant-den", "0.005,0.06,0.1001",
           "--ref-num", "1", "--ref-den", "1,2,1", "--T", "0.9"]


def write(path, text):
    path.write_text(text)
    return path


def test_parse_single_row(tmp_path):
    pd = cli.parse_frequency_csv(write(tmp_path / "f.csv", "omega_rad_s,re,im\n1.0,0.5,-0.1\n"))
    assert pd.omega.tolist() == [1.0]
    assert pd.values[0] == 0.5 - 0.1j


def test_parse_sorts_and_notes(tmp_path):
    pd = cli.parse_frequency_csv(write(tmp_path / "f.csv", "omega_rad_s,re,im\n2,1,0\n1,3,0\n"))
    assert pd.omega.tolist() == [1.0, 2.0]
    assert pd.values.real.tolist() == [3.0, 1.0]
    assert "reordered" in pd.source_note


def test_parse_malformed_row_line_number(tmp_path):
    with pytest.raises(MalformedRow) as exc:
        cli.parse_frequency_csv(write(tmp_path / "f.csv", "omega_rad_s,re,im\n1.0,abc,0\n"))
    assert exc.value.line == 2


@pytest.mark.parametrize("text,err", [
    ("", EmptyFile),
    ("omega_rad_s,re,im\n", EmptyFile),
    ("w,re,im\n1,1,1\n", MalformedRow),
    ("omega_rad_s,re,im\n1,1\n", MalformedRow),
    ("omega_rad_s,re,im\n-1,1,1\n", MalformedRow),
    ("omega_rad_s,re,im\n1,1,1\n1,2,2\n", DuplicateFrequency),
])
def test_parse_errors(tmp_path, text, err):
    with pytest.raises(err):
        cli.parse_frequency_csv(write(tmp_path / "f.csv", text))


def test_controller_round_trip_bit_identical(tmp_path):
    P = RationalTF([0.01], [0.005, 0.06, 0.1001])
    M = RationalTF([1], [1, 2, 1])
    res = synthesize_hlddc(P, M, SynthesisOptions(T=0.9, stabilize=True, reduce_to=2))
    cli.emit_controller(res, tmp_path)
    back = cli.load_controller(tmp_path / "controller.json")
    assert np.array_equal(back.num, res.tf.num) and np.array_equal(back.den, res.tf.den)
    assert back.dt == 0.9


def test_emitted_files(tmp_path):
    code = cli.main(["synth", "--example", "dc_motor", "--out", str(tmp_path)])
    assert code == 0
    ctrl = json.loads((tmp_path / "controller.json").read_text())
    assert ctrl["schema_version"] == 1 and ctrl["order"] == 2 and ctrl["stable"] and ctrl["T"] == 0.9
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["schema_version"] == 1
    assert report["hybrid_loop_verdict"]["stable"]
    assert [s["stage"] for s in report["stage_log"]] == ["loewner", "projection", "reduction"]
    assert len(report["singular_values"]) > 0
    with open(tmp_path / "freqresp.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "omega_rad_s" and len(rows) - 1 == 50
    # 17 significant digits
    assert len(rows[1][1].replace("-", "").replace(".", "").split("e")[0]) <= 17
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]


def test_freqdata_then_synth_matches_in_process(tmp_path):
    assert cli.main(["freqdata", *DC_ARGS, "--out", str(tmp_path)]) == 0
    csv_path = tmp_path / "plant_freq.csv"
    out = tmp_path / "run"
    code = cli.main(["synth", "--plant-data", str(csv_path), "--ref-num", "1", "--ref-den", "1,2,1",
                     "--T", "0.9", "--stabilize", "--reduce-to", "2", "--out", str(out)])
    assert code == 0
    ctrl = json.loads((out / "controller.json").read_text())
    P = RationalTF([0.01], [0.005, 0.06, 0.1001])
    opts = SynthesisOptions(T=0.9, stabilize=True, reduce_to=2)
    ref = synthesize_hlddc(sample_plant(P, sample_grid(opts)), RationalTF([1], [1, 2, 1]), opts)
    np.testing.assert_allclose(ctrl["num"], ref.tf.num, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(ctrl["den"], ref.tf.den, rtol=1e-12, atol=1e-12)


def test_missing_reference_exits_1(tmp_path, capsys):
    code = cli.main(["synth", "--plant-num", "1", "--plant-den", "1,1", "--T", "0.5", "--out", str(tmp_path)])
    assert code == 1
    assert "usage" in capsys.readouterr().err


def test_bad_flag_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["synth", "--grid", "cubic"])
    assert exc.value.code == 1


def test_missing_T_exits_1(tmp_path):
    assert cli.main(["synth", "--plant-num", "1", "--plant-den", "1,1", "--ref-num", "1",
                     "--ref-den", "1,1", "--out", str(tmp_path)]) == 1


def test_data_file_replaces_example_plant(tmp_path):
    csv_path = write(tmp_path / "f.csv", "omega_rad_s,re,im\n1,1,0\n2,1,0\n")
    args = cli.build_parser().parse_args(["synth", "--example", "dc_motor", "--plant-data", str(csv_path),
                                          "--out", str(tmp_path)])
    cfg = cli.build_config(args)
    assert cfg.plant_tf is None and cfg.plant_data is not None


def test_run_config_needs_exactly_one_plant(tmp_path):
    opts = SynthesisOptions(T=0.9)
    with pytest.raises(InputError):
        cli.RunConfig("synth", opts, None, tmp_path)
    with pytest.raises(InputError):
        cli.RunConfig("synth", opts, None, tmp_path, plant_tf=RationalTF([1], [1, 1]),
                      plant_data=tmp_path / "f.csv")


@pytest.mark.skipif(hasattr(os, "geteuid") and os.geteuid() == 0, reason="root ignores permissions")
def test_read_only_dir(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    try:
        with pytest.raises(IoError):
            cli._write_json(ro / "x.json", {})
    finally:
        ro.chmod(0o700)


def test_unwritable_target_is_io_error(tmp_path):
    blocker = write(tmp_path / "file", "")
    with pytest.raises(IoError):
        cli._write_json(blocker / "x.json", {})
    assert cli.main(["freqdata", *DC_ARGS, "--out", str(blocker)]) == 1


def test_lddc_and_tustin_commands(tmp_path):
    assert cli.main(["lddc", "--example", "dc_motor", "--out", str(tmp_path / "c")]) == 0
    k = json.loads((tmp_path / "c" / "controller.json").read_text())
    assert k["T"] is None
    np.testing.assert_allclose(k["num"], [0.5, 6, 10.01], rtol=1e-6)
    assert cli.main(["tustin", "--example", "dc_motor", "--out", str(tmp_path / "t")]) == 0
    kt = json.loads((tmp_path / "t" / "controller.json").read_text())
    np.testing.assert_allclose(kt["den"], [1, -1.0526315789, 0.0526315789], rtol=1e-6)


def test_check_and_simulate(tmp_path):
    assert cli.main(["synth", "--example", "dc_motor", "--out", str(tmp_path)]) == 0
    ctrl = str(tmp_path / "controller.json")
    assert cli.main(["check", "--example", "dc_motor", "--controller", ctrl, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "verdict.json").read_text())["stable"]
    assert cli.main(["simulate", "--example", "dc_motor", "--controller", ctrl, "--out", str(tmp_path)]) == 0
    with open(tmp_path / "step.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["time_s", "r", "eps", "u", "y", "y_ref", "e"]


def test_check_unstable_exits_2(tmp_path):
    bad = tmp_path / "k.json"
    bad.write_text(json.dumps({"schema_version": 1, "T": 0.9, "num": [-50.0], "den": [1.0]}))
    code = cli.main(["check", "--example", "dc_motor", "--controller", str(bad), "--out", str(tmp_path)])
    assert code == 2


def test_numerical_failure_exits_3(tmp_path):
    # static plant 1 with static controller -1: 1 + D_K D_P = 0
    bad = tmp_path / "k.json"
    bad.write_text(json.dumps({"schema_version": 1, "T": 0.5, "num": [-1.0], "den": [1.0]}))
    code = cli.main(["check", "--plant-num", "1", "--plant-den", "1", "--controller", str(bad),
                     "--T", "0.5", "--out", str(tmp_path)])
    assert code == 3


def test_compare_dc_motor(tmp_path):
    assert cli.main(["compare", "--example", "dc_motor", "--out", str(tmp_path)]) == 0
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert m["hlddc"]["metrics"]["overshoot_pct"] < m["tustin"]["metrics"]["overshoot_pct"]
    with open(tmp_path / "step_compare.csv") as fh:
        assert next(csv.reader(fh)) == ["time_s", "y_ref", "y_hlddc", "y_tustin"]
    for name in ("controller.json", "report.json", "freqresp.csv", "tustin_controller.json"):
        assert (tmp_path / name).exists()


def test_compare_flexible_barely_noticeable(tmp_path):
    assert cli.main(["compare", "--example", "flexible_transmission", "--out", str(tmp_path)]) == 0
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert m["linf_difference"] < 0.05


def test_config_file_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"reduce_to": 3}))
    args = cli.build_parser().parse_args(["synth", "--example", "dc_motor", "--config", str(cfg),
                                          "--n-samples", "40", "--out", str(tmp_path)])
    rc = cli.build_config(args)
    assert rc.options.reduce_to == 3 and rc.options.n_samples == 40 and rc.options.T == 0.9


def test_factored_transfer_function():
    tf = cli._tf({"gain": 2.0, "num_factors": [[1, 1]], "den_factors": [[1, 2], [1, 3]]})
    np.testing.assert_allclose(tf.num, [2, 2])
    np.testing.assert_allclose(tf.den, [1, 5, 6])
