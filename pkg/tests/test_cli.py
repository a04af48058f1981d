import json

from sparesim.cli import main

FAST = {"optimizer": {"screen_reps": 2, "refine_reps": 3},
        "simulation": {"horizon_years": 2}, "curve": {"reps": 2}}


def dataset(tmp_path, count=8):
    assert main(["synth", "--count", str(count), "--seed", "5", "--out", str(tmp_path / "d")]) == 0
    cfg = tmp_path / "d" / "config.json"
    cfg.write_text(json.dumps({**json.loads(cfg.read_text()), **FAST}))
    return cfg


def test_synth_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--count", "15", "--seed", "9", "--out", str(tmp_path / name)]) == 0
    for f in ("items.csv", "lead_times.csv", "config.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_classify_command(tmp_path, capsys):
    cfg = dataset(tmp_path)
    assert main(["classify", "--config", str(cfg), "--out", str(tmp_path / "o"), "--no-figures"]) == 0
    assert (tmp_path / "o" / "classification.csv").is_file()
    assert "8 items" in capsys.readouterr().out


def test_service_curve_svg(tmp_path):
    cfg = dataset(tmp_path)
    out = tmp_path / "o"
    assert main(["service-curve", "--config", str(cfg), "--out", str(out), "--svg"]) == 0
    svgs = sorted((out / "figures").glob("service_curve_*.svg"))
    pngs = sorted((out / "figures").glob("service_curve_*.png"))
    assert svgs and len(svgs) == len(pngs)
    assert svgs[0].read_text().lstrip().startswith("<?xml")
    manifest = json.loads((out / "manifest.json").read_text())
    assert any(k.endswith(".svg") for k in manifest["files"])


def test_figures_are_byte_stable(tmp_path):
    cfg = dataset(tmp_path)
    for name in ("a", "b"):
        assert main(["service-curve", "--config", str(cfg), "--out", str(tmp_path / name), "--svg"]) == 0
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())["files"]
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())["files"]
    assert a == b


def test_optimize_and_fit_commands(tmp_path):
    cfg = dataset(tmp_path)
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "fits.csv").is_file()
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "policies.csv").is_file()


def test_simulate_command(tmp_path):
    cfg = dataset(tmp_path)
    out = tmp_path / "s"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--item", "SP1",
                 "--rop", "5", "--roq", "10", "--reps", "3", "--trace"]) == 0
    assert (out / "outcomes.csv").read_text().startswith("item_id,rop,roq")
    assert (out / "trace.csv").read_text().startswith("t_month,event")
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--item", "NOPE",
                 "--rop", "1", "--roq", "1"]) == 1


def test_empty_item_file_exit_1(tmp_path, capsys):
    (tmp_path / "items.csv").write_text("")
    (tmp_path / "c.json").write_text(json.dumps({"items": "items.csv"}))
    assert main(["pipeline", "--config", str(tmp_path / "c.json")]) == 1
    assert "parse error" in capsys.readouterr().err


def test_item_failure_exit_2(tmp_path, capsys):
    cfg = dataset(tmp_path)
    items = (tmp_path / "d" / "items.csv").read_text().splitlines()
    header = items[0].split(",")
    row = ["SHORT", "9", "9", "9", "9", "9", "500"] + [""] * (len(header) - 7)
    # two observations only
    years = [i for i, h in enumerate(header) if h.startswith("consumption_y")]
    row[years[0]], row[years[1]] = "30", "40"
    for i, h in enumerate(header):
        if h in ("lead_time_months", "holding", "ordering", "shortage") and i >= 7:
            row[i] = "1"
    (tmp_path / "d" / "items.csv").write_text("\n".join([*items, ",".join(row)]) + "\n")
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "o"), "--no-figures"]) == 2
    assert "SHORT failed at fit: insufficient data" in capsys.readouterr().err


def test_unknown_item_exit_1(tmp_path):
    cfg = dataset(tmp_path)
    assert main(["optimize", "--config", str(cfg), "--item", "ZZZ"]) == 1
