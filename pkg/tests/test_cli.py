import csv
import json
from pathlib import Path

import pytest

from twolevel import cli

BASE = {
    "family": {"mu": 1, "c1": 1, "c2": 1, "b1": 0.5, "b2": 1, "ell1": 1},
    "r_values": [0.1, 0.05, 0.02, 0.01],
    "engines": ["exact", "limits"],
    "output": "out",
}


def _write(tmp_path: Path, cfg: dict) -> Path:
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return p


def _rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_exact_sweep_ks_decreasing(tmp_path):
    code = cli.main(["run", str(_write(tmp_path, BASE)), "--out-dir", str(tmp_path)])
    assert code == 0
    text = (tmp_path / "out.csv").read_text(encoding="utf-8")
    assert text.splitlines()[0] == ",".join(cli.CSV_HEADER)
    rows = _rows(tmp_path / "out.csv")
    ks = [float(r["ks"]) for r in rows if r["engine"] == "exact"]
    assert len(ks) == 4 and all(a > b for a, b in zip(ks, ks[1:]))
    lim = [r for r in rows if r["engine"] == "limits"][0]
    assert float(lim["A1_hat"]) == pytest.approx(0.5647334016, abs=1e-9)


def test_sim_vs_exact_tv(tmp_path):
    cfg = {**BASE, "r_values": [0.05], "engines": ["exact", "sim"],
           "sim": {"events": 10**7, "seed": 1}}
    assert cli.main(["run", str(_write(tmp_path, cfg)), "--out-dir", str(tmp_path)]) == 0
    sim = [r for r in _rows(tmp_path / "out.csv") if r["engine"] == "sim"][0]
    assert float(sim["tv"]) < 0.01
    hist = json.loads((tmp_path / "out_hist.json").read_text(encoding="utf-8"))
    assert hist[0]["r"] == 0.05


def test_byte_identical_reruns(tmp_path):
    cfg = {**BASE, "r_values": [0.1], "engines": ["exact", "sim", "sde", "limits", "bar"],
           "sim": {"events": 200_000, "reps": 2, "seed": 5}, "sde": {"samples": 2000, "burn_in": 5}}
    p = _write(tmp_path, cfg)
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path / "b")]) == 0
    for name in ("out.csv", "out_bar.csv", "out_sde_cdf.csv", "out_hist.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override_and_engine_flag(tmp_path):
    cfg = {**BASE, "r_values": [0.1], "sim": {"events": 100_000, "seed": 5}}
    p = _write(tmp_path, cfg)
    cli.main(["run", str(p), "--out-dir", str(tmp_path / "a"), "--engines", "sim"])
    cli.main(["run", str(p), "--out-dir", str(tmp_path / "b"), "--engines", "sim", "--seed-override", "6"])
    a, b = _rows(tmp_path / "a" / "out.csv"), _rows(tmp_path / "b" / "out.csv")
    assert [r["engine"] for r in a] == ["sim"]
    assert a[0]["p0_over_r"] != b[0]["p0_over_r"]


def test_verbose_fills_runtime(tmp_path):
    p = _write(tmp_path, {**BASE, "r_values": [0.1], "engines": ["exact"]})
    cli.main(["run", str(p), "--out-dir", str(tmp_path), "--verbose"])
    assert float(_rows(tmp_path / "out.csv")[0]["runtime_s"]) >= 0


@pytest.mark.parametrize("patch, msg", [
    ({"r_values": []}, "r_values"),
    ({"r_values": [0.05, 0.1]}, "decreasing"),
    ({"engines": []}, "engines"),
    ({"engines": ["exact", "magic"]}, "magic"),
    ({"bogus": 1}, "bogus"),
    ({"sim": {"events": 10, "typo": 1}}, "typo"),
    ({"family": {**BASE["family"], "b3": 1}}, "b3"),
])
def test_config_errors_exit_2(tmp_path, capsys, patch, msg):
    p = _write(tmp_path, {**BASE, **patch})
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path)]) == 2
    assert msg in capsys.readouterr().err


def test_json_syntax_error_reports_line(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text('{\n  "family": {,\n}', encoding="utf-8")
    assert cli.main(["run", str(p)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_engine_failure_is_reported_per_row(tmp_path, capsys):
    cfg = {**BASE, "r_values": [0.1], "engines": ["exact", "limits"],
           "family": {**BASE["family"], "arrival_below": {"family": "erlang", "params": {"shape": 2, "rate": 2}},
                      "arrival_above": {"family": "erlang", "params": {"shape": 2, "rate": 2}}}}
    code = cli.main(["run", str(_write(tmp_path, cfg)), "--out-dir", str(tmp_path)])
    assert code == 1
    assert "exact" in capsys.readouterr().err
    assert [r["engine"] for r in _rows(tmp_path / "out.csv")] == ["limits"]
