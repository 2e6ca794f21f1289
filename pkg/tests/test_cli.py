"""End-to-end command line checks: exit codes, report schemas, artifacts."""

import json

import numpy as np
import pytest

from hypwave import cli
from hypwave.cli import (CSV_SCHEMA, EXIT_BLOWUP, EXIT_CHECK_FAILED,
                         EXIT_CONFIG, EXIT_PASS, SCHEMA, main)


def _cfg(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def test_unknown_config_key_is_config_error(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"bogus": 1})
    rc = main(["check-identities", "--config", cfg, "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG
    assert "unknown config keys" in capsys.readouterr().err


def test_malformed_json_is_config_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    rc = main(["check-identities", "--config", str(p)])
    assert rc == EXIT_CONFIG


def test_bad_thread_count(capsys):
    assert main(["check-identities", "--threads", "0"]) == EXIT_CONFIG


def test_unknown_kind_rejected(tmp_path):
    cfg = _cfg(tmp_path, {"kind": "cubic"})
    rc = main(["simulate", "--config", cfg, "--quick",
               "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


# ---------------------------------------------------------------------------
# check-identities
# ---------------------------------------------------------------------------

def test_check_identities_quick_passes(tmp_path, capsys):
    rc = main(["check-identities", "--quick", "--d", "2",
               "--out", str(tmp_path)])
    assert rc == EXIT_PASS
    report = json.loads((tmp_path / "identities.json").read_text())
    assert report["schema"] == SCHEMA
    assert report["pass"] is True
    assert all(c["pass"] for c in report["checks"])
    assert any("commutator" in c["name"] for c in report["checks"])
    assert any("quadratic form" in c["name"] for c in report["checks"])
    assert any("scaling" in c["name"] for c in report["checks"])
    assert "pass" in capsys.readouterr().out


def test_check_identities_detects_injected_fault(tmp_path, capsys,
                                                 monkeypatch):
    """A broken commutator table must fail loudly and name the culprit."""
    from hypwave import geometry

    real = geometry.commutator_residual

    def broken(a, b, f, p, relative=False):
        if str(a) == "boost(1)" and str(b) == "morawetz":
            return 1.0
        return real(a, b, f, p, relative=relative)

    monkeypatch.setattr(geometry, "commutator_residual", broken)
    rc = main(["check-identities", "--quick", "--d", "2",
               "--out", str(tmp_path)])
    assert rc == EXIT_CHECK_FAILED
    out = capsys.readouterr().out
    assert "FAIL" in out
    report = json.loads((tmp_path / "identities.json").read_text())
    bad = [c for c in report["checks"] if not c["pass"]]
    assert len(bad) == 1
    assert "boost(1)" in bad[0]["name"] and "morawetz" in bad[0]["name"]


# ---------------------------------------------------------------------------
# check-inequalities
# ---------------------------------------------------------------------------

def test_check_inequalities_quick_passes(tmp_path, capsys):
    rc = main(["check-inequalities", "--quick", "--out", str(tmp_path)])
    assert rc == EXIT_PASS
    report = json.loads((tmp_path / "inequalities.json").read_text())
    assert report["pass"] is True
    names = {c["name"] for c in report["checks"]}
    assert len(names) == 4
    for c in report["checks"]:
        assert c["ratio"] <= c["constant"]


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    cfg = out / "cfg.json"
    cfg.write_text(json.dumps({
        "grid": {"R": 10.0, "n": 129}, "cfl": 0.5, "t_end": 8.0,
        "dt_out": 0.25, "kind": "linear",
        "init": {"amplitude": 1.0, "profile": "bump"},
        "taus": [2.5, 3.0, 3.5, 4.0, 4.5, 5.0],
    }))
    rc = main(["simulate", "--config", str(cfg), "--out", str(out)])
    assert rc == EXIT_PASS
    return out


def test_simulate_writes_schema_tagged_csv(sim_dir):
    lines = (sim_dir / "slices.csv").read_text().splitlines()
    assert lines[0] == f"# schema={CSV_SCHEMA}"
    from hypwave.hyperboloid import SLICE_CSV_HEADER
    assert lines[1] == SLICE_CSV_HEADER
    assert len(lines) == 2 + 6
    taus = [float(ln.split(",")[0]) for ln in lines[2:]]
    assert taus == sorted(taus)


def test_simulate_energy_column_monotone(sim_dir):
    """E^2 decreases along increasing tau for dispersing linear data."""
    lines = (sim_dir / "slices.csv").read_text().splitlines()
    header = lines[1].split(",")
    ce = header.index("E2")
    cc = header.index("coverage")
    rows = [ln.split(",") for ln in lines[2:]]
    # only fully covered slices are comparable, and the coarse unit-test
    # grid carries a ~1% discretization drift
    e2 = [float(r[ce]) for r in rows if float(r[cc]) == 1.0]
    assert len(e2) >= 3
    assert all(b <= a * 1.02 for a, b in zip(e2, e2[1:]))
    assert e2[0] > 0.0


def test_simulate_field_dumps_round_trip(sim_dir):
    from hypwave.grid import read_field
    f, header = read_field(sim_dir / "phi_final.fld")
    assert header["kind"] == "phi"
    assert header["t"] == pytest.approx(8.0, abs=0.2)
    assert f.grid.n == 129
    assert np.all(np.isfinite(f.values))
    summary = json.loads((sim_dir / "simulate.json").read_text())
    assert summary["pass"] is True
    assert summary["n_states"] >= 3


def test_simulate_blowup_exit_code(tmp_path, capsys):
    cfg = _cfg(tmp_path, {
        "grid": {"R": 4.0, "n": 65}, "t_end": 20.0, "kind": "wavemap",
        "init": {"amplitude": 60.0}, "taus": [2.5, 3.0]})
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path)])
    assert rc == EXIT_BLOWUP
    assert "BLOWUP" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _write_fit_csv(path, taus, law):
    cols = ["sup_dt_phi", "sup_L_phi", "sup_twist_phi", "sup_phi"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# schema={CSV_SCHEMA}\n")
        fh.write("tau," + ",".join(cols) + "\n")
        for t in taus:
            v = law(t)
            fh.write(f"{t}," + ",".join(f"{v}" for _ in cols) + "\n")


def test_fit_recovers_synthetic_power_law(tmp_path):
    csv_path = tmp_path / "slices.csv"
    _write_fit_csv(csv_path, np.geomspace(2.0, 50.0, 16), lambda t: 2.0 / t)
    rc = main(["fit", "--csv", str(csv_path), "--out", str(tmp_path)])
    assert rc == EXIT_PASS
    report = json.loads((tmp_path / "fits.json").read_text())
    for col, fit in report["fits"].items():
        assert fit["a"] == pytest.approx(-1.0, abs=1e-8)
        assert fit["b"] == pytest.approx(0.0, abs=1e-7)


def test_fit_short_series_fails(tmp_path, capsys):
    csv_path = tmp_path / "slices.csv"
    _write_fit_csv(csv_path, np.linspace(2.0, 4.0, 12), lambda t: 1.0 / t)
    rc = main(["fit", "--csv", str(csv_path), "--out", str(tmp_path)])
    assert rc == EXIT_CHECK_FAILED
    assert "FAIL" in capsys.readouterr().out


def test_fit_requires_csv(tmp_path):
    assert main(["fit", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_fit_unknown_column(tmp_path):
    csv_path = tmp_path / "slices.csv"
    _write_fit_csv(csv_path, np.geomspace(2.0, 50.0, 16), lambda t: 1.0 / t)
    cfg = _cfg(tmp_path, {"csv": str(csv_path), "columns": ["nope"]})
    assert main(["fit", "--config", cfg,
                 "--out", str(tmp_path)]) == EXIT_CONFIG


# ---------------------------------------------------------------------------
# cascade
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_cascade_quick_run(tmp_path, capsys):
    cfg = _cfg(tmp_path, {
        "grid": {"R": 8.0, "n": 65}, "cfl": 0.5, "t_end": 5.0,
        "dt_out": 0.25, "m_max": 1,
        "init": {"amplitude": 0.05, "profile": "gaussian_tail",
                 "support_radius": 2.0},
        "taus": [2.5, 3.0, 3.5, 4.0]})
    rc = main(["cascade", "--config", cfg, "--out", str(tmp_path)])
    assert rc == EXIT_PASS
    report = json.loads((tmp_path / "cascade.json").read_text())
    assert report["pass"] is True
    cmp_ = report["comparison"]
    assert cmp_["relative"] <= cmp_["threshold"]
    assert len(report["stages"]) == 2
    # starting at t = 2 the literal vanishing set {|t|+|x| <= 2^{m-2}} is
    # empty for m <= 3, so it passes with zero sampled points
    for v in report["vanishing_regions"]:
        assert v["pass"] and v["n_points"] == 0
        assert v["inner_cone_n_points"] >= 0
    assert "cascade" in capsys.readouterr().out
