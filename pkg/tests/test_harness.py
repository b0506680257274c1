import json
import math
import os

import pytest

from heatctrl.cli import main, read_grid
from heatctrl.errors import ConfigurationError
from heatctrl.harness import (
    CostReport,
    ExperimentConfig,
    cost_sweep,
    fit_small_time_slope,
    write_cost_csv,
)

BASE = {
    "problem": {"kind": "DD", "X": math.pi},
    "region": [math.pi / 2 - 0.3, math.pi / 2 + 0.3],
    "T_grid": [0.5],
    "modes": 24,
    "family_count": 6,
    "multiplier_eps": 0.05,
    "tol": 1e-8,
    "seed": 42,
}


def _write_cfg(tmp_path, **over):
    doc = dict(BASE)
    doc.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json({"problem": BASE["problem"], "bogus": 1})


def test_config_rejects_bad_T_window():
    doc = dict(BASE)
    doc["T_grid"] = [15.0]  # beyond min(pi, L)^2 = pi^2
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json(doc)
    doc["T_grid"] = [-0.1]
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json(doc)


def test_config_requires_problem():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json({"T_grid": [0.5]})


def test_config_sturm_liouville_problem():
    cfg = ExperimentConfig.from_json({
        "problem": {"kind": "SL",
                    "doc": {"X": math.pi, "p": {"type": "const", "value": 1.0},
                            "q": {"type": "const", "value": 0.0},
                            "bc0": [1, 0], "bc1": [1, 0]}},
        "T_grid": [0.5], "modes": 12})
    basis = cfg.build_basis()
    assert basis.kind == "numeric-SL"
    assert basis.lambdas[0] == pytest.approx(1.0, abs=1e-7)


def test_cost_sweep_row_and_consistency(tmp_path):
    cfg = ExperimentConfig.from_json(json.loads(open(_write_cfg(tmp_path)).read()))
    rows, fit = cost_sweep(cfg)
    assert len(rows) == 1
    r = rows[0]
    assert r.status == "ok"
    assert r.alpha_eff == pytest.approx(r.T * r.cost_log, rel=1e-15)
    assert fit["rows_within_bound"]


def test_cost_sweep_csv_determinism(tmp_path):
    cfg1 = ExperimentConfig.from_json(open(_write_cfg(tmp_path)).read())
    rows1, _ = cost_sweep(cfg1)
    rows2, _ = cost_sweep(cfg1)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_cost_csv(rows1, p1)
    write_cost_csv(rows2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_fit_small_time_slope_policy():
    rows = [CostReport(T=t, L=math.pi, cost_log=12.0 / t + 1.0,
                       alpha_eff=t * (12.0 / t + 1.0), n_modes=8,
                       terminal_residual=1e-9, status="ok")
            for t in (0.1, 0.15, 0.2, 0.5)]
    fit = fit_small_time_slope(rows)
    assert fit["slope"] == pytest.approx(12.0, rel=1e-6)
    assert fit["slope_ok"]
    assert fit["rows_within_bound"]


def test_cli_usage_errors(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad)]) == 2


def test_cli_verify():
    assert main(["verify"]) == 0


def test_cli_cost_sweep_outputs(tmp_path):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["cost-sweep", "--config", cfg, "--out", str(out)]) == 0
    csv = (out / "cost_sweep.csv").read_text().splitlines()
    assert csv[0] == "T,L,cost_log,alpha_eff,n_modes,terminal_residual,status"
    assert len(csv) == 2
    fitdoc = json.loads((out / "cost_fit.json").read_text())
    assert "ln_C" in fitdoc


def test_cli_lower_bound(tmp_path):
    cfg = _write_cfg(tmp_path, modes=128, T_grid=[0.2, 0.1])
    out = tmp_path / "out"
    assert main(["lower-bound", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "lower_bound.json").read_text())
    assert len(doc) == 2
    assert all(v["minus_T_ln_q"] > 0 for v in doc)


def test_cli_fundamental_and_grid_round_trip(tmp_path):
    cfg = _write_cfg(tmp_path, T_grid=[0.4], modes=32)
    out = tmp_path / "out"
    assert main(["fundamental", "--config", cfg, "--out", str(out)]) == 0
    t_axis, s_axis, field = read_grid(str(out / "fundamental.bin"))
    doc = json.loads((out / "fundamental.json").read_text())
    assert field.shape == (len(t_axis), len(s_axis))
    assert doc["terminal"] <= 1e-3 * doc["norm"]


def test_sandwich_geometry_monotone_under_shrinking_region():
    # shrinking the region raises both geometric ends of the sandwich
    from heatctrl.heatsim import ObservationRegion, distance_to_region
    from heatctrl.transmute import longest_avoiding_ray
    X = math.pi
    widths = [0.8, 0.6, 0.4, 0.2]
    lowers, uppers = [], []
    for w in widths:
        reg = ObservationRegion(X / 2 - w / 2, X / 2 + w / 2)
        d = distance_to_region(0.0, reg, X)
        lowers.append(d * d / 4.0)
        uppers.append(longest_avoiding_ray(reg, X) ** 2)
    assert all(a < b for a, b in zip(lowers, lowers[1:]))
    assert all(a < b for a, b in zip(uppers, uppers[1:]))


def test_cli_sandwich_ordering(tmp_path):
    cfg = _write_cfg(tmp_path, modes=128, T_grid=[0.2, 0.5], family_count=10)
    out = tmp_path / "out"
    assert main(["sandwich", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "sandwich.json").read_text())
    assert doc["ordering_ok"]
    assert doc["empirical_lower"] <= doc["empirical_upper"]
