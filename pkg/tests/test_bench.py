import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from lrpr import bench
from lrpr.bench import (
    CSV_HEADER,
    GridResult,
    PhaseGridSpec,
    Pipeline,
    classification_accuracy,
    emit_heatmap_svg,
    fit_transition_curve,
    run_init_accuracy,
    run_noise_sweep,
    run_phase_transition,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        PhaseGridSpec([64], [8], 0)
    with pytest.raises(ValueError):
        PhaseGridSpec([0], [8], 1)
    s = PhaseGridSpec([64], [8], 1, pipeline="DataAnchor")
    assert s.pipeline is Pipeline.DATA_ANCHOR and s.effective_lambda == bench.DATA_ANCHOR_LAMBDA


def test_far_above_transition():
    res = run_phase_transition(PhaseGridSpec([512], [8], 20))
    assert res.success_rate[0, 0] >= 0.95


def test_far_below_transition():
    res = run_phase_transition(PhaseGridSpec([64], [64], 20, max_iter=500))
    assert res.success_rate[0, 0] <= 0.05


def test_grid_csv_deterministic_and_integral():
    spec = PhaseGridSpec([24, 96], [4], 3, max_iter=2000)
    a = run_phase_transition(spec)
    b = run_phase_transition(spec)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == ",".join(CSV_HEADER)
    assert np.all(a.success_rate * a.trials == a.successes)
    assert np.all((0 <= a.success_rate) & (a.success_rate <= 1))
    back = GridResult.from_csv(a.to_csv())
    assert np.array_equal(back.successes, a.successes)
    # timing column is filled only on request
    assert a.to_csv(include_timing=True) != a.to_csv()


def test_workers_match_serial():
    spec = PhaseGridSpec([48], [4, 6], 2, max_iter=2000)
    assert run_phase_transition(spec, workers=2).to_csv() == run_phase_transition(spec).to_csv()


def test_seed_collision_detected(monkeypatch):
    from lrpr.rng import RngSpec

    monkeypatch.setattr(bench, "trial_spec", lambda *a, **k: RngSpec(0, 1))
    with pytest.raises(RuntimeError, match="seed collision"):
        run_phase_transition(PhaseGridSpec([16], [2], 2, max_iter=10))


def _planted(c=7.3, alpha=5.0):
    Ms = tuple(int(10**e) for e in np.linspace(6, 12, 7))
    ds = tuple(int(v) for v in np.unique(np.logspace(0, 6, 400).astype(int)))
    rates = np.array([[1.0 if d <= c * M / math.log(M) ** alpha else 0.0 for M in Ms] for d in ds])
    return GridResult(Ms, ds, 1, rates.astype(int), np.zeros_like(rates))


def test_fit_recovers_planted_curve():
    res = _planted()
    c, alpha = fit_transition_curve(res)
    assert abs(alpha - 5.0) <= 1.0
    assert classification_accuracy(res, c, alpha) >= 0.99


def test_fit_requires_crossing():
    res = GridResult((64, 128), (4, 8), 5, np.full((2, 2), 5), np.zeros((2, 2)))
    with pytest.raises(ValueError, match="grid does not straddle transition"):
        fit_transition_curve(res)


def test_svg_cells(tmp_path):
    white = GridResult((64,), (8,), 4, np.array([[4]]), np.zeros((1, 1)))
    p = emit_heatmap_svg(white, tmp_path / "w.svg")
    rects = [r for r in ET.parse(p).getroot().iter("{http://www.w3.org/2000/svg}rect")]
    assert rects[-1].get("fill") == "rgb(255,255,255)"
    black = GridResult((64,), (8,), 4, np.array([[0]]), np.zeros((1, 1)))
    p = emit_heatmap_svg(black, tmp_path / "b.svg")
    rects = [r for r in ET.parse(p).getroot().iter("{http://www.w3.org/2000/svg}rect")]
    assert rects[-1].get("fill") == "rgb(0,0,0)"


def test_svg_with_curve_parses(tmp_path):
    res = _planted()
    small = GridResult(res.M_values, res.d_values[::40], 1, res.successes[::40],
                       res.median_error[::40])
    p = emit_heatmap_svg(small, tmp_path / "g.svg", fit_transition_curve(res))
    root = ET.parse(p).getroot()
    assert len(list(root.iter("{http://www.w3.org/2000/svg}polyline"))) == 1
    texts = [t.text for t in root.iter("{http://www.w3.org/2000/svg}text")]
    assert "M (measurements)" in texts


def test_init_accuracy_trends():
    rows = run_init_accuracy(16, [16, 256, 1024], 5, 0)
    assert rows[0]["median_delta"] >= 1.2
    assert rows[2]["median_delta"] <= rows[1]["median_delta"]
    assert rows == run_init_accuracy(16, [16, 256, 1024], 5, 0)


def test_noise_sweep_small():
    rows = run_noise_sweep(8, 160, [0.0, 0.01, 0.02], 3, 1)
    assert rows[0]["median_relerr"] <= 1e-4
    assert all(r["feasible_fraction"] == 1.0 and np.isfinite(r["median_relerr"]) for r in rows)
    assert rows[2]["mean_abs_xi"] == pytest.approx(2 * rows[1]["mean_abs_xi"])
