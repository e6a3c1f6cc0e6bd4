import csv
import io
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from fakepath import FakePathDesign, PathSet, exact_fim, sigma_from_snr
from fakepath.errors import ValidationError
from fakepath.experiments import (
    STREAM_PILOTS,
    SweepRow,
    bounds_table,
    derive_seed,
    design_context,
    emit,
    format_value,
    multiset_table,
    realize,
    render,
    run_figure,
    run_sweep,
)
from fakepath.fisher import localization_fim, position_crlb
from fakepath.scenario import load_scenario


@pytest.fixture(scope="module")
def spec():
    return load_scenario(None)


@pytest.fixture(scope="module")
def rows(spec):
    return run_sweep(spec)


def test_seed_streams_are_distinct():
    seeds = {derive_seed(0, s, *c) for s, c in [(0, ()), (1, ()), (2, (0,)), (2, (1,))]}
    assert len(seeds) == 4
    assert derive_seed(5, STREAM_PILOTS) == derive_seed(5, STREAM_PILOTS)
    assert derive_seed(5, STREAM_PILOTS) != derive_seed(6, STREAM_PILOTS)


def test_sweep_rows_ordered_and_finite(spec, rows):
    assert [r.snr_db for r in rows] == sorted(spec.sweep.snr_db)
    for r in rows:
        assert r.seed == spec.sweep.seed
        for name in ("crlb_bob_loc_m", "crlb_eve_fpi_loc_m", "crlb_eve_leaked_loc_m", "crlb_eve_gauss_loc_m"):
            assert math.isfinite(getattr(r, name)) and getattr(r, name) > 0


def test_parallel_sweep_matches_serial(spec, rows):
    par = run_sweep(replace(spec, sweep=replace(spec.sweep, workers=4)))
    assert render(par) == render(rows)


def test_sweep_values_reproducible_from_modules(spec, rows):
    real = realize(spec)
    ctx = design_context(real, spec.design, spec.alias_angles)
    for r in rows:
        sigma2 = sigma_from_snr(real.true_paths, ctx.bob_pilots, r.snr_db, real.cfg)
        assert sigma2 == r.sigma2_lin
        bob = position_crlb(localization_fim(exact_fim(real.true_paths, ctx.bob_pilots, sigma2, real.cfg), ctx.pi_bob))
        eve = position_crlb(localization_fim(exact_fim(ctx.eve_paths, real.pilots, sigma2, real.cfg), ctx.pi_eve))
        assert bob == r.crlb_bob_loc_m and eve == r.crlb_eve_fpi_loc_m


def test_fairness_same_noise_and_pilots(spec, rows):
    # Bob's CRLB scales exactly with noise: one pilot set and one sigma per row
    ratio = [r.crlb_bob_loc_m**2 / r.sigma2_lin for r in rows]
    assert np.allclose(ratio, ratio[0], rtol=1e-9)
    ratio_eve = [r.crlb_eve_fpi_loc_m**2 / r.sigma2_lin for r in rows]
    assert np.allclose(ratio_eve, ratio_eve[0], rtol=1e-9)


def test_bounds_table_shape(spec):
    t = bounds_table(spec)
    assert [r["mu"] for r in t.rows] == list(spec.sweep.mu)
    xi = [r["xi_over_g_mix"] for r in t.rows]
    assert all(b < a for a, b in zip(xi, xi[1:]))
    for r in t.rows:
        assert r["psi_over_g_mix"] <= r["xi_over_g_mix"]


def test_heatmap_and_projections(spec):
    t = run_figure(spec, "delta_heatmap")
    n = len(spec.sweep.delta_fractions)
    assert len(t.rows) == n * n
    assert all(r["crlb_eve_fpi_loc_m"] > r["crlb_bob_loc_m"] for r in t.rows)
    for fig in ("toa", "aod", "loc"):
        tt = run_figure(spec, fig)
        assert tt.columns[0] == "snr_db" and len(tt.rows) == len(spec.sweep.snr_db)
    with pytest.raises(ValidationError):
        run_figure(spec, "fig99")


def test_multiset_table(spec):
    t = multiset_table(spec)
    assert len(t.rows) == len(spec.sweep.snr_db)


# ---------------------------------------------------------------- emission


def test_format_value():
    assert format_value(math.inf) == "inf"
    assert format_value(1.0 / 3) == "0.333333333333"
    assert format_value(7) == "7"


def test_empty_rows_give_header_only():
    text = render([])
    lines = text.strip().split("\n")
    assert len(lines) == 1
    assert lines[0].split(",") == [f for f in SweepRow.__dataclass_fields__]
    assert all(c.endswith(("_db", "_lin", "_m", "_s", "_rad", "_mix")) or c == "seed" for c in lines[0].split(","))


def test_csv_round_trip(rows):
    text = render(rows)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert len(parsed) == len(rows)
    for r, p in zip(rows, parsed):
        for k, v in p.items():
            x = getattr(r, k)
            if isinstance(x, float) and math.isfinite(x):
                assert float(v) == pytest.approx(x, rel=5e-12)
            else:
                assert v == format_value(x)


def test_inf_token_in_csv_and_json():
    rows = [{"snr_db": 0.0, "value_mix": math.inf}]
    assert "inf" in render(rows).split("\n")[1]
    data = json.loads(render(rows, "json"))
    assert data[0]["value_mix"] == "inf"


def test_json_mirrors_rows(rows):
    data = json.loads(render(rows, "json"))
    assert len(data) == len(rows)
    assert data[0]["crlb_bob_loc_m"] == pytest.approx(rows[0].crlb_bob_loc_m, rel=1e-11)


def test_emit_to_file_and_error(tmp_path, rows):
    out = tmp_path / "x.csv"
    text = emit(rows, "csv", str(out))
    assert out.read_text() == text
    with pytest.raises(OSError):
        emit(rows, "csv", str(tmp_path / "missing" / "x.csv"))
