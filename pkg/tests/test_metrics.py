import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import j1

from cyltomo.metrics import MetricsError, ReconReport, delta_v, spectrum_cross_section, write_sweep_csv
from cyltomo.recon import truth_fields
from cyltomo.scene import GridSpec, ScalarField, preset

G = GridSpec()
R = 56.0


def _rand(rng):
    return ScalarField(G, rng.standard_normal((128, 128)) + 1j * rng.standard_normal((128, 128)))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32),
       st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_delta_v_scale_aware(seed, a):
    v = _rand(np.random.default_rng(seed))
    assert delta_v(v * a, v * a, R) == 0.0
    assert delta_v(v * 0.0, v * a, R) == pytest.approx(1.0, rel=1e-14)
    assert delta_v(v * (2 * a), v * a, R) == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_delta_v_triangle_bound(seed):
    rng = np.random.default_rng(seed)
    u, v, w = _rand(rng), _rand(rng), _rand(rng)
    m = G.disc_mask(R)

    def nrm(a):
        return np.linalg.norm(a.values[m])

    assert delta_v(u, v, R) <= (nrm(u - w) + nrm(w - v)) / nrm(v) + 1e-12
    assert delta_v(u, v, R) >= 0


def test_delta_v_ignores_outside_region():
    rng = np.random.default_rng(3)
    v = _rand(rng)
    junk = v.values.copy()
    junk[~G.disc_mask(R)] += 1e6
    assert delta_v(ScalarField(G, junk), v, R) == 0.0


def test_delta_v_errors_and_nan():
    v = _rand(np.random.default_rng(0))
    with pytest.raises(MetricsError):
        delta_v(v, v * 0.0, R)
    with pytest.raises(MetricsError):
        delta_v(ScalarField(GridSpec(2.0), np.zeros((64, 64))), v, R)
    bad = v.values.copy()
    bad[64, 64] = np.nan
    assert math.isnan(delta_v(ScalarField(G, bad), v, R))


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.integers(-60, 60), st.integers(-60, 60))
def test_spectrum_translation_invariant(seed, sx, sy):
    v = _rand(np.random.default_rng(seed))
    moved = ScalarField(G, np.roll(v.values, (sy, sx), axis=(0, 1)))
    kx, a = spectrum_cross_section(v)
    _, b = spectrum_cross_section(moved)
    assert np.max(np.abs(a - b)) <= 1e-12
    assert a.max() == 1.0 and np.all(np.diff(kx) > 0)


def test_spectrum_zero_field():
    with pytest.raises(MetricsError):
        spectrum_cross_section(ScalarField(G, np.zeros((128, 128))))


@pytest.mark.parametrize("name", ["fig2", "fig4"])
def test_spectrum_matches_disc_transform_at_low_k(name):
    # the area-weighted raster samples the disc smoothed by a unit pixel box:
    # its DFT row is the disc transform 2 J1(kR)/(kR) times the box sinc,
    # summed over the periodic images k + 2 pi n (images in k_y vanish since
    # the sinc is zero at nonzero integers). Center is on a sample, so all
    # images carry the same phase.
    raw, _ = truth_fields(preset(name))
    kx, sp = spectrum_cross_section(raw)
    radius = preset(name).cylinder.radius
    sel = (kx > 0) & (kx < 1.0)
    k = kx[sel][:, None] + 2 * np.pi * np.arange(-40, 41)[None, :]
    ref = np.abs(np.sum(2 * j1(np.abs(k) * radius) / (np.abs(k) * radius) * np.sinc(k / (2 * np.pi)), axis=1))
    # spectra are normalized to 1, so an absolute bound avoids trouble at
    # zeros; the slack covers the 16 x 16 subsample estimate of cell coverage
    np.testing.assert_allclose(sp[sel], ref, rtol=0, atol=3e-3)


def test_spectrum_width_at_2k0():
    k2 = 2 * preset("fig2").medium.k0
    vals = {}
    for name in ("fig2", "fig4"):
        raw, _ = truth_fields(preset(name))
        kx, sp = spectrum_cross_section(raw)
        vals[name] = sp[np.isclose(np.abs(kx), k2)]
        assert len(vals[name]) == 2
    assert np.all(vals["fig2"] > 0.1)
    assert np.all(vals["fig4"] < 0.05)


def test_report_serialization(tmp_path):
    rep = ReconReport("fig2", "novikov", 0.5, 0.1, 8.6, -0.9375 * math.pi, 0.0, constants={"c_rec": -2j})
    p = tmp_path / "r.json"
    rep.save(p)
    doc = json.loads(p.read_text())
    assert doc["delta_psi_abs_over_pi"] == pytest.approx(0.9375)
    assert doc["constants"]["c_rec"] == [0.0, -2.0]
    rep.save(tmp_path / "s.json")
    assert (tmp_path / "s.json").read_bytes() == p.read_bytes()
    write_sweep_csv(tmp_path / "sweep.csv", [rep, rep])
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("scene,engine,alpha")
