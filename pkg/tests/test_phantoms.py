import json
import math

import numpy as np
import pytest

from cmrt.phantoms import (
    AnalyticField,
    Bump,
    Phantom,
    SampledField,
    SupportError,
    UnsupportedDerivativeError,
    arc_half_angles,
    disk,
    fd_weights,
    forward_mean,
    forward_sinogram,
    gaussian,
    load_phantom,
    mean_deriv_p,
    mean_deriv_r,
    phantom_deriv,
    poly_bump,
    read_sinogram_csv,
    reference_phantom,
    restriction_fourier,
    restriction_series,
    save_phantom,
    write_sinogram_csv,
)

from oracles import circle_mean_quad, disk_arc_oracle, gaussian_value


# -- phantom definition -------------------------------------------------------

def test_support_checks():
    Phantom((gaussian(0, 1.2, 0.15),))
    with pytest.raises(SupportError):
        Phantom((gaussian(0, 1.0, 0.15),))
    with pytest.raises(SupportError):
        Phantom((disk(0, 1.0, 1.0),))
    Phantom((poly_bump(0, 1.01, 1.0),))


def test_bump_validation():
    with pytest.raises(ValueError):
        Bump("square", 0, 1, 0.1)
    with pytest.raises(ValueError):
        gaussian(0, 1, 0.0)
    with pytest.raises(ValueError):
        poly_bump(0, 2, 1, m=3)


def test_max_derivative():
    assert Phantom((poly_bump(0, 2, 1, m=10),)).max_derivative == 8
    assert Phantom((disk(0, 2, 1),)).max_derivative == 0
    assert Phantom((gaussian(0, 2, 0.2), poly_bump(0, 2, 1, m=6))).max_derivative == 4


def test_json_round_trip(tmp_path):
    ph = Phantom((gaussian(0.3, 1.2, 0.15, 2.0), poly_bump(-0.2, 1.5, 0.4, -1.0, m=12), disk(0, 3, 1)))
    path = tmp_path / "ph.json"
    save_phantom(ph, path)
    assert load_phantom(path) == ph
    doc = json.loads(path.read_text())
    assert doc["components"][0] == {"kind": "gaussian", "center": [0.3, 1.2], "scale": 0.15, "amplitude": 2.0}


def test_malformed_json():
    with pytest.raises(ValueError):
        Phantom.from_dict({"components": [{"kind": "gaussian"}]})
    with pytest.raises(ValueError):
        Phantom.from_dict({"parts": []})


# -- pointwise derivatives ----------------------------------------------------

def test_phantom_deriv_examples():
    s = 0.15
    ph = Phantom((gaussian(0.3, 1.2, s),))
    assert phantom_deriv(Phantom(), 0.1, 0.2, 3) == 0.0
    assert phantom_deriv(ph, 0.3, 1.2, 1) == 0.0
    assert phantom_deriv(ph, 0.3, 1.2, 2) == pytest.approx(-1 / s**2, rel=1e-14)
    assert phantom_deriv(ph, 0.4, 1.1, 0) == pytest.approx(gaussian_value(0.4, 1.1), rel=1e-14)


def test_unsupported_derivatives():
    with pytest.raises(UnsupportedDerivativeError):
        phantom_deriv(Phantom((disk(0, 2, 1),)), 0, 2, 1)
    with pytest.raises(UnsupportedDerivativeError):
        phantom_deriv(Phantom((poly_bump(0, 2, 1, m=6),)), 0, 2, 5)


@pytest.mark.parametrize("bump", [gaussian(0.1, 1.3, 0.15, 1.5), poly_bump(0.1, 1.3, 0.5, -0.8, m=12)])
@pytest.mark.parametrize("d", [0, 1, 3, 6])
def test_derivatives_against_finite_differences(bump, d):
    ph = Phantom((bump,))
    h = 1e-4
    for x, y in [(0.15, 1.25), (-0.1, 1.5), (0.3, 1.1)]:
        fd = (phantom_deriv(ph, x + h, y, d) - phantom_deriv(ph, x - h, y, d)) / (2 * h)
        exact = phantom_deriv(ph, x, y, d + 1)
        assert exact == pytest.approx(fd, rel=1e-5, abs=1e-6 * max(1.0, abs(exact)))
        fdy = (phantom_deriv(ph, x, y + h, d) - phantom_deriv(ph, x, y - h, d)) / (2 * h)
        assert phantom_deriv(ph, x, y, d, dy=True) == pytest.approx(fdy, rel=1e-5, abs=1e-6 * max(1.0, abs(fdy)))


def test_poly_bump_values():
    ph = Phantom((poly_bump(0.0, 2.0, 0.5, 2.0, m=4),))
    assert phantom_deriv(ph, 0.0, 2.0, 0) == 2.0
    assert phantom_deriv(ph, 0.25, 2.0, 0) == pytest.approx(2.0 * 0.75**4)
    assert phantom_deriv(ph, 0.6, 2.0, 0) == 0.0


# -- forward transform --------------------------------------------------------

def test_forward_examples():
    d = Phantom((disk(0, 2, 1),))
    assert forward_mean(d, 10.0, 1.0) == 0.0
    assert forward_mean(d, 0.0, 2.0) == pytest.approx(math.acos(7 / 8) / math.pi, rel=1e-12)
    assert forward_mean(d, 0.0, 2.0) == pytest.approx(0.160857, abs=1e-5)


def test_forward_at_zero_radius(ref_phantom):
    # f(p, 0) is the gaussian tail at 8 sigma, below 1e-12 of the peak
    assert forward_mean(ref_phantom, 0.3, 0.0) == pytest.approx(gaussian_value(0.3, 0.0), rel=1e-12)
    assert abs(forward_mean(ref_phantom, 0.3, 0.0)) <= 1e-12 * ref_phantom.peak
    assert abs(forward_mean(ref_phantom, 0.3, 1e-6)) <= 1e-10 * ref_phantom.peak


def test_disk_matches_arc_oracle():
    rng = np.random.default_rng(5)
    for _ in range(40):
        x0, y0, rho = rng.uniform(-1, 1), rng.uniform(1.2, 2.5), rng.uniform(0.2, 1.0)
        p, r = rng.uniform(-2, 2), rng.uniform(0.1, 4)
        dist = math.hypot(x0 - p, y0)
        if min(abs(dist - r - rho), abs(dist - abs(r - rho))) < 1e-6:
            continue
        got = forward_mean(Phantom((disk(x0, y0, rho),)), p, r)
        assert got == pytest.approx(disk_arc_oracle(p, r, x0, y0, rho), rel=1e-12, abs=1e-15)


def test_arc_geometry_cases():
    _, half = arc_half_angles(np.array([0.0, 0.0, 0.0]), np.array([0.5, 5.0, 2.0]), 0.0, 2.0, 1.0)
    assert half[0] == 0.0 and half[1] == 0.0
    assert 0 < half[2] < np.pi
    _, half = arc_half_angles(0.0, 0.5, 0.0, 0.2, 1.0)
    assert half == np.pi


def test_poly_bump_forward_matches_adaptive_quadrature():
    ph = Phantom((poly_bump(0.2, 1.1, 0.4, 1.3, m=10),))
    f = lambda x, y: float(phantom_deriv(ph, x, y, 0))
    for p, r in [(0.2, 1.0), (0.5, 0.9), (-0.1, 1.3)]:
        assert forward_mean(ph, p, r, 64) == pytest.approx(circle_mean_quad(f, p, r), rel=1e-9, abs=1e-14)


def test_gaussian_forward_matches_adaptive_quadrature(ref_phantom):
    for p, r in [(0.3, 1.2), (0.0, 1.0), (0.6, 1.4)]:
        assert forward_mean(ref_phantom, p, r) == pytest.approx(circle_mean_quad(gaussian_value, p, r), rel=1e-10)


def test_quadrature_refinement(ref_phantom):
    for p, r in [(0.3, 1.2), (0.1, 1.05), (0.5, 1.4)]:
        assert abs(forward_mean(ref_phantom, p, r, 256) - forward_mean(ref_phantom, p, r, 512)) <= 1e-10


def test_odd_mirror_vanishes():
    ph = Phantom((gaussian(0.3, 1.2, 0.15), poly_bump(-0.4, 1.0, 0.5, -0.5))).odd_mirror()
    vals = forward_sinogram(ph, np.linspace(-1, 1.5, 20), np.linspace(0, 2.5, 20))
    assert np.max(np.abs(vals)) <= 1e-10


def test_sinogram_shape(ref_phantom):
    s = forward_sinogram(ref_phantom, np.linspace(0, 1, 7), np.linspace(0, 2, 5))
    assert s.shape == (7, 5)
    assert s[3, 2] == pytest.approx(forward_mean(ref_phantom, 0.5, 1.0))


def test_negative_radius(ref_phantom):
    with pytest.raises(ValueError):
        forward_mean(ref_phantom, 0.0, -1.0)
    with pytest.raises(ValueError):
        forward_mean(ref_phantom, 0.0, 1.0, n_nodes=8)


# -- derivative data ----------------------------------------------------------

def test_mean_deriv_p_examples(ref_phantom, ref_field):
    assert mean_deriv_p(ref_field, 0.2, 1.1, 0) == forward_mean(ref_phantom, 0.2, 1.1)
    assert abs(mean_deriv_p(ref_field, 0.3, 1.1, 1)) <= 1e-15
    h = 1e-3 * 0.15
    for p, r in [(0.2, 1.1), (0.35, 1.25)]:
        fd = (forward_mean(ref_phantom, p + h, r) - 2 * forward_mean(ref_phantom, p, r)
              + forward_mean(ref_phantom, p - h, r)) / h**2
        assert mean_deriv_p(ref_field, p, r, 2) == pytest.approx(fd, rel=1e-5)


def test_mean_deriv_r_examples(ref_phantom, ref_field):
    assert abs(mean_deriv_r(ref_field, 0.3, 0.0)) <= 1e-12
    assert mean_deriv_r(AnalyticField(Phantom()), 0.3, 1.0) == 0.0
    h = 1e-3 * 0.15
    for p, r in [(0.2, 1.1), (0.35, 1.25)]:
        fd = (forward_mean(ref_phantom, p, r + h) - forward_mean(ref_phantom, p, r - h)) / (2 * h)
        assert mean_deriv_r(ref_field, p, r) == pytest.approx(fd, rel=1e-5)


def test_radial_derivatives_of_poly_bump():
    field = AnalyticField(Phantom((poly_bump(0.2, 1.1, 0.4, m=12),)))
    h = 1e-5
    for p, r in [(0.2, 1.0), (0.45, 0.95)]:
        for d in (0, 2, 4):
            fd = (field.derivs_p(p, [r + h], d)[0, d] - field.derivs_p(p, [r - h], d)[0, d]) / (2 * h)
            assert field.derivs_r(p, [r], d)[0, d] == pytest.approx(fd, rel=1e-6)


# -- Fourier restriction ------------------------------------------------------

def test_fourier_examples(ref_phantom):
    assert restriction_fourier(ref_phantom, 5.0, 0.5, 3) == pytest.approx((0.0, 0.0), abs=1e-100)
    for k in range(1, 6):
        assert restriction_fourier(ref_phantom, 0.3, 1.1, k)[1] == pytest.approx(0.0, abs=1e-15)


def test_fourier_series_matches_direct(ref_phantom):
    a, b = restriction_series(ref_phantom, 0.2, 1.15, 8)
    assert a[0] / 2 == pytest.approx(forward_mean(ref_phantom, 0.2, 1.15), rel=1e-12)
    for k in range(1, 9):
        ak, bk = restriction_fourier(ref_phantom, 0.2, 1.15, k)
        assert a[k] == pytest.approx(ak, abs=1e-14)
        assert b[k] == pytest.approx(bk, abs=1e-14)


def test_fourier_completeness_and_parity(ref_phantom):
    p, r = 0.25, 1.15
    a, b = restriction_series(ref_phantom, p, r, 60)
    M = forward_mean(ref_phantom, p, r)
    target = gaussian_value(p, r)
    errs = [abs(M + a[1:K + 1].sum() - target) for K in (5, 15, 30, 60)]
    assert errs[-1] <= 1e-12 and errs[-1] < errs[0]
    parity = abs(M + np.sum((-1.0) ** np.arange(1, 61) * a[1:]))
    assert parity <= 1e-12


# -- sampled data -------------------------------------------------------------

def test_fd_weights():
    x = np.array([-1.0, 0.0, 1.0])
    w = fd_weights(0.0, x, 2)
    assert np.allclose(w, [[0, 1, 0], [-0.5, 0, 0.5], [1, -2, 1]])


def _sampled(ph, n_p=121, n_r=81):
    p = np.linspace(-0.6, 1.2, n_p)
    r = np.linspace(0.0, 1.6, n_r)
    return p, r, forward_sinogram(ph, p, r)


def test_sampled_field_derivatives(ref_phantom, ref_field):
    p, r, v = _sampled(ref_phantom, 241, 161)
    sf = SampledField(p, r, v, max_order=4, accuracy=4)
    exact = ref_field.derivs_p(0.31, [1.07, 1.2], 4)
    got = sf.derivs_p(0.31, [1.07, 1.2], 4)
    assert np.allclose(got[:, :3], exact[:, :3], rtol=2e-3, atol=2e-3 * np.abs(exact[:, :3]).max())
    assert sf.derivs_r(0.31, [1.1], 0)[0, 0] == pytest.approx(ref_field.derivs_r(0.31, [1.1], 0)[0, 0], rel=2e-3)
    assert sf.value(0.3, 1.2) == pytest.approx(ref_field.value(0.3, 1.2), rel=1e-4)


def test_sampled_field_validation(ref_phantom):
    p, r, v = _sampled(ref_phantom, 21, 11)
    with pytest.raises(ValueError):
        SampledField(p, r, v[:, :-1])
    with pytest.raises(ValueError):
        SampledField(np.r_[p[:-1], p[-1] + 1.0], r, v)
    sf = SampledField(p, r, v, max_order=2)
    with pytest.raises(UnsupportedDerivativeError):
        sf.derivs_p(0.3, [1.0], 3)
    with pytest.raises(ValueError):
        sf.derivs_p(5.0, [1.0], 0)
    with pytest.raises(ValueError):
        sf.derivs_p(0.3, [3.0], 0)


def test_smoothing_reduces_noise(ref_phantom):
    p, r, v = _sampled(ref_phantom, 121, 81)
    noisy = v + np.random.default_rng(0).normal(0, 1e-4, v.shape)
    clean = SampledField(p, r, v).derivs_p(0.3, [1.2], 2)[0, 2]
    raw = SampledField(p, r, noisy).derivs_p(0.3, [1.2], 2)[0, 2]
    smooth = SampledField(p, r, noisy, smoothing=1.5).derivs_p(0.3, [1.2], 2)[0, 2]
    assert abs(smooth - clean) < abs(raw - clean)


def test_sinogram_csv_round_trip(tmp_path, ref_phantom):
    p, r, v = _sampled(ref_phantom, 9, 7)
    path = tmp_path / "s.csv"
    write_sinogram_csv(path, p, r, v)
    assert path.read_text().splitlines()[0] == "p,r,mf"
    p2, r2, v2 = read_sinogram_csv(path)
    assert np.array_equal(p, p2) and np.array_equal(r, r2) and np.array_equal(v, v2)
    sf = SampledField.from_csv(path)
    assert np.array_equal(sf.values, v)


def test_sinogram_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        read_sinogram_csv(bad)
    holes = tmp_path / "holes.csv"
    holes.write_text("p,r,mf\n0,0,0\n0,1,0\n1,0,0\n")
    with pytest.raises(ValueError):
        read_sinogram_csv(holes)


def test_reference_phantom():
    ph = reference_phantom()
    (c,) = ph.components
    assert (c.kind, c.x0, c.y0, c.scale, c.amplitude) == ("gaussian", 0.3, 1.2, 0.15, 1.0)
