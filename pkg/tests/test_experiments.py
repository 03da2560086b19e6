import math

import numpy as np
import pytest

from fracbound.engine import ClassifyMode, GDConfig, scan_learning_rates
from fracbound.errors import UnsupportedOperationError, UsageError
from fracbound.experiments import (ScanSettings, amplitude_wavelength_sweep, dimension_scan,
                                   fmax_artifact_scan, initial_condition_scan, measure,
                                   roughness_collapse, two_cosine_sweep)
from fracbound.fractal import boxcount_curve, fit_fractal_dimension, default_window
from fracbound.landscape import CRITICAL_ROUGHNESS, Family, LossSpec, RenormMap, renormalize

SMALL = ScanSettings(n_max=10, window=6)


def direct_fit(spec, settings):
    scan = scan_learning_rates(spec, settings.config, settings.s_min, settings.s_max, settings.n_max)
    curve = boxcount_curve(scan)
    return fit_fractal_dimension(curve, default_window(curve, settings.window))


@pytest.mark.parametrize("family", [Family.ADDITIVE, Family.MULTIPLICATIVE])
def test_single_cell_sweep_equals_direct(family):
    sweep = amplitude_wavelength_sweep(family, [0.15], [0.2], SMALL)
    assert sweep.fits.shape == (1, 1)
    assert sweep.fits[0, 0] == direct_fit(LossSpec(family, 0.15, 0.2), SMALL)
    series = roughness_collapse(sweep)
    assert series.points == [(sweep.roughness[0, 0], sweep.alpha[0, 0], sweep.stderr[0, 0])]


def test_sweep_shape_and_roughness():
    eps, lams = [0.01, 0.1, 0.2], [0.1, 0.5]
    sweep = amplitude_wavelength_sweep(Family.ADDITIVE, eps, lams, ScanSettings(n_max=6, window=4))
    assert sweep.alpha.shape == (3, 2)
    np.testing.assert_array_equal(sweep.roughness, np.array(eps)[:, None] / np.array(lams)[None, :] ** 2)
    assert not sweep.failures


def test_sweep_rejects_bad_input():
    with pytest.raises(UsageError):
        amplitude_wavelength_sweep(Family.ADDITIVE, [], [0.1], SMALL)
    with pytest.raises(UsageError):
        amplitude_wavelength_sweep(Family.ADDITIVE_ND, [0.1], [0.1], SMALL)


def test_failed_cell_is_isolated(monkeypatch):
    import fracbound.experiments as ex
    real = ex.measure

    def flaky(spec, settings):
        if spec.lam == 0.5:
            raise MemoryError("no room")
        return real(spec, settings)
    monkeypatch.setattr(ex, "measure", flaky)
    sweep = ex.amplitude_wavelength_sweep(Family.ADDITIVE, [0.1, 0.2], [0.1, 0.5], ScanSettings(n_max=6, window=4))
    assert set(sweep.failures) == {(0, 1), (1, 1)}
    assert np.isnan(sweep.alpha[:, 1]).all() and np.isfinite(sweep.alpha[:, 0]).all()
    assert len(roughness_collapse(sweep).points) == 2


def test_collapse_sorted_and_annotated():
    sweep = amplitude_wavelength_sweep(Family.ADDITIVE, [0.2, 0.01], [0.05, 1.0], ScanSettings(n_max=6, window=4))
    series = roughness_collapse(sweep)
    assert list(series.theta) == sorted(series.theta)
    assert series.critical_theta == CRITICAL_ROUGHNESS
    mul = amplitude_wavelength_sweep(Family.MULTIPLICATIVE, [0.1], [0.1], ScanSettings(n_max=6, window=4))
    assert roughness_collapse(mul).critical_theta is None


def test_collapse_rejects_two_cosine():
    res = two_cosine_sweep([0.0], [0.0], ScanSettings(n_max=4, window=3))
    sweep = amplitude_wavelength_sweep(Family.ADDITIVE, [0.1], [0.1], ScanSettings(n_max=4, window=3))
    sweep.family = Family.TWO_COSINE
    with pytest.raises(UnsupportedOperationError):
        roughness_collapse(sweep)
    assert res.alpha[0, 0] == 0.0


def test_two_cosine_baseline_and_boundary():
    res = two_cosine_sweep([0.0, 0.001, 0.01], [0.0, 0.005], SMALL)
    assert res.alpha[0, 0] == 0.0 and res.stderr[0, 0] == 0.0
    b = dict(res.boundary)
    assert b[0.0] == pytest.approx(0.25 / (2 * math.pi**2), abs=1e-6)
    assert b[0.001] == pytest.approx(0.25 * (1 / (2 * math.pi**2) - 0.001 / 0.09), abs=1e-6)
    assert b[0.01] is None


def test_dimension_scan_basics():
    res = dimension_scan(Family.MULTIPLICATIVE_ND, [1, 3], SMALL)
    assert res.dims.tolist() == [1, 3] and len(res.fits) == 2
    scalar = measure(LossSpec(Family.MULTIPLICATIVE, 0.2, 0.1), SMALL)
    assert res.fits[0].alpha == scalar.alpha
    with pytest.raises(UsageError):
        dimension_scan(Family.ADDITIVE, [1], SMALL)
    with pytest.raises(UsageError):
        dimension_scan(Family.ADDITIVE_ND, [3, 1], SMALL)


def test_initial_condition_scan():
    spec = LossSpec(Family.ADDITIVE, 0.2, 0.1)
    res = initial_condition_scan(spec, [1.0, 1.0, 1.0], SMALL)
    assert res.std == 0.0
    assert res.mean == measure(spec, SMALL).alpha
    res = initial_condition_scan(spec, [0.5, 2.0, -3.0], SMALL)
    assert res.std == pytest.approx(np.std(res.alpha, ddof=1))
    with pytest.raises(UsageError):
        initial_condition_scan(spec, [1.0], SMALL)


def test_artifact_scan_zero_amplitude():
    out = fmax_artifact_scan([1e3, 1e5], [0.0, 1e-3], [0.1, 1.0], SMALL)
    assert [r.f_max for r in out] == [1e3, 1e5]
    for r in out:
        assert np.all(r.alpha[0] == 0.0)
        np.testing.assert_allclose(r.boundary, np.array([0.01, 1.0]) / (2 * math.pi**2 * r.f_max))
        assert r.below_boundary().shape == (2, 2)


def test_artifact_scan_forces_loss_cap(monkeypatch):
    import fracbound.experiments as ex
    seen = []
    monkeypatch.setattr(ex, "measure", lambda spec, s: seen.append((spec, s.config)) or ex.FractalFit(0, 0, (0, 0), 0))
    ex.fmax_artifact_scan([123.0], [0.1], [0.2], SMALL)
    spec, cfg = seen[0]
    assert spec.family == Family.MULTIPLICATIVE
    assert cfg.mode == ClassifyMode.LOSS_CAP and cfg.loss_cap == 123.0


def test_cell_reproducible_in_isolation():
    spec = LossSpec(Family.ADDITIVE, 0.2, 0.1)
    a = scan_learning_rates(spec, n_max=12, with_intensity=True)
    b = scan_learning_rates(spec, n_max=12, with_intensity=True)
    assert a == b


@pytest.mark.parametrize("family,eps,lam", [(Family.ADDITIVE, 0.2, 0.1), (Family.MULTIPLICATIVE, 0.2, 0.1)])
@pytest.mark.parametrize("b", [0.5, 2.0, 10.0])
def test_renormalized_pair_same_dimension(family, eps, lam, b):
    settings = ScanSettings(n_max=14, window=6)
    spec = LossSpec(family, eps, lam)
    new, x0t, zeta = renormalize(spec, [1.0], RenormMap(b))
    cfg = GDConfig(x0=tuple(x0t), sum_threshold=1e16 / zeta)
    a = measure(spec, settings)
    t = measure(new, ScanSettings(cfg, n_max=14, window=6))
    assert abs(a.alpha - t.alpha) <= a.stderr + t.stderr + 1e-12


def test_equal_roughness_cells_agree():
    settings = ScanSettings(n_max=16, window=8)
    a = measure(LossSpec(Family.ADDITIVE, 0.2, 0.1), settings)
    b = measure(LossSpec(Family.ADDITIVE, 0.05, 0.05), settings)
    assert abs(a.alpha - b.alpha) <= a.stderr + b.stderr + 0.05
