import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from herdlab.spectral import (
    EmpiricalPdf,
    PdfAccumulator,
    PsdAccumulator,
    SpectralDensity,
    default_psd_range,
    empirical_pdf,
    fit_fractured,
    fit_powerlaw,
    fit_psd,
    hill_estimator,
    log_edges,
    psd,
)
from herdlab.trajectory import Trajectory


def powerlaw_samples(rng, lam, n, x_min=1.0):
    return x_min * rng.random(n) ** (-1.0 / (lam - 1.0))


def two_slope_spectrum(rng, beta1=1.4, beta2=0.4, f_break=10.0, noise=0.05):
    f = np.logspace(-2, 3, 400)
    logp = np.where(f < f_break, -beta2 * np.log(f / f_break), -beta1 * np.log(f / f_break))
    return SpectralDensity(f, np.exp(logp + noise * rng.normal(size=f.size)), {})


# -- PSD ---------------------------------------------------------------------


def test_white_noise_is_flat(rng):
    x = rng.normal(size=2**20)
    spec = psd(x, 2**12, dt=1.0)
    central = fit_psd(spec, (spec.freqs[0] * 10**0.2, spec.freqs[0] * 10**2.2))
    assert abs(central.exponent) < 0.05
    assert abs(fit_psd(spec).exponent) < 0.05


def test_sinusoid_peak():
    n, seg, dt = 2**16, 2**10, 0.01
    k = 37
    f0 = k / (seg * dt)
    x = np.sin(2 * np.pi * f0 * np.arange(n) * dt)
    spec = psd(x, seg, dt=dt)
    i = int(np.argmax(spec.power))
    assert spec.freqs[i] == pytest.approx(f0)
    assert spec.power[i] >= 100 * np.median(spec.power)


def test_parseval(rng):
    x = np.cumsum(rng.normal(size=2**18)) * 0.01
    x = x - np.convolve(x, np.ones(501) / 501, mode="same")  # keep it stationary-ish
    x = x[1000:-1000]
    seg = 2**12
    spec = psd(x, seg, dt=0.5)
    df = spec.freqs[1] - spec.freqs[0]
    # the dropped zero bin carries ~nothing after detrending; the last bin is one-sided already
    assert spec.power.sum() * df == pytest.approx(np.var(x), rel=0.03)


@given(st.floats(0.1, 100))
@settings(max_examples=15)
def test_psd_scales_quadratically(a):
    x = np.random.default_rng(0).normal(size=2**12)
    p1 = psd(x, 2**8, dt=0.1).power
    p2 = psd(a * x, 2**8, dt=0.1).power
    assert np.allclose(p2, a * a * p1, rtol=1e-10)


def test_psd_invariants_and_errors(rng):
    spec = psd(Trajectory(0.0, 0.1, rng.normal(size=4096), ("x",), {}), 256)
    assert len(spec.freqs) == len(spec.power)
    assert np.all(np.diff(spec.freqs) > 0) and np.all(spec.power >= 0)
    assert spec.meta["segments"] == 31
    with pytest.raises(ValueError):
        psd(rng.normal(size=100), 64, dt=1.0)
    with pytest.raises(ValueError):
        psd(rng.normal(size=1000), 100, dt=1.0)
    with pytest.raises(ValueError):
        psd(rng.normal(size=1000), 64)
    with pytest.raises(ValueError):
        SpectralDensity(np.array([2.0, 1.0]), np.array([1.0, 1.0]), {})


@given(st.lists(st.integers(1, 3000), min_size=1, max_size=12))
@settings(max_examples=30)
def test_accumulator_matches_batch(cuts):
    x = np.random.default_rng(4).normal(size=6000)
    edges = sorted(set(min(c, len(x)) for c in np.cumsum(cuts)))
    acc = PsdAccumulator(dt=0.2, segment_len=512, overlap=0.5)
    for chunk in np.split(x, edges):
        acc.add(chunk)
    batch = psd(x, 512, dt=0.2)
    res = acc.result()
    assert res.meta["segments"] == batch.meta["segments"]
    assert np.allclose(res.power, batch.power, rtol=1e-10)


def test_log_binning_preserves_slope():
    f = np.linspace(0.01, 100, 100000)
    spec = SpectralDensity(f, f**-1.5, {})
    assert fit_powerlaw(spec.freqs, spec.power).exponent == pytest.approx(1.5)
    assert fit_psd(spec, (0.1, 10)).exponent == pytest.approx(1.5, abs=0.01)
    lo, hi = default_psd_range(f)
    assert lo == pytest.approx(0.01 * 10**0.5) and hi == pytest.approx(100 / 10**0.25)


# -- densities ---------------------------------------------------------------


def test_uniform_density(rng):
    pdf = empirical_pdf(rng.uniform(1, 2, 200_000), bins_per_decade=20)
    inside = (pdf.edges[:-1] >= 1.0) & (pdf.edges[1:] <= 2.0)
    assert np.all(np.abs(pdf.density[inside] - 1.0) < 0.1)
    assert pdf.mass == pytest.approx(1.0)


def test_powerlaw_density_fit(rng):
    x = powerlaw_samples(rng, 3.0, 10**6)
    pdf = empirical_pdf(x, bins_per_decade=10)
    fit = fit_powerlaw(pdf.centers, pdf.density, (pdf.quantile(0.5), pdf.quantile(0.999)))
    assert fit.exponent == pytest.approx(3.0, abs=0.05)
    lam, err = hill_estimator(x, 1.0)
    assert lam == pytest.approx(3.0, abs=0.01) and err > 0


def test_density_shuffle_invariant(rng):
    x = powerlaw_samples(rng, 2.5, 20_000)
    a = empirical_pdf(x)
    b = empirical_pdf(rng.permutation(x))
    assert np.array_equal(a.density, b.density)


def test_density_errors(rng):
    with pytest.raises(ValueError):
        empirical_pdf(np.r_[rng.random(20_000), 0.0])
    with pytest.raises(ValueError):
        empirical_pdf(rng.random(100))
    with pytest.raises(ValueError):
        EmpiricalPdf(np.array([1.0, 2.0]), np.array([-1.0]), np.array([1.0]), {})


def test_pdf_accumulator_merge(rng):
    edges = log_edges(1.0, 1e4, 10)
    x = powerlaw_samples(rng, 3.0, 50_000)
    a, b, whole = PdfAccumulator(edges), PdfAccumulator(edges), PdfAccumulator(edges)
    a.add(x[:20_000])
    b.add(x[20_000:])
    whole.add(x)
    merged = a.merge(b)
    assert np.array_equal(merged.counts, whole.counts)
    assert merged.result().mass == pytest.approx(1.0)
    with pytest.raises(ValueError):
        a.merge(PdfAccumulator(edges[:-1]))


def test_quantile_of_density():
    edges = np.array([1.0, 2.0, 4.0])
    pdf = EmpiricalPdf(edges, np.array([0.5, 0.25]), np.array([1.0, 1.0]), {})
    assert pdf.quantile(0.5) == pytest.approx(2.0)
    # log-spaced bins interpolate geometrically
    assert pdf.quantile(0.75) == pytest.approx(np.sqrt(8.0))


# -- fits --------------------------------------------------------------------


def test_exact_powerlaw_fit():
    x = np.logspace(0, 3, 40)
    fit = fit_powerlaw(x, 7.0 * x**-2.0)
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-10) and fit.r2 == pytest.approx(1.0)
    assert fit.n_points == 40
    with pytest.raises(ValueError):
        fit_powerlaw(x, x**-2.0, (10.0, 5.0))
    with pytest.raises(ValueError):
        fit_powerlaw(x[:4], x[:4] ** -2.0)


def test_fractured_recovers_synthetic(rng):
    fit = fit_fractured(two_slope_spectrum(rng))
    assert fit.beta1 == pytest.approx(1.4, abs=0.05)
    assert fit.beta2 == pytest.approx(0.4, abs=0.05)
    assert 5.0 <= fit.f_break <= 20.0
    assert fit.improvement >= 0.2
    assert fit.fit_range[0] <= fit.f_break <= fit.fit_range[1]
    assert set(json.loads(fit.to_json())) == {"beta1", "beta2", "f_break", "stderr1", "stderr2"}


@given(st.floats(0.2, 1.0), st.floats(1.2, 2.0), st.floats(0.0, 2.0))
@settings(max_examples=25)
def test_fractured_property(b2, b1, logfb):
    spec = two_slope_spectrum(np.random.default_rng(1), b1, b2, 10**logfb, noise=0.02)
    fit = fit_fractured(spec)
    assert fit.beta1 == pytest.approx(b1, abs=0.05)
    assert fit.beta2 == pytest.approx(b2, abs=0.05)
    assert 0.5 <= fit.f_break / 10**logfb <= 2.0


def test_single_slope_gains_little(rng):
    f = np.logspace(-2, 3, 400)
    spec = SpectralDensity(f, f**-1.0 * np.exp(0.05 * rng.normal(size=f.size)), {})
    fit = fit_fractured(spec)
    assert fit.improvement < 0.2
    assert fit.beta1 == pytest.approx(fit.beta2, abs=0.1)


def test_fractured_errors():
    f = np.logspace(0, 1.5, 50)
    with pytest.raises(ValueError):
        fit_fractured(SpectralDensity(f, f**-1.0, {}))
