import numpy as np
import pytest

from ndphotonics.quadrature import QuadratureError, adaptive_quad


def test_polynomial_exact():
    res = adaptive_quad(lambda x: 3 * x**2, 0.0, 2.0)
    assert res.value == pytest.approx(8.0, rel=1e-14)


def test_kink_resolved_with_breakpoint():
    res = adaptive_quad(lambda x: np.abs(x - 0.3), 0.0, 1.0, breakpoints=[0.3], rtol=1e-12)
    assert res.value == pytest.approx(0.5 * (0.3**2 + 0.7**2), rel=1e-12)


def test_sharp_lorentzian_peak():
    w = 1e-4
    res = adaptive_quad(lambda x: w / ((x - 0.5) ** 2 + w**2), 0.0, 1.0, rtol=1e-10)
    exact = 2 * np.arctan(0.5 / w)
    assert res.value == pytest.approx(exact, rel=1e-8)
    assert res.error < 1e-6


def test_complex_integrand():
    res = adaptive_quad(lambda t: np.exp(1j * t), 0.0, np.pi)
    assert res.value == pytest.approx(2j, abs=1e-12)


def test_panel_limit_raises_with_estimate():
    with pytest.raises(QuadratureError) as err:
        adaptive_quad(lambda x: np.sin(1 / x), 1e-9, 1.0, rtol=1e-14, atol=0.0, max_panels=50)
    assert np.isfinite(err.value.error)


def test_empty_interval_rejected():
    with pytest.raises(ValueError):
        adaptive_quad(np.sin, 1.0, 1.0)
