import cmath
import math

import numpy as np
import pytest

from heatctrl.logdomain import LogComplex, log_abs_sinc_real, log_sin, log_sinc, wrap_phase


def test_phase_wrap_interval():
    for phi in [0.0, 3.2, -3.2, 10 * math.pi, -10 * math.pi, math.pi, -math.pi]:
        w = wrap_phase(phi)
        assert -math.pi < w <= math.pi
        assert abs(cmath.exp(1j * w) - cmath.exp(1j * phi)) < 1e-12


def test_multiplication_adds_logs_and_wraps():
    rng = np.random.default_rng(1)
    for _ in range(200):
        a = complex(*rng.normal(size=2))
        b = complex(*rng.normal(size=2))
        if a == 0 or b == 0:
            continue
        prod = LogComplex.from_complex(a) * LogComplex.from_complex(b)
        assert prod.logmag == pytest.approx(math.log(abs(a * b)), rel=1e-12)
        assert cmath.phase(a * b) == pytest.approx(
            cmath.phase(prod.to_complex()), abs=1e-12)


def test_zero_absorbs():
    z = LogComplex.zero()
    a = LogComplex.from_complex(3 + 4j)
    assert (z * a).is_zero
    assert (a * z).is_zero
    assert z.to_complex() == 0


def test_division_and_powers():
    a = LogComplex.from_complex(2.0 - 1.0j)
    one = a / a
    assert one.logmag == pytest.approx(0.0, abs=1e-15)
    assert one.phase == pytest.approx(0.0, abs=1e-15)
    cube = a ** 3
    assert cube.to_complex() == pytest.approx((2 - 1j) ** 3, rel=1e-12)


def test_log_sin_matches_cmath_in_safe_range():
    rng = np.random.default_rng(2)
    for _ in range(100):
        w = complex(rng.uniform(-20, 20), rng.uniform(-8, 8))
        if abs(math.sin(w.real)) < 1e-12 and abs(w.imag) < 1e-12:
            continue
        got = log_sin(w)
        want = cmath.log(cmath.sin(w))
        assert got.logmag == pytest.approx(want.real, abs=1e-10)
        assert cmath.exp(1j * got.phase) == pytest.approx(
            cmath.exp(1j * want.imag), abs=1e-10)


def test_log_sin_no_overflow_deep_imaginary():
    v = log_sin(1j * 5000.0)
    # sin(5000 i) = i sinh(5000); ln sinh(5000) = 5000 - ln 2 + tiny
    assert v.logmag == pytest.approx(5000.0 - math.log(2.0), abs=1e-12)
    assert v.phase == pytest.approx(math.pi / 2.0, abs=1e-12)


def test_log_sinc_small_and_large():
    assert log_sinc(0.0).logmag == 0.0
    assert log_sinc(1.0).logmag == pytest.approx(math.log(math.sin(1.0)), abs=1e-14)
    tiny = log_sinc(1e-6)
    assert tiny.logmag == pytest.approx(-(1e-12) / 6.0, rel=1e-6)
    # imaginary axis: sinh(x)/x >= 1
    assert log_sinc(2j).logmag >= 0.0


def test_log_abs_sinc_real_array():
    xs = np.array([0.0, 1e-8, 0.5, math.pi, 7.31])
    vals = log_abs_sinc_real(xs)
    assert vals[0] == 0.0
    assert np.isneginf(vals[3]) or vals[3] < -30  # sin(pi) under roundoff
    assert vals[4] == pytest.approx(math.log(abs(math.sin(7.31) / 7.31)), abs=1e-12)
