from fractions import Fraction

import numpy as np
import pytest

from cmrt.exactcoeff import MissingEntryError, build_tables
from cmrt.kernels import (
    DomainError,
    OddPolynomial,
    eval_odd_poly,
    kernel_for,
    shifted_chebyshev,
    write_kernel_csv,
)

from oracles import exact_odd_value


def test_spec_examples():
    assert eval_odd_poly(OddPolynomial(()), 0.7) == 0.0
    assert eval_odd_poly(OddPolynomial((-2.0,)), 1.0) == -2.0
    assert eval_odd_poly(OddPolynomial.from_exact([1, -2, 1]), 1.0) == pytest.approx(0.0, abs=1e-15)
    assert eval_odd_poly(OddPolynomial((1.0, -2.0, 1.0)), 1.0) == 0.0


def test_kernel_for_examples():
    t = build_tables(3)
    assert kernel_for(t, "A", 1, 0).coeffs == (-4.0,)
    assert kernel_for(t, "B", 3, 1).coeffs == (-10.0, 60.0, -60.0)
    z = kernel_for(t, "Z", 1, 1)
    assert z.coeffs == (-2.0, 2.0)
    assert z.exact == (Fraction(-2), Fraction(2))


def test_kernel_for_missing():
    t = build_tables(2)
    with pytest.raises(MissingEntryError):
        kernel_for(t, "A", 3, 0)
    with pytest.raises(MissingEntryError):
        kernel_for(t, "Q", 1, 0)


def test_degree():
    assert OddPolynomial((1.0, 0.0, 2.0)).degree == 5
    assert OddPolynomial((1.0, 2.0, 0.0)).degree == 3
    assert OddPolynomial(()).degree == -1


def test_domain():
    p = OddPolynomial.from_exact([1])
    with pytest.raises(DomainError):
        p(1.1)
    with pytest.raises(DomainError):
        p(np.array([-0.01, 0.5]))
    assert p(1.0 + 1e-13) == 1.0


def test_array_shapes():
    p = OddPolynomial.from_exact([1, 1])
    out = p(np.linspace(0, 1, 12).reshape(3, 4))
    assert out.shape == (3, 4)
    assert isinstance(p(0.3), float)


def test_unknown_method():
    p = OddPolynomial.from_exact([1])
    with pytest.raises(ValueError):
        p(0.5, method="taylor")
    with pytest.raises(ValueError):
        OddPolynomial((1.0,))(0.5, method="clenshaw")


def test_shifted_chebyshev_exact():
    # x^2 = (3 T*_0 + 4 T*_1 + T*_2) / 8
    assert shifted_chebyshev([0, 0, 1]) == (Fraction(3, 8), Fraction(1, 2), Fraction(1, 8))


def _all_kernels(t):
    for k in range(1, t.max_order + 1):
        for i in range(k + 1):
            yield kernel_for(t, "A", k, i)
            yield kernel_for(t, "Z", k, i)
        for i in range(1, k + 1):
            yield kernel_for(t, "B", k, i)


def test_float_matches_exact(tables12):
    exact_t = [Fraction(j, 255) for j in range(256)]
    ts = np.array([float(x) for x in exact_t])
    worst = 0.0
    for poly in _all_kernels(tables12):
        ref = np.array([float(exact_odd_value(poly.exact, x)) for x in exact_t])
        scale = np.max(np.abs(ref))
        worst = max(worst, np.max(np.abs(poly(ts) - ref)) / scale)
        assert poly(0.0) == 0.0
    assert worst <= 1e-13


def test_endpoints_in_float(tables12):
    for k in range(1, 13):
        assert kernel_for(tables12, "A", k, 0)(1.0) == pytest.approx(-4 * k * k, abs=1e-10)
        assert kernel_for(tables12, "B", k, 1)(1.0) == pytest.approx(-2 * (2 * k - 1), abs=1e-10)
        for i in range(1, k + 1):
            assert abs(kernel_for(tables12, "A", k, i)(1.0)) <= 1e-10
        for i in range(2, k + 1):
            assert abs(kernel_for(tables12, "B", k, i)(1.0)) <= 1e-10


def test_horner_agrees_at_low_order():
    t = build_tables(4)
    ts = np.linspace(0, 1, 101)
    for poly in _all_kernels(t):
        assert np.allclose(poly(ts, "horner"), poly(ts), atol=1e-12)


def test_kernel_csv(tmp_path):
    path = tmp_path / "k.csv"
    write_kernel_csv(kernel_for(build_tables(1), "A", 1, 1), path, n_samples=5)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == 6
    t, v = map(float, lines[-1].split(","))
    assert (t, v) == (1.0, 0.0)
