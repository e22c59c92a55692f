"""Coefficient fields: construction, evaluation, spectral bounds."""

import numpy as np
import pytest

from mswave.coeff import (DomainError, FieldSpecError, eval_coeff, make_field,
                          sample_field, verify_spectral_bounds)


def test_periodic_1d_pointwise():
    # a(y) = 1/(2 + sin 2 pi y)
    f = make_field("periodic_1d", eps=0.1, params=[2, 1])
    y = np.array([0.0, 0.25, 0.5, 0.75])
    np.testing.assert_allclose(f.cell_values(y), [0.5, 1 / 3, 0.5, 1.0],
                               rtol=1e-14)


def test_values_pulls_back_to_unit_cell():
    f = make_field("periodic_1d", eps=0.1, params=[2, 1])
    # x = 0.025 sits at cell coordinate 0.25
    np.testing.assert_allclose(f.values(np.array([0.025])), [1 / 3],
                               rtol=1e-14)
    # periodicity in the fast variable
    x = np.array([0.3, 0.4, 0.5])
    np.testing.assert_allclose(f.values(x), f.values(x - 0.2), rtol=1e-13)


def test_spectral_bounds_periodic_1d():
    f = make_field("periodic_1d", eps=0.05, params=[2, 1])
    assert f.alpha == pytest.approx(1 / 3, rel=1e-12)
    assert f.beta == pytest.approx(1.0, rel=1e-12)
    rep = verify_spectral_bounds(f)
    assert rep["ok"]
    assert rep["min_eig"] >= f.alpha - 1e-12
    assert rep["max_eig"] <= f.beta + 1e-12


def test_eval_coeff_returns_matrix():
    f = make_field("periodic_1d", eps=0.1, params=[2, 1])
    a = eval_coeff(f, np.array([0.025]))
    assert a.shape == (1, 1)
    assert a[0, 0] == pytest.approx(1 / 3, rel=1e-12)


def test_laminate_2d_layers():
    f = make_field("laminate_2d", eps=0.25, params=[1, 4])
    y = np.array([[0.25, 0.25], [0.75, 0.25], [0.2, 0.9]])
    np.testing.assert_allclose(f.cell_values(y), [1.0, 4.0, 1.0])
    assert f.dim == 2
    assert f.alpha == pytest.approx(1.0)
    assert f.beta == pytest.approx(4.0)


def test_locally_periodic_separates_slow_and_fast():
    f = make_field("locally_periodic", eps=0.05, params=[2, 1, 0.5])
    # (1 + 0.5 sin 2 pi x)/(2 + sin 2 pi y) at x = 0.25, y = 0.25
    v = f.cell_values(np.array([0.25]), np.array([0.25]))
    np.testing.assert_allclose(v, [1.5 / 3], rtol=1e-13)
    assert f.alpha == pytest.approx(0.5 / 3, rel=1e-12)
    assert f.beta == pytest.approx(1.5, rel=1e-12)


def test_piecewise_constant_sample_1d():
    f = make_field("piecewise_constant_sample", eps=0.1,
                   params=[4, 1.0, 2.0, 3.0, 4.0])
    y = np.array([0.1, 0.3, 0.6, 0.9])
    np.testing.assert_allclose(f.cell_values(y), [1.0, 2.0, 3.0, 4.0])


def test_sample_field_roundtrip():
    vals = np.array([0.5, 1.5, 2.5])
    f = sample_field(vals, eps=0.5)
    np.testing.assert_allclose(
        f.cell_values(np.array([1 / 6, 0.5, 5 / 6])), vals)
    assert f.alpha == pytest.approx(0.5)
    assert f.beta == pytest.approx(2.5)


def test_scaled_field():
    f = make_field("periodic_1d", eps=0.1, params=[2, 1])
    g = f.scaled(2.0)
    y = np.array([0.0, 0.25, 0.6])
    np.testing.assert_allclose(g.cell_values(y), 2 * f.cell_values(y),
                               rtol=1e-13)
    assert g.alpha == pytest.approx(2 * f.alpha)
    with pytest.raises(FieldSpecError):
        f.scaled(-1.0)


def test_domain_check():
    f = make_field("periodic_1d", eps=0.1, params=[2, 1], domain=(0.0, 1.0))
    f.values(np.array([0.0, 1.0]))  # endpoints are fine
    with pytest.raises(DomainError):
        f.values(np.array([1.5]))


def test_constant_field():
    f = make_field("constant", eps=0.1, params=[0.7])
    np.testing.assert_allclose(f.values(np.array([0.1, 0.9])), [0.7, 0.7])
    assert f.alpha == f.beta == pytest.approx(0.7)


def test_bad_specs_rejected():
    with pytest.raises(FieldSpecError):
        make_field("no_such_kind")
    with pytest.raises(FieldSpecError):
        make_field("periodic_1d", params=[1, 1])  # not uniformly elliptic
    with pytest.raises(FieldSpecError):
        make_field("locally_periodic", params=[2, 1, 1.0])
    with pytest.raises(FieldSpecError):
        make_field("laminate_2d", params=[1, -4])
    with pytest.raises(FieldSpecError):
        make_field("piecewise_constant_sample", params=[3, 1.0, 2.0])
