import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyhjb import riesz
from levyhjb.riesz import GridFn, SigmaField

TWO_PI = 2 * np.pi
THREE_POW_1_8 = 7.22467405584207649  # mpmath, frozen


def periodic(func, n=2048):
    return GridFn.sample(func, 0.0, TWO_PI, n, periodic=True)


def test_grid_basics(tmp_path):
    f = periodic(np.sin, 8)
    assert f.spacing[0] == pytest.approx(TWO_PI / 8)
    assert f.axes[0][-1] < TWO_PI
    b = GridFn.sample(np.sin, -1.0, 1.0, 5)
    assert b.axes[0][-1] == 1.0
    b.to_csv(tmp_path / "f.csv")
    back = GridFn.from_csv(tmp_path / "f.csv")
    assert np.array_equal(back.values, b.values) and back.upper == b.upper
    f.to_csv(tmp_path / "p.csv")
    assert GridFn.from_csv(tmp_path / "p.csv", periodic=True).spacing[0] == pytest.approx(f.spacing[0])
    with pytest.raises(ValueError):
        GridFn(np.array([1.0, np.nan]), 0, 1, False)


def test_sigma_field_ellipticity():
    sig = SigmaField(lambda x: 1.0 + 0.5 * np.sin(x[:, 0]), 0.25, 2.25)
    f = periodic(np.cos, 64)
    assert sig.at(f.points()).min() >= 0.5
    assert sig.lipschitz(f) <= 0.5 + 1e-9
    bad = SigmaField(lambda x: 1.0 + 0.5 * np.sin(x[:, 0]), 0.5, 2.25)
    with pytest.raises(ValueError, match="ellipticity violated at node"):
        riesz.apply_generator_form(f, bad, 1.5)


def test_alpha_range_rejected():
    f = periodic(np.cos, 64)
    for alpha in (1.0, 2.0, 0.5):
        with pytest.raises(ValueError):
            riesz.apply_kernel_form(f, SigmaField.constant(1), alpha)


def test_spectral_reference_examples():
    f = periodic(lambda x: np.cos(3 * x), 256)
    x = f.axes[0]
    r = riesz.spectral_reference(f, 1.0, 1.8, "riesz")
    np.testing.assert_allclose(r.values, THREE_POW_1_8 * np.cos(3 * x), atol=1e-11)
    g = riesz.spectral_reference(f, 1.5, 2.0, "generator")
    np.testing.assert_allclose(g.values, -1.5**2 * 9 * np.cos(3 * x), atol=1e-11)
    c = periodic(lambda x: 0 * x + 4.0, 64)
    assert np.abs(riesz.spectral_reference(c, 1.0, 1.5).values).max() < 1e-12
    with pytest.raises(ValueError):
        riesz.spectral_reference(GridFn.sample(np.cos, 0, 1, 8), 1.0, 1.5)


@pytest.mark.parametrize("form", [riesz.apply_kernel_form, riesz.apply_generator_form])
def test_constants_annihilated(form):
    for f in (periodic(lambda x: 0 * x + 3.7, 512), GridFn.sample(lambda x: 0 * x - 2.0, -3, 3, 101),
              GridFn.sample(lambda x, y: 0 * x + 1.5, (0, 0), (1, 1), (9, 9))):
        assert np.abs(form(f, SigmaField.constant(1.3), 1.5).values).max() < 1e-10


def test_kernel_form_examples():
    f = periodic(np.cos)
    out = riesz.apply_kernel_form(f, SigmaField.constant(1.0), 1.5)
    assert riesz.relative_l2(out.values, np.cos(f.axes[0])) < 1e-3
    f2 = periodic(lambda x: np.cos(2 * x))
    out2 = riesz.apply_kernel_form(f2, SigmaField.constant(1.0), 1.5)
    assert riesz.relative_l2(out2.values, 2.0**1.5 * np.cos(2 * f2.axes[0])) < 0.01


def test_generator_form_examples():
    f = periodic(np.cos)
    for alpha in (1.1, 1.5, 1.9):
        out = riesz.apply_generator_form(f, SigmaField.constant(1.0), alpha)
        assert riesz.relative_l2(out.values, -np.cos(f.axes[0])) < 1e-3
    f2 = periodic(lambda x: np.cos(2 * x))
    out2 = riesz.apply_generator_form(f2, SigmaField.constant(2.0), 1.5)
    assert riesz.relative_l2(out2.values, -8.0 * np.cos(2 * f2.axes[0])) < 0.01


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_symbol_accuracy(alpha, k):
    f = periodic(lambda x: np.cos(k * x) + 0.5 * np.sin((k % 3 + 1) * x))
    sig = SigmaField.constant(1.0)
    ref = riesz.spectral_reference(f, 1.0, alpha, "generator").values
    assert riesz.relative_l2(riesz.apply_generator_form(f, sig, alpha).values, ref) < 0.01
    assert riesz.relative_l2(riesz.apply_kernel_form(f, sig, alpha).values, -ref) < 0.01


def test_sign_relation():
    f = periodic(lambda x: np.exp(np.sin(x)), 1024)
    sig = SigmaField.constant(0.7)
    k = riesz.apply_kernel_form(f, sig, 1.4).values
    g = riesz.apply_generator_form(f, sig, 1.4).values
    assert riesz.relative_l2(k, -g) < 1e-6


def test_laplacian_limit():
    f = periodic(lambda x: np.exp(np.cos(x)))
    x = f.axes[0]
    f2 = np.exp(np.cos(x)) * (np.sin(x) ** 2 - np.cos(x))
    out = riesz.apply_generator_form(f, SigmaField.constant(1.3), 2 - 1e-3)
    assert riesz.relative_l2(out.values, 1.3**2 * f2) < 0.02


def test_grid_convergence():
    errs = []
    for n in (16, 32, 64):
        f = periodic(lambda x: np.cos(4 * x) + np.sin(x), n)
        ref = riesz.spectral_reference(f, 1.0, 1.5).values
        errs.append(riesz.relative_l2(riesz.apply_generator_form(f, SigmaField.constant(1.0), 1.5).values, ref))
    assert errs[0] / errs[1] >= 1.5 and errs[1] / errs[2] >= 1.5


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    f = periodic(lambda x: np.cos(x + rng.uniform()), 256)
    g = periodic(lambda x: np.sin(2 * x) * rng.uniform(), 256)
    sig = SigmaField(lambda x: 1.2 + 0.3 * np.cos(x[:, 0]), 0.8, 2.3)
    for form in (riesz.apply_kernel_form, riesz.apply_generator_form):
        lhs = form(f.with_values(a * f.values + b * g.values), sig, 1.6).values
        rhs = a * form(f, sig, 1.6).values + b * form(g, sig, 1.6).values
        assert np.abs(lhs - rhs).max() < 1e-9 * (1 + np.abs(rhs).max())


def test_variable_sigma_scales_rows():
    f = periodic(np.cos, 512)
    x = f.axes[0]
    sig = SigmaField(lambda p: 1.0 + 0.5 * np.cos(p[:, 0]), 0.25, 2.25)
    out = riesz.apply_generator_form(f, sig, 1.5).values
    expected = -(1.0 + 0.5 * np.cos(x)) ** 1.5 * np.cos(x)
    assert riesz.relative_l2(out, expected) < 1e-3


def test_box_matrix_structure():
    grid = GridFn.sample(np.cos, -2.0, 2.0, 41)
    m = riesz.generator_matrix(grid, SigmaField.constant(0.8), 1.6)
    off = m - np.diag(np.diag(m))
    assert off.min() >= 0.0
    assert np.abs(m.sum(axis=1)).max() < 1e-10
    np.testing.assert_allclose(m @ grid.values, riesz.apply_generator_form(grid, SigmaField.constant(0.8), 1.6).values)
    with pytest.raises(ValueError):
        riesz.generator_matrix(periodic(np.cos, 8), SigmaField.constant(1), 1.5)


def test_box_matches_whole_line_for_decaying_bump():
    alpha = 1.5
    box = GridFn.sample(lambda x: np.exp(-(x**2)), -40, 40, 1601)
    out = riesz.apply_generator_form(box, SigmaField.constant(1.0), alpha).values
    wide = GridFn.sample(lambda x: np.exp(-(x**2)), -40, 40, 8192, periodic=True)
    ref = np.interp(box.axes[0], wide.axes[0], riesz.spectral_reference(wide, 1.0, alpha).values)
    assert riesz.relative_l2(out, ref) < 0.01


@pytest.mark.parametrize("alpha", [1.3, 1.7])
def test_two_dimensional_periodic(alpha):
    f = GridFn.sample(lambda x, y: np.cos(x) * np.cos(2 * y) + np.sin(x + y), (0, 0), (TWO_PI, TWO_PI), (48, 48),
                      periodic=True)
    ref = riesz.spectral_reference(f, 1.2, alpha).values
    out = riesz.apply_generator_form(f, SigmaField.constant(1.2), alpha, dim=2).values
    assert riesz.relative_l2(out, ref) < 0.01
    assert riesz.relative_l2(riesz.apply_kernel_form(f, SigmaField.constant(1.2), alpha).values, -ref) < 0.01


def test_two_dimensional_box_structure():
    grid = GridFn.sample(lambda x, y: np.exp(-x * x - y * y), (-3, -3), (3, 3), (13, 13))
    m = riesz.generator_matrix(grid, SigmaField.constant(1.0), 1.5)
    off = m - np.diag(np.diag(m))
    assert off.min() >= 0.0
    assert np.abs(m.sum(axis=1)).max() < 1e-10
    # radially symmetric input gives a symmetric output
    out = (m @ grid.values.ravel()).reshape(13, 13)
    np.testing.assert_allclose(out, out.T, atol=1e-12)
    np.testing.assert_allclose(out, out[::-1], atol=1e-12)
    assert out[6, 6] < 0  # generator lowers a peak


def test_dim_mismatch():
    with pytest.raises(ValueError):
        riesz.apply_generator_form(periodic(np.cos, 16), SigmaField.constant(1), 1.5, dim=2)
