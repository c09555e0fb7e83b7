import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsbounds.potential import (DEFAULT_GRID_POINTS, FormalDelta, GridPotential, NotPointwiseEvaluable,
                                Realization, birman_solomyak_norm, box, delta_approximant,
                                evaluate_potential, from_config, from_function, gaussian_truncated,
                                realization_norm, square)


def test_default_grid_has_two_to_the_ten_intervals():
    p = square()
    assert p.x.size == DEFAULT_GRID_POINTS == 1025
    assert p.span == (-0.5, 0.5)


def test_evaluate_square():
    p = square(0.5, 1.0)
    assert evaluate_potential(p, 0.0, 0.0) == 0.0
    assert evaluate_potential(p, 3.0, 0.0) == 3.0
    assert evaluate_potential(p, 3.0, 0.4) == 0.0


def test_evaluate_interpolates_linearly():
    p = GridPotential([-0.5, 0.0, 0.5], [0.0, 2.0, 0.0])
    assert evaluate_potential(p, 1.0, 0.25) == pytest.approx(1.0)
    np.testing.assert_allclose(evaluate_potential(p, 2.0, [-0.25, 0.1]), [2.0, 3.2])


def test_zero_outside_sampled_span():
    p = box(0.1, 5.0)
    assert evaluate_potential(p, 1.0, 0.3) == 0.0
    assert evaluate_potential(p, 1.0, -0.3) == 0.0


def test_evaluate_rejects_delta_and_outside_cell():
    with pytest.raises(NotPointwiseEvaluable):
        evaluate_potential(FormalDelta(), 1.0, 0.0)
    with pytest.raises(ValueError):
        evaluate_potential(square(), 1.0, 0.6)


@pytest.mark.parametrize("x, v", [
    ([-0.6, 0.0, 0.6], [1, 1, 1]),        # outside the cell
    ([-0.5, 0.1, 0.5], [1, 1, 1]),        # not uniform
    ([0.0, -0.1], [1, 1]),                # not sorted
    ([-0.5, 0.0, 0.5], [1, np.nan, 1]),   # not finite
    ([0.0], [1.0]),                       # too short
])
def test_grid_validation(x, v):
    with pytest.raises(ValueError):
        GridPotential(x, v)


def test_grid_is_immutable():
    p = square()
    with pytest.raises(ValueError):
        p.values[0] = 1.0


def test_birman_solomyak_examples():
    p = square(0.5, 1.0)
    assert birman_solomyak_norm(p, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert birman_solomyak_norm(p, 4.0) == pytest.approx(2.0, abs=1e-12)
    assert birman_solomyak_norm(square(0.5, 0.0), 7.0) == 0.0
    with pytest.raises(NotPointwiseEvaluable):
        birman_solomyak_norm(FormalDelta(), 1.0)


def test_l1_norm_handles_sign_changes():
    # |x| integrated over the interpolant of a line through zero
    p = GridPotential([-0.5, 0.5], [-1.0, 1.0])
    assert p.l1_norm() == pytest.approx(0.5)
    q = GridPotential([-0.5, 0.0, 0.5], [-1.0, 3.0, 0.0])
    # pieces: triangles of area 1/16 and 9/16 plus 3/4
    assert q.l1_norm() == pytest.approx(1 / 16 + 9 / 16 + 0.75)


def test_delta_approximant_has_unit_mass():
    for eps in (1e-2, 1e-3, 1e-4):
        p = delta_approximant(eps)
        assert p.l1_norm() == pytest.approx(1.0, rel=1e-12)
        assert p.span[1] - p.span[0] < 2 * eps


def test_gaussian_is_compactly_supported_and_even():
    p = gaussian_truncated()
    assert p.values[0] == pytest.approx(0.0, abs=1e-15)
    assert p.values[-1] == pytest.approx(0.0, abs=1e-15)
    assert p.is_even()
    assert not gaussian_truncated(0.1, 0.2).is_even()


def test_realization_shape():
    r = Realization([0.1, -0.2, 0.3, 0.0, 1.0])
    assert r.n == 2 and r.n_sites == 5
    np.testing.assert_array_equal(r.positions, [-2, -1, 0, 1, 2])
    with pytest.raises(ValueError):
        Realization([1.0, 2.0])


def test_realization_norm_sums_square_roots():
    p = square(0.5, 1.0)
    assert realization_norm(p, [1.0, 4.0, 0.0]) == pytest.approx((np.sqrt(0.5) + np.sqrt(2.0)) ** 2)
    assert realization_norm(p, [2.0]) == pytest.approx(birman_solomyak_norm(p, 2.0))


def test_from_config():
    assert isinstance(from_config({"type": "delta"}), FormalDelta)
    g = from_config({"type": "grid", "samples": [0.0, 1.0, 1.0, 0.0], "dx": 0.25})
    assert g.span == (-0.375, 0.375)
    assert from_config({"type": "square", "width": 0.5}).l1_norm() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        from_config({"type": "nope"})


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(-50, 50), beta=st.floats(-50, 50), x=st.floats(-0.5, 0.5))
def test_evaluation_is_linear_in_coupling(alpha, beta, x):
    p = gaussian_truncated(0.1, 0.05)
    lhs = evaluate_potential(p, alpha + beta, x)
    rhs = evaluate_potential(p, alpha, x) + evaluate_potential(p, beta, x)
    assert lhs == pytest.approx(rhs, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(-1e3, 1e3), seed=st.integers(0, 2**32 - 1))
def test_norm_is_homogeneous(alpha, seed):
    v = np.random.default_rng(seed).normal(size=33)
    p = from_function(lambda x: np.interp(x, np.linspace(-0.5, 0.5, 33), v), 129)
    assert birman_solomyak_norm(p, alpha) == abs(alpha) * birman_solomyak_norm(p, 1.0)
