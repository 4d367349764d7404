import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from grimlab.novelty import (CountTable, GoalDistribution, count_key, count_weight, goal_distribution,
                             key_code, sample_index, skew_weight, skewed_from_log)
from grimlab.representation import embed, fit_density, fit_pca


def _pool_oracle(image):
    """Per-cell average over each 8x8 block, computed with explicit loops."""
    out = np.zeros((3, 3, 3), dtype=np.int64)
    for i in range(3):
        for j in range(3):
            for c in range(3):
                v = image[8 * i:8 * i + 8, 8 * j:8 * j + 8, c].sum() / 64.0
                out[i, j, c] = min(int(v * 4), 3)
    return out


# -- quantizer -----------------------------------------------------------

@pytest.mark.spec_example
def test_zero_image_key():
    assert np.all(count_key(np.zeros((24, 24, 3))) == 0)


@pytest.mark.spec_example
def test_ones_image_key_is_top_bin():
    assert np.all(count_key(np.ones((24, 24, 3))) == 3)


@pytest.mark.spec_example
def test_white_block_matches_pooling_oracle():
    img = np.zeros((24, 24, 3))
    img[4:12, 10:18] = 1.0
    assert np.array_equal(count_key(img), _pool_oracle(img))


# dyadic pixel values make every pooled sum exact, whatever the summation order
dyadic_images = arrays(np.int64, (24, 24, 3), elements=st.integers(0, 256)).map(lambda a: a / 256.0)


@settings(max_examples=50, deadline=None)
@given(dyadic_images)
def test_key_matches_oracle_on_random_images(img):
    assert np.array_equal(count_key(img), _pool_oracle(img))


@settings(max_examples=50, deadline=None)
@given(dyadic_images, st.randoms(use_true_random=False))
def test_key_invariant_to_permutations_within_cells(img, rnd):
    perm = img.copy()
    for i in range(3):
        for j in range(3):
            block = perm[8 * i:8 * i + 8, 8 * j:8 * j + 8].reshape(64, 3)
            order = list(range(64))
            rnd.shuffle(order)
            perm[8 * i:8 * i + 8, 8 * j:8 * j + 8] = block[order].reshape(8, 8, 3)
    assert np.array_equal(count_key(img), count_key(perm))


def test_key_code_is_injective_on_keys(rng):
    keys = rng.integers(0, 4, size=(200, 3, 3, 3))
    codes = {key_code(k) for k in keys}
    assert len(codes) == len({k.tobytes() for k in keys})


def test_count_table(rng):
    t = CountTable()
    img = rng.random((24, 24, 3))
    assert t.count(img) == 0
    assert t.add(img) == 1 and t.add(img) == 2
    assert t.count(img) == 2 and t.total == 2 and len(t) == 1


# -- weights -------------------------------------------------------------

@pytest.mark.spec_example
def test_count_weight_of_one():
    for a in (-1.0, -0.5, -0.25, 0.0):
        assert count_weight(1, a) == 1.0


@pytest.mark.spec_example
def test_count_weight_arithmetic():
    assert count_weight(4, -0.5) == 0.5


@pytest.mark.spec_example
def test_count_weight_alpha_zero():
    assert np.all(count_weight(np.arange(1, 50), 0.0) == 1.0)


def test_count_weight_rejects_unseen():
    with pytest.raises(ValueError):
        count_weight(0, -1.0)


@pytest.mark.spec_example
def test_skew_inverse_proportional():
    w = skew_weight(np.array([0.2, 0.8]), -1.0)
    assert np.allclose(w / w.sum(), [0.8, 0.2])


@pytest.mark.spec_example
def test_skew_alpha_zero_is_uniform():
    w = skew_weight(np.array([0.01, 0.3, 5.0]), 0.0)
    assert np.allclose(w / w.sum(), 1 / 3)


@pytest.mark.spec_example
def test_skew_three_element_oracle():
    p = np.array([0.5, 0.25, 0.125])
    w = skew_weight(p, -1.0)
    inv = [2.0, 4.0, 8.0]
    assert np.allclose(w / w.sum(), [x / 14.0 for x in inv], atol=1e-15)


def test_skewed_from_log_matches_direct(rng):
    logp = rng.normal(size=10)
    for a in (-1.0, -0.25, 0.0):
        w = np.exp(logp) ** a
        assert np.allclose(skewed_from_log(logp, a), w / w.sum(), atol=1e-14)


def test_skewed_from_log_survives_underflow():
    p = skewed_from_log(np.array([-2000.0, -1000.0]), -1.0)
    assert np.allclose(p, [1.0, 0.0]) and np.isfinite(p).all()


# -- goal distributions --------------------------------------------------

class _Counts(CountTable):
    """Count table that reports fixed counts per image index."""

    def __init__(self, counts):
        super().__init__()
        self._fixed = counts
        self.total = sum(counts)

    def count(self, image):
        return self._fixed[int(image[0, 0, 0])]


def _tagged(n):
    imgs = np.zeros((n, 24, 24, 3))
    imgs[:, 0, 0, 0] = np.arange(n)
    return list(imgs)


@pytest.mark.spec_example
def test_uniform_over_four():
    p = goal_distribution(_tagged(4), "uniform").probs
    assert p.tolist() == [0.25] * 4


@pytest.mark.spec_example
def test_count_based_inverse_counts():
    p = goal_distribution(_tagged(3), "countbased", alpha=-1.0, counts=_Counts([1, 1, 2])).probs
    assert np.allclose(p, [0.4, 0.4, 0.2], atol=1e-15)


@pytest.mark.spec_example
def test_skewfit_matches_two_pass_oracle(rng):
    imgs = list(rng.random((5, 24, 24, 3)))
    pca = fit_pca(np.array(imgs), 3)
    dens = fit_density(np.stack([embed(pca, im) for im in imgs]), 0.5)
    alpha = -0.25
    p = goal_distribution(imgs, "skewfit", alpha=alpha, density=dens, pca=pca).probs
    # two passes: densities first, then normalize density**alpha
    raw = []
    for im in imgs:
        z = embed(pca, im)
        raw.append(np.mean([np.exp(-np.sum((z - s) ** 2) / 0.5) / (2 * np.pi * 0.25) ** 1.5
                            for s in dens.support]))
    w = np.array(raw) ** alpha
    assert np.allclose(p, w / w.sum(), atol=1e-10)


def test_equal_counts_reduce_to_uniform():
    p = goal_distribution(_tagged(5), "countbased", alpha=-1.0, counts=_Counts([3] * 5)).probs
    assert np.allclose(p, 0.2, atol=1e-15)


@settings(max_examples=200)
@given(st.integers(1, 50), st.integers(1, 50), st.floats(-1, 0), st.floats(-1, 0))
def test_skewing_is_monotone(c_lo, c_hi, a1, a2):
    c_lo, c_hi = sorted((c_lo, c_hi))
    lo_a, hi_a = sorted((a1, a2))
    counts = _Counts([c_lo, c_hi])

    def ratio(a):
        p = goal_distribution(_tagged(2), "countbased", alpha=a, counts=counts).probs
        return p[1] / p[0]
    assert ratio(lo_a) <= ratio(hi_a) * (1 + 1e-12)


def test_skewfit_needs_models():
    with pytest.raises(ValueError):
        goal_distribution(_tagged(3), "skewfit")


def test_empty_buffer_is_rejected():
    with pytest.raises(ValueError):
        goal_distribution([], "uniform")


def test_goal_distribution_validation():
    with pytest.raises(ValueError):
        GoalDistribution(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        GoalDistribution(np.array([1.5, -0.5]))
    assert GoalDistribution.from_weights([1, 3]).probs.tolist() == [0.25, 0.75]


# -- sampling ------------------------------------------------------------

@pytest.mark.spec_example
def test_point_mass_always_drawn(rng):
    d = GoalDistribution(np.array([0.0, 0.0, 1.0, 0.0]))
    assert {sample_index(d, rng) for _ in range(1000)} == {2}


@pytest.mark.spec_example
def test_uniform_two_frequencies():
    rng = np.random.default_rng(0)
    d = GoalDistribution.uniform(2)
    draws = np.array([sample_index(d, rng) for _ in range(100_000)])
    assert 0.49 <= (draws == 0).mean() <= 0.51


@pytest.mark.spec_example
def test_zero_probability_never_drawn():
    rng = np.random.default_rng(1)
    d = GoalDistribution(np.array([0.3, 0.0, 0.7, 0.0]))
    draws = {sample_index(d, rng) for _ in range(100_000)}
    assert draws <= {0, 2}


def test_sample_index_uses_one_uniform():
    a, b = np.random.default_rng(5), np.random.default_rng(5)
    sample_index(GoalDistribution.uniform(7), a)
    b.random()
    assert a.random() == b.random()
