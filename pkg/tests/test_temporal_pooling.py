import math

import numpy as np
import pytest

from temporal_pooling import (
    FrameScoreSeries,
    PoolingMethod,
    PoolingSpec,
    all_methods,
    hysteresis_transform,
    kmeans_1d_two,
    parse_method,
    pool,
    pool_geometric,
    pool_harmonic,
    pool_hysteresis,
    pool_mean,
    pool_median,
    pool_minkowski,
    pool_percentile,
    pool_primacy,
    pool_recency,
    pool_variation,
    pool_vqpooling,
)
from tools.errors import InvalidInputError, InvalidParameterError, PoolingDomainError


# literal loop versions of every pooler, independent of the vectorized code


def oracle_mean(q):
    return sum(q) / len(q)


def oracle_median(q):
    s = sorted(q)
    n = len(s)
    return s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2


def oracle_harmonic(q):
    return len(q) / sum(1.0 / v for v in q)


def oracle_geometric(q):
    return math.exp(sum(math.log(v) for v in q) / len(q))


def oracle_minkowski(q, p):
    return (sum(v ** p for v in q) / len(q)) ** (1.0 / p)


def oracle_percentile(q, k):
    count = max(1, math.ceil(k * len(q) / 100))
    worst = sorted(range(len(q)), key=lambda i: (q[i], i))[:count]
    return sum(q[i] for i in worst) / count


def oracle_kmeans(q):
    c_lo, c_hi = min(q), max(q)
    assign = None
    for _ in range(100):
        new = [abs(v - c_hi) < abs(v - c_lo) for v in q]
        if new == assign:
            break
        assign = new
        lo = [v for v, a in zip(q, assign) if not a]
        hi = [v for v, a in zip(q, assign) if a]
        c_lo, c_hi = sum(lo) / len(lo), sum(hi) / len(hi)
    return assign, c_lo, c_hi


def oracle_vqpooling(q):
    if len(q) == 1 or min(q) == max(q):
        return q[0]
    assign, m_lo, m_hi = oracle_kmeans(q)
    w = (1 - m_lo / m_hi) ** 2
    lo = [v for v, a in zip(q, assign) if not a]
    hi = [v for v, a in zip(q, assign) if a]
    return (sum(lo) + w * sum(hi)) / (len(lo) + w * len(hi))


def oracle_variation(q, k):
    g = [abs(q[i + 1] - q[i]) for i in range(len(q) - 1)]
    count = max(1, math.ceil(k * len(g) / 100))
    return sum(sorted(g, reverse=True)[:count]) / count


def oracle_primacy(q, L, a):
    h = min(L, len(q) - 1)
    w = [math.exp(-a * n) for n in range(h + 1)]
    return sum(w[n] * q[n] for n in range(h + 1)) / sum(w)


def oracle_recency(q, L, a):
    n_frames = len(q)
    h = min(L, n_frames - 1)
    w = [math.exp(-a * (h - n)) for n in range(h + 1)]
    tail = q[n_frames - h - 1:]
    return sum(w[n] * tail[n] for n in range(h + 1)) / sum(w)


def oracle_hysteresis_trace(q, tau, alpha):
    n_frames = len(q)
    memory, current = [], []
    for n in range(n_frames):
        memory.append(q[0] if n == 0 else min(q[max(0, n - tau):n]))
        v = sorted(q[n:n + tau + 1])
        J = len(v)
        w = [math.exp(-0.5 * (j / (J / 3)) ** 2) for j in range(J)]
        current.append(sum(wj * vj for wj, vj in zip(w, v)) / sum(w))
    combined = [alpha * m + (1 - alpha) * l for m, l in zip(current, memory)]
    return memory, current, combined


def oracle_hysteresis(q, tau, alpha):
    return oracle_mean(oracle_hysteresis_trace(q, tau, alpha)[2])


def _random_series(rng, max_len=300):
    n = int(rng.integers(1, max_len + 1))
    scale = rng.uniform(0.5, 5.0)
    return list(rng.uniform(0.1, 1.0, n) * scale)


def _compare_with_oracles(q):
    assert pool_mean(q) == pytest.approx(oracle_mean(q), abs=1e-10)
    assert pool_median(q) == pytest.approx(oracle_median(q), abs=1e-10)
    assert pool_harmonic(q) == pytest.approx(oracle_harmonic(q), abs=1e-10)
    assert pool_geometric(q) == pytest.approx(oracle_geometric(q), abs=1e-10)
    assert pool_minkowski(q, 2) == pytest.approx(oracle_minkowski(q, 2), abs=1e-10)
    assert pool_percentile(q, 10) == pytest.approx(oracle_percentile(q, 10), abs=1e-10)
    assert pool_vqpooling(q) == pytest.approx(oracle_vqpooling(q), abs=1e-10)
    if len(q) >= 2:
        assert pool_variation(q, 10) == pytest.approx(oracle_variation(q, 10), abs=1e-10)
    assert pool_primacy(q, 180, 0.01) == pytest.approx(oracle_primacy(q, 180, 0.01), abs=1e-10)
    assert pool_recency(q, 180, 0.01) == pytest.approx(oracle_recency(q, 180, 0.01), abs=1e-10)
    assert pool_hysteresis(q, 60, 0.8) == pytest.approx(oracle_hysteresis(q, 60, 0.8), abs=1e-10)


def test_poolers_match_oracles():
    rng = np.random.default_rng(7)
    for _ in range(100):
        _compare_with_oracles(_random_series(rng))


@pytest.mark.slow
def test_poolers_match_oracles_on_1000_series():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        _compare_with_oracles(_random_series(rng))


def test_series_validation():
    with pytest.raises(InvalidInputError):
        FrameScoreSeries([])
    with pytest.raises(InvalidInputError):
        FrameScoreSeries([1.0, float("nan")])
    with pytest.raises(InvalidInputError):
        pool_mean([])
    s = FrameScoreSeries([1.0, 2.0])
    with pytest.raises(ValueError):
        s.scores[0] = 5.0


def test_series_input_is_not_modified():
    raw = np.array([3.0, 1.0, 2.0])
    pool_percentile(raw, 50)
    pool_hysteresis(raw, 2, 0.5)
    np.testing.assert_array_equal(raw, [3.0, 1.0, 2.0])


@pytest.mark.parametrize(
    "q, expected",
    [([2, 4, 6], 4.0), ([5], 5.0), ([1, 2, 3, 4], 2.5)],
)
def test_mean(q, expected):
    assert pool_mean(q) == expected


@pytest.mark.parametrize(
    "q, expected",
    [([1, 9, 2], 2.0), ([1, 2, 3, 4], 2.5), ([3.5], 3.5)],
)
def test_median(q, expected):
    assert pool_median(q) == expected


def test_harmonic_and_geometric():
    assert pool_harmonic([3, 3, 3]) == pytest.approx(3.0)
    assert pool_harmonic([1, 4, 4]) == pytest.approx(2.0)
    assert pool_geometric([2, 8]) == pytest.approx(4.0)
    assert pool_geometric([1, 1, 1]) == 1.0
    with pytest.raises(PoolingDomainError):
        pool_harmonic([1, 0, 2])
    with pytest.raises(PoolingDomainError):
        pool_geometric([1, -1])


def test_geometric_does_not_overflow():
    assert pool_geometric([1e300] * 10) == pytest.approx(1e300, rel=1e-10)


def test_minkowski():
    assert pool_minkowski([3, 4], 2) == pytest.approx(math.sqrt(12.5), abs=1e-12)
    assert pool_minkowski([2.5, 2.5], 7.3) == pytest.approx(2.5)
    assert pool_minkowski([1, 2, 3], 1) == pytest.approx(2.0)
    with pytest.raises(InvalidParameterError):
        pool_minkowski([1, 2], 0)
    with pytest.raises(PoolingDomainError):
        pool_minkowski([1, -2], 0.5)


def test_minkowski_monotone_in_p():
    rng = np.random.default_rng(3)
    for _ in range(50):
        q = rng.uniform(0.1, 5.0, int(rng.integers(2, 40)))
        values = [pool_minkowski(q, p) for p in (-2, -1, 0.5, 1, 2, 3, 5)]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))


def test_percentile():
    q = list(range(1, 11))
    assert pool_percentile(q, 10, True) == 1.0
    assert pool_percentile(q, 10, False) == 10.0
    assert pool_percentile([4.0] * 7, 33) == 4.0
    assert pool_percentile(q, 100) == pytest.approx(pool_mean(q))
    # 10% of 30 frames is exactly 3 frames
    assert pool_percentile(list(range(30)), 10) == pytest.approx(1.0)
    with pytest.raises(InvalidParameterError):
        pool_percentile(q, 0)
    with pytest.raises(InvalidParameterError):
        pool_percentile(q, 100.5)


def test_kmeans_split():
    split = kmeans_1d_two([1, 1, 9, 9])
    assert list(split.low_group) == [0, 1]
    assert list(split.high_group) == [2, 3]
    assert (split.low_mean, split.high_mean) == (1.0, 9.0)

    split = kmeans_1d_two([0, 10])
    assert list(split.low_group) == [0]
    assert list(split.high_group) == [1]

    assert kmeans_1d_two([5, 5, 5]).degenerate
    with pytest.raises(InvalidInputError):
        kmeans_1d_two([1.0])


def test_kmeans_partition_is_complete():
    rng = np.random.default_rng(5)
    for _ in range(50):
        q = rng.normal(3.0, 1.0, int(rng.integers(2, 60)))
        split = kmeans_1d_two(q)
        both = np.concatenate((split.low_group, split.high_group))
        assert sorted(both) == list(range(q.size))
        assert split.low_mean <= split.high_mean
        assert split.low_group.size > 0 and split.high_group.size > 0


def test_vqpooling():
    # w = (1 - 1/9)^2 = 64/81, Q = (2 + 18w) / (2 + 2w) = 1314/290
    assert pool_vqpooling([1, 1, 9, 9]) == pytest.approx(1314 / 290, abs=1e-12)
    assert pool_vqpooling([2.2, 2.2, 2.2]) == 2.2
    assert pool_vqpooling([0, 10]) == pytest.approx(5.0)
    with pytest.raises(PoolingDomainError):
        pool_vqpooling([-2.0, -1.0, 0.0, 0.0])


def test_variation():
    assert pool_variation([1, 3, 2], 100) == pytest.approx(1.5)
    assert pool_variation([4.0] * 9, 10) == 0.0
    assert pool_variation([0, 10], 50) == 10.0
    with pytest.raises(InvalidInputError):
        pool_variation([1.0], 10)


def test_variation_negate_flag():
    spec = PoolingSpec(PoolingMethod.VARIATION, k_percent=100, negate=True)
    assert pool([1, 3, 2], spec) == pytest.approx(-1.5)
    with pytest.raises(InvalidParameterError):
        PoolingSpec(PoolingMethod.MEAN, negate=True)


def test_primacy_and_recency():
    w0 = 1 / (1 + math.exp(-0.01))
    assert pool_primacy([10, 0], 1, 0.01) == pytest.approx(10 * w0, abs=1e-12)
    assert pool_primacy([10, 0], 1, 0.01) == pytest.approx(5.02500, abs=1e-5)
    assert pool_recency([10, 0], 1, 0.01) == pytest.approx(4.97500, abs=1e-5)
    assert pool_primacy([3.0] * 400, 180, 0.05) == pytest.approx(3.0, abs=1e-12)
    assert pool_recency([3.0] * 5, 180, 0.05) == pytest.approx(3.0, abs=1e-12)
    q = [5, 1, 2, 8, 9, 9]
    assert pool_primacy(q, 2, 0.0) == pytest.approx(np.mean(q[:3]))
    assert pool_recency(q, 2, 0.0) == pytest.approx(np.mean(q[-3:]))
    with pytest.raises(InvalidParameterError):
        pool_primacy(q, 0, 0.01)
    with pytest.raises(InvalidParameterError):
        pool_recency(q, 3, -0.1)


def test_recency_is_primacy_of_reversed_series():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        q = rng.uniform(0.0, 5.0, int(rng.integers(1, 400)))
        assert pool_recency(q, 180, 0.01) == pytest.approx(pool_primacy(q[::-1], 180, 0.01), abs=1e-12)


def test_hysteresis_trace():
    trace = hysteresis_transform([2.5] * 8, 3, 0.8)
    for arr in (trace.memory, trace.current, trace.combined):
        np.testing.assert_allclose(arr, 2.5, atol=1e-12)

    single = hysteresis_transform([4.2], 60, 0.3)
    assert single.combined[0] == pytest.approx(4.2)

    q = [5, 1, 5, 5, 5]
    trace = hysteresis_transform(q, 2, 0.8)
    memory, current, combined = oracle_hysteresis_trace(q, 2, 0.8)
    np.testing.assert_allclose(trace.memory, memory, atol=1e-12)
    np.testing.assert_allclose(trace.current, current, atol=1e-12)
    np.testing.assert_allclose(trace.combined, combined, atol=1e-12)
    np.testing.assert_array_equal(trace.memory, [5, 5, 1, 1, 5])
    assert pool_hysteresis(q, 2, 0.8) < pool_mean(q) == 4.2


def test_hysteresis_matches_oracle_on_short_series():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        q = list(rng.uniform(0.0, 5.0, int(rng.integers(1, 25))))
        tau = int(rng.integers(1, 8))
        alpha = float(rng.uniform())
        trace = hysteresis_transform(q, tau, alpha)
        np.testing.assert_allclose(trace.combined, oracle_hysteresis_trace(q, tau, alpha)[2], atol=1e-10)


def test_hysteresis_component_bounds():
    rng = np.random.default_rng(19)
    q = rng.uniform(1.0, 5.0, 120)
    tau = 10
    trace = hysteresis_transform(q, tau, 0.8)
    for n in range(1, q.size):
        assert trace.memory[n] <= max(q[max(0, n - tau):n])
        window = q[n:n + tau + 1]
        assert window.min() - 1e-12 <= trace.current[n] <= window.max() + 1e-12


def test_hysteresis_is_monotone():
    rng = np.random.default_rng(23)
    for _ in range(1000):
        n = int(rng.integers(1, 150))
        q = rng.uniform(0.0, 5.0, n)
        q_hat = q + rng.uniform(0.0, 1.0, n) * (rng.uniform(size=n) < 0.5)
        assert pool_hysteresis(q) <= pool_hysteresis(q_hat) + 1e-12


def test_hysteresis_parameter_guards():
    with pytest.raises(InvalidParameterError):
        hysteresis_transform([1, 2], 0, 0.5)
    with pytest.raises(InvalidParameterError):
        hysteresis_transform([1, 2], 3, 1.5)


def test_pythagorean_chain():
    rng = np.random.default_rng(29)
    for i in range(10000):
        n = int(rng.integers(1, 30))
        if i % 10 == 0:
            q = np.full(n, rng.uniform(0.1, 10.0))
        else:
            q = rng.uniform(0.1, 10.0, n)
        h, g, a = pool_harmonic(q), pool_geometric(q), pool_mean(q)
        assert h <= g + 1e-12 and g <= a + 1e-12
        constant = bool(np.all(q == q[0]))
        tight = abs(h - a) <= 1e-12 * max(1.0, a)
        assert constant == tight


def test_constant_fixpoint():
    for c in (0.37, 1.0, 3.3, 87.5):
        for n in (1, 2, 17, 250):
            q = [c] * n
            for spec in all_methods():
                if spec.method == PoolingMethod.VARIATION:
                    if n >= 2:
                        assert pool(q, spec) == 0.0
                    continue
                assert pool(q, spec) == pytest.approx(c, abs=1e-12)


def test_translation_covariance():
    rng = np.random.default_rng(31)
    covariant = [
        PoolingMethod.MEAN,
        PoolingMethod.MEDIAN,
        PoolingMethod.PRIMACY,
        PoolingMethod.RECENCY,
        PoolingMethod.PERCENTILE,
        PoolingMethod.HYSTERESIS,
    ]
    for _ in range(50):
        q = rng.uniform(1.0, 5.0, int(rng.integers(1, 300)))
        delta = rng.uniform(-3.0, 3.0)
        for m in covariant:
            spec = PoolingSpec(m)
            assert pool(q + delta, spec) == pytest.approx(pool(q, spec) + delta, abs=1e-9)


def test_permutation_invariance():
    rng = np.random.default_rng(37)
    invariant = [
        PoolingMethod.MEAN,
        PoolingMethod.MEDIAN,
        PoolingMethod.HARMONIC,
        PoolingMethod.GEOMETRIC,
        PoolingMethod.MINKOWSKI,
        PoolingMethod.PERCENTILE,
    ]
    for _ in range(50):
        q = rng.uniform(0.5, 5.0, int(rng.integers(1, 100)))
        shuffled = rng.permutation(q)
        for m in invariant:
            spec = PoolingSpec(m)
            assert pool(shuffled, spec) == pytest.approx(pool(q, spec), abs=1e-12)


def test_order_sensitive_poolers_have_counterexamples():
    assert pool_variation([1, 3, 2], 100) != pool_variation([1, 2, 3], 100)
    assert pool_primacy([10, 0], 1, 0.01) != pool_primacy([0, 10], 1, 0.01)
    assert pool_recency([10, 0], 1, 0.01) != pool_recency([0, 10], 1, 0.01)
    assert pool_hysteresis([5, 1, 5, 5, 5], 2, 0.8) != pool_hysteresis([1, 5, 5, 5, 5], 2, 0.8)


def test_poolers_are_pure():
    rng = np.random.default_rng(41)
    q = rng.uniform(0.5, 5.0, 200)
    for spec in all_methods():
        assert pool(q, spec) == pool(q.copy(), spec)


def test_dispatch_and_defaults():
    q = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0]
    assert pool(q, PoolingSpec(PoolingMethod.MEAN)) == pool_mean(q)
    assert pool(q, PoolingSpec(PoolingMethod.HYSTERESIS)) == pool_hysteresis(q, 60, 0.8)
    spec = PoolingSpec("percentile", k_percent=30)
    assert pool(q, spec) == pool_percentile(q, 30)
    with pytest.raises(InvalidParameterError):
        PoolingSpec(PoolingMethod.MINKOWSKI, p=0)
    with pytest.raises(InvalidParameterError):
        parse_method("trimmed-mean")
    assert [s.method for s in all_methods()] == list(PoolingMethod)


def test_spec_labels():
    assert PoolingSpec(PoolingMethod.MEAN).label == "Mean"
    assert PoolingSpec(PoolingMethod.PERCENTILE, k_percent=5).label == "Percentile(k_percent=5)"
    assert PoolingSpec(PoolingMethod.MINKOWSKI, p=2.0).label == "Minkowski"
