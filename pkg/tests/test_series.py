import numpy as np
import pytest

from dccatest.series import (InfeasibleScalesError, SeriesPair,
                             integrate_profile, load_pair, make_scales,
                             write_pair)


def test_integrate_profile_trivial():
    assert np.array_equal(integrate_profile([0.0, 0.0, 0.0]), [0, 0, 0])
    assert np.array_equal(integrate_profile([1.0, 2.0, 3.0]), [1, 3, 6])
    assert np.array_equal(integrate_profile([1, 1, 1]), [1, 2, 3])
    assert np.array_equal(integrate_profile([1, -1, 1, -1]), [1, 0, 1, 0])


def test_integrate_profile_inverse_oracle(rng):
    y = rng.standard_normal(500)
    x = integrate_profile(y)
    # Differencing inverts integration up to summation round-off.
    assert np.allclose(np.diff(x), y[1:], rtol=0,
                       atol=1e-12 * max(1.0, np.abs(x).max()))
    assert x[0] == y[0]


def test_integrate_profile_linear(rng):
    y = rng.standard_normal(200)
    z = rng.standard_normal(200)
    a, b = 2.5, -1.25
    lhs = integrate_profile(a * y + b * z)
    rhs = a * integrate_profile(y) + b * integrate_profile(z)
    assert np.allclose(lhs, rhs, rtol=1e-12)


def test_integrate_profile_rejects_bad_input():
    with pytest.raises(ValueError):
        integrate_profile([])
    with pytest.raises(ValueError):
        integrate_profile([1.0, np.nan])
    with pytest.raises(ValueError):
        integrate_profile([1.0, np.inf])


def test_series_pair_validation(rng):
    with pytest.raises(ValueError):
        SeriesPair.from_increments([1.0], [1.0])
    with pytest.raises(ValueError):
        SeriesPair.from_increments([1.0, 2.0], [1.0, 2.0, 3.0])
    pair = SeriesPair.from_increments([1.0, 1.0, 1.0], [1.0, -1.0, 1.0])
    assert pair.n_samples == 3
    assert np.array_equal(pair.x1, [1, 2, 3])
    assert np.array_equal(pair.x2, [1, 0, 1])


def test_make_scales_exact_geometric():
    ss = make_scales(20000, 20, 2000, 3, 1)
    assert ss.scales == (20, 200, 2000)


def test_make_scales_endpoints():
    ss = make_scales(100, 10, 40, 2, 1)
    assert ss.scales == (10, 40)


def test_make_scales_ratio_property():
    # Consecutive ratios stay within 25% of the exact geometric ratio.
    for (n_samples, lo, hi, r) in [(10000, 20, 500, 10), (50000, 8, 2000, 15),
                                   (4000, 10, 300, 7)]:
        ss = make_scales(n_samples, lo, hi, r, 1)
        target = (hi / lo) ** (1.0 / (r - 1))
        ratios = np.array(ss.scales[1:]) / np.array(ss.scales[:-1])
        assert np.all(ratios < 1.25 * target)
        assert np.all(ratios > 0.75 * target)


def test_make_scales_deterministic():
    a = make_scales(12345, 17, 600, 9, 2)
    b = make_scales(12345, 17, 600, 9, 2)
    assert a == b


def test_make_scales_errors():
    with pytest.raises(InfeasibleScalesError):
        make_scales(100, 2, 40, 3, 1)          # n_min < d+2
    with pytest.raises(InfeasibleScalesError):
        make_scales(100, 10, 60, 3, 1)         # n_max > N/2
    with pytest.raises(InfeasibleScalesError):
        make_scales(1000, 10, 10, 3, 1)        # n_max must exceed n_min
    with pytest.raises(InfeasibleScalesError):
        make_scales(100, 10, 40, 1, 1)         # r < 2


def test_window_counts_and_discards():
    ss = make_scales(1000, 10, 300, 4, 1)
    counts = ss.window_counts(1000)
    assert np.array_equal(counts, [1000 // n for n in ss.scales])
    disc = ss.discarded_samples(1000)
    assert np.array_equal(disc, 1000 - counts * np.array(ss.scales))


def test_load_pair_two_files(tmp_path):
    fa = tmp_path / "a.csv"
    fb = tmp_path / "b.csv"
    fa.write_text("# comment\n1.0\n2.0\n-0.5\n1.5\n0.25\n")
    fb.write_text("value\n0.1\n0.2\n0.3\n0.4\n0.5\n")  # header auto-skipped
    pair = load_pair(str(fa), str(fb))
    assert pair.n_samples == 5
    assert pair.x1[1] == 3.0
    assert np.isclose(pair.x2[-1], 1.5)


def test_load_pair_single_file_two_columns(tmp_path):
    f = tmp_path / "pair.csv"
    f.write_text("1.0,0.5\n2.0,0.5\n3.0,0.5\n")
    pair = load_pair(str(f))
    assert pair.n_samples == 3
    assert np.array_equal(pair.y2, [0.5, 0.5, 0.5])


def test_load_pair_tab_separated(tmp_path):
    f = tmp_path / "pair.tsv"
    f.write_text("1.0\t2.0\n3.0\t4.0\n")
    pair = load_pair(str(f))
    assert np.array_equal(pair.y1, [1.0, 3.0])


def test_load_pair_errors(tmp_path):
    fa = tmp_path / "a.csv"
    fb = tmp_path / "b.csv"
    fa.write_text("1.0\n2.0\n")
    fb.write_text("1.0\n2.0\n3.0\n")
    with pytest.raises(ValueError, match="sample counts differ"):
        load_pair(str(fa), str(fb))
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\noops\n2.0\n")
    with pytest.raises(ValueError, match="parse"):
        load_pair(str(bad), str(fa))
    short = tmp_path / "short.csv"
    short.write_text("1.0,2.0\n")
    with pytest.raises(ValueError):
        load_pair(str(short))
    nan = tmp_path / "nan.csv"
    nan.write_text("1.0,1.0\nnan,2.0\n")
    with pytest.raises(ValueError, match="NaN"):
        load_pair(str(nan))


def test_write_pair_round_trip(tmp_path, rng):
    pair = SeriesPair.from_increments(rng.standard_normal(50),
                                      rng.standard_normal(50))
    path = tmp_path / "out.csv"
    write_pair(str(path), pair, comment="test fixture")
    loaded = load_pair(str(path))
    assert np.array_equal(loaded.y1, pair.y1)
    assert np.array_equal(loaded.y2, pair.y2)
