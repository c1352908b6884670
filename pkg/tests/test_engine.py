import numpy as np
import pytest

from monosync import (
    EmpiricalMeasure,
    NoiseBlock,
    NotConvergedError,
    forward_orbit,
    make_family,
    noise_at,
    probe_cloud,
    pullback_point,
    reverse_orbit,
    sample_block,
    wasserstein1,
)
from monosync.engine import pullback_batch
from monosync.families import FiniteNoise


def test_degenerate_law_block():
    noise = FiniteNoise((1.0, 0.0))
    block = sample_block(noise, 123, 0, 5)
    assert np.array_equal(block.values, [1, 1, 1, 1, 1])


def test_block_determinism(cantor1d):
    b1 = sample_block(cantor1d.noise, 99, 4, 64)
    b2 = sample_block(cantor1d.noise, 99, 4, 64)
    assert np.array_equal(b1.values, b2.values)
    b3 = sample_block(cantor1d.noise, 99, 5, 64)
    assert not np.array_equal(b1.values, b3.values)


def test_block_prefix_extension(cantor1d):
    short = sample_block(cantor1d.noise, 7, 0, 10)
    long = sample_block(cantor1d.noise, 7, 0, 50)
    assert np.array_equal(long.values[:10], short.values)


def test_counter_addressing_matches_sequential(cantor1d):
    block = sample_block(cantor1d.noise, 31, 2, 20)
    direct = [noise_at(cantor1d.noise, 31, 2, j) for j in range(20)]
    assert np.array_equal(block.values, direct)


def test_counter_addressing_box_noise():
    fam = make_family("slide1d")
    block = sample_block(fam.noise, 8, 1, 12)
    for j in (0, 3, 11):
        assert np.allclose(noise_at(fam.noise, 8, 1, j), block.values[j])


def test_symbol_frequency(cantor1d):
    block = sample_block(cantor1d.noise, 2024, 0, 100_000)
    freq = float((block.values == 1).mean())
    assert abs(freq - 0.5) < 0.01


def test_forward_orbit_examples(cantor1d):
    tr = forward_orbit(cantor1d, NoiseBlock(np.array([1, 1]), 0, 0), [1.0])
    assert np.allclose(tr.positions.ravel(), [1.0, 1 / 3, 1 / 9])
    tr2 = forward_orbit(cantor1d, NoiseBlock(np.array([2, 1]), 0, 0), [0.0])
    assert np.allclose(tr2.positions.ravel(), [0.0, 2 / 3, 2 / 9])
    lip = make_family("lip-pair")
    tr3 = forward_orbit(lip, NoiseBlock(np.array([1]), 0, 0), [1.0])
    assert tr3.positions[-1, 0] == pytest.approx(2.0)


def test_reverse_orbit_examples(cantor1d):
    tr = reverse_orbit(cantor1d, NoiseBlock(np.array([1, 2]), 0, 0), [0.0])
    assert np.allclose(tr.positions.ravel(), [0.0, 0.0, 2 / 9])
    # single-step reverse equals forward
    blk = NoiseBlock(np.array([2]), 0, 0)
    f = forward_orbit(cantor1d, blk, [0.25]).positions[-1]
    r = reverse_orbit(cantor1d, blk, [0.25]).positions[-1]
    assert np.allclose(f, r)


def test_reverse_boxes_nested(cantor1d):
    probe = probe_cloud(cantor1d.probe_box())
    block = sample_block(cantor1d.noise, 17, 0, 15)
    tr = reverse_orbit(cantor1d, block, [0.5], probe_points=probe)
    assert tr.boxes is not None and len(tr.boxes) == 16
    for j in range(15):
        assert tr.boxes[j].contains_box(tr.boxes[j + 1], tol=1e-12)


def test_pullback_depth_matches_contraction(cantor1d):
    probe = probe_cloud(cantor1d.probe_box())
    pt, n_used = pullback_point(cantor1d, 7, 0, probe, tol=1e-9)
    assert n_used == 19  # smallest n with 3^-n <= 1e-9
    assert 0.0 <= pt[0] <= 1.0


def test_pullback_const_family(const_family):
    probe = probe_cloud(const_family.probe_box())
    pt, n_used = pullback_point(const_family, 5, 0, probe, tol=1e-9)
    assert n_used == 1
    assert pt[0] == pytest.approx(0.7, abs=1e-12)


def test_pullback_exp_sign(exp1d):
    probe = probe_cloud(exp1d.probe_box())
    # the outermost map decides the sign of the limit
    for sid in range(20):
        first = noise_at(exp1d.noise, 41, sid, 0)
        pt, _ = pullback_point(exp1d, 41, sid, probe, tol=1e-9, n_max=512)
        assert (pt[0] > 0) == (first == 1)


def test_pullback_probe_independence(cantor1d):
    p1 = np.array([[0.0], [1.0], [0.25]])
    p2 = np.array([[0.4], [0.6]])
    tol = 1e-10
    a, _ = pullback_point(cantor1d, 9, 3, p1, tol=tol)
    b, _ = pullback_point(cantor1d, 9, 3, p2, tol=tol)
    assert abs(a[0] - b[0]) <= 2 * tol


def test_pullback_not_converged(rot2d):
    probe = probe_cloud(rot2d.probe_box())
    with pytest.raises(NotConvergedError):
        pullback_point(rot2d, 3, 0, probe, tol=1e-6, n_max=64)


def test_pullback_batch_bit_reproducible(cantor1d):
    probe = probe_cloud(cantor1d.probe_box())
    a = pullback_batch(cantor1d, 5, range(200), probe, 1e-9, 256)
    b = pullback_batch(cantor1d, 5, range(200), probe, 1e-9, 256)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.n_used, b.n_used)
    # stream addressing is positional, so sub-ranges agree entry by entry
    c = pullback_batch(cantor1d, 5, range(50, 100), probe, 1e-9, 256)
    assert np.array_equal(c.points, a.points[50:100])


def test_forward_reverse_distributional_duality(cantor1d):
    n, replicas = 6, 2000
    fwd = np.empty(replicas)
    rev = np.empty(replicas)
    for r in range(replicas):
        block = sample_block(cantor1d.noise, 55, r, n)
        fwd[r] = forward_orbit(cantor1d, block, [0.3]).positions[-1, 0]
        rev[r] = reverse_orbit(cantor1d, block, [0.3]).positions[-1, 0]
    w = wasserstein1(
        EmpiricalMeasure.uniform(fwd[:, None]), EmpiricalMeasure.uniform(rev[:, None])
    ).distance
    assert w <= 3.0 / np.sqrt(replicas)


def test_orbit_csv(tmp_path, cantor1d):
    block = sample_block(cantor1d.noise, 1, 0, 5)
    tr = reverse_orbit(cantor1d, block, [0.5], probe_points=probe_cloud(cantor1d.probe_box()))
    path = tmp_path / "orbit.csv"
    tr.write_csv(path, seed=1)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "# seed=1"
    assert lines[1].startswith("step,x_1,box_lo_1,box_hi_1")
    assert len(lines) == 2 + 6
