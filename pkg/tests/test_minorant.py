import numpy as np
import pytest

from pmm.minorant import (
    AffineCut,
    CutBlock,
    CutPool,
    EmptyBlockWarning,
    cut_from_subgradient,
)


def test_cut_from_subgradient_abs_at_two():
    cut = cut_from_subgradient(np.array([2.0]), 2.0, np.array([1.0]))
    assert cut.offset == 0.0
    assert cut.value(np.array([5.0])) == 5.0


def test_cut_from_subgradient_abs_at_zero():
    cut = cut_from_subgradient(np.array([0.0]), 0.0, np.array([0.0]))
    assert cut.value(np.array([7.0])) == 0.0


def test_cut_from_subgradient_square_is_lower_bound():
    # f(x) = x^2 at z=1: cut is 2x - 1, tight at 1, below f elsewhere
    cut = cut_from_subgradient(np.array([1.0]), 1.0, np.array([2.0]))
    assert np.isclose(cut.value(np.array([1.0])), 1.0)
    for x in np.linspace(-5.0, 5.0, 201):
        assert cut.value(np.array([x])) <= x * x + 1e-12


def test_cut_rejects_nonfinite():
    with pytest.raises(ValueError):
        cut_from_subgradient(np.array([np.inf]), 1.0, np.array([1.0]))
    with pytest.raises(ValueError):
        AffineCut(np.array([np.nan]), 0.0)


def test_pool_memory_zero_keeps_newest_generation():
    pool = CutPool([CutBlock()], memory=0)
    for k in range(1, 6):
        pool.insert(0, AffineCut(np.array([float(k)]), 0.0, birth_iter=k))
        assert [c.birth_iter for c in pool.blocks[0].cuts] == [k]


def test_pool_memory_two_fifo():
    pool = CutPool([CutBlock()], memory=2)
    for k in (1, 2, 3, 4):
        pool.insert(0, AffineCut(np.array([1.0]), float(k), birth_iter=k))
    assert [c.birth_iter for c in pool.blocks[0].cuts] == [2, 3, 4]


def test_pool_large_memory_keeps_all():
    pool = CutPool([CutBlock()], memory=100)
    for k in range(1, 31):
        pool.insert(0, AffineCut(np.array([1.0]), float(k), birth_iter=k))
    assert pool.cut_count() == 30


def test_pool_multi_cut_generation_evicted_whole():
    # two cuts per iteration: memory bounds generations, not individual cuts
    pool = CutPool([CutBlock()], memory=1)
    for k in (1, 2, 3):
        pool.insert(0, AffineCut(np.array([1.0]), 0.0, birth_iter=k))
        pool.insert(0, AffineCut(np.array([-1.0]), 0.0, birth_iter=k))
    births = [c.birth_iter for c in pool.blocks[0].cuts]
    assert births == [2, 2, 3, 3]


def test_pool_eval_single_cut():
    pool = CutPool([CutBlock(cuts=[AffineCut(np.array([1.0]), 0.0)])])
    assert pool.eval(np.array([3.0])) == 3.0


def test_pool_eval_max_of_two():
    cuts = [AffineCut(np.array([1.0]), 0.0), AffineCut(np.array([-1.0]), 0.0)]
    pool = CutPool([CutBlock(cuts=cuts)])
    assert pool.eval(np.array([-2.0])) == 2.0


def test_pool_eval_weighted_blocks():
    b1 = CutBlock(weight=1.0, cuts=[AffineCut(np.array([0.0]), 1.0)])
    b2 = CutBlock(weight=2.0, cuts=[AffineCut(np.array([0.0]), 0.5)])
    pool = CutPool([b1, b2])
    assert pool.eval(np.array([0.0])) == 2.0


def test_pool_eval_clip_at_zero():
    pool = CutPool([CutBlock(cuts=[AffineCut(np.array([1.0]), 0.0)], clip_at_zero=True)])
    assert pool.eval(np.array([-4.0])) == 0.0
    assert pool.eval(np.array([4.0])) == 4.0


def test_pool_eval_empty_block_warns_and_is_zero():
    pool = CutPool([CutBlock()])
    with pytest.warns(EmptyBlockWarning):
        assert pool.eval(np.array([1.0])) == 0.0


def test_pool_eval_dimension_mismatch():
    pool = CutPool([CutBlock(cuts=[AffineCut(np.array([1.0, 2.0]), 0.0)])])
    with pytest.raises(ValueError):
        pool.eval(np.array([1.0]))


def test_block_rejects_negative_weight():
    with pytest.raises(ValueError):
        CutBlock(weight=-0.5)


def test_monotone_refinement_without_eviction():
    # inserting a cut never lowers the pool value anywhere
    rng = np.random.default_rng(2)
    pool = CutPool([CutBlock()], memory=None)
    samples = rng.standard_normal((200, 3))
    z0 = rng.standard_normal(3)
    pool.insert(0, cut_from_subgradient(z0, float(np.abs(z0).sum()), np.sign(z0)))
    before = np.array([pool.eval(x) for x in samples])
    for k in range(1, 6):
        z = rng.standard_normal(3)
        pool.insert(0, cut_from_subgradient(z, float(np.abs(z).sum()), np.sign(z), birth_iter=k))
        after = np.array([pool.eval(x) for x in samples])
        assert np.all(after >= before - 1e-12)
        before = after


def test_pool_is_lower_bound_of_l1():
    # oracle: evaluate f directly on random samples
    rng = np.random.default_rng(7)
    pool = CutPool([CutBlock()], memory=20)
    for k in range(12):
        z = rng.standard_normal(4) * 3.0
        fz = float(np.abs(z).sum())
        pool.insert(0, cut_from_subgradient(z, fz, np.sign(z), birth_iter=k))
        pool.tight_value = fz
        # tight at the newest anchor
        assert abs(pool.eval(z) - fz) <= 1e-9 * (1.0 + abs(fz))
    for _ in range(1000):
        x = rng.standard_normal(4) * 5.0
        fx = float(np.abs(x).sum())
        assert pool.eval(x) <= fx + 1e-9 * (1.0 + abs(fx))


def test_from_layout():
    pool = CutPool.from_layout([(1.0, False), (2.5, True)], memory=3)
    assert len(pool.blocks) == 2
    assert pool.blocks[1].weight == 2.5
    assert pool.blocks[1].clip_at_zero
    assert pool.memory == 3
    assert pool.is_empty()
