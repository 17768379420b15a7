import numpy as np
import pytest

import faun


def test_seq_run_is_monotone():
    a = faun.gen_dense_lowrank(30, 20, 3, 1)
    w, h, trace = faun.nmf(a, 3, algo="hals", iters=15, seed=2)
    assert w.shape == (30, 3) and h.shape == (3, 20)
    errs = [trace["initial_error"]] + trace["errors"]
    assert all(b <= a_ + 1e-10 for a_, b in zip(errs, errs[1:]))
    assert faun.relative_error(a, w, h) == pytest.approx(errs[-1], rel=1e-10)


def test_faun_matches_seq():
    a = np.random.default_rng(0).random((24, 12))
    ws, hs, _ = faun.nmf(a, 3, algo="bpp", iters=5, seed=3)
    wf, hf, trace = faun.nmf(a, 3, algo="bpp", iters=5, seed=3, impl="faun", ranks=4, grid="2x2")
    assert np.linalg.norm(wf - ws) <= 1e-8 * np.linalg.norm(ws)
    assert np.linalg.norm(hf - hs) <= 1e-8 * np.linalg.norm(hs)
    assert set(trace["breakdown"]) == {"mm", "luc", "gram", "allgather", "reducescatter", "allreduce"}
    assert trace["words"] > 0


def test_cost_and_grid():
    assert faun.make_grid(172800, 115200, 1536) == (48, 32)
    c = faun.cost("faun", 172800, 115200, 50, 1536)
    assert c["grid"] == (48, 32)
    assert faun.cost("naive", 96, 48, 2, 4)["words"] == 216.0
    assert faun.bandwidth_lower_bound(1024, 1024, 16, 16) == 4096.0
    assert faun.bandwidth_lower_bound(64, 64, 16, 16) is None


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        faun.nmf(np.ones((4, 3)), 5)
    with pytest.raises(ValueError):
        faun.nmf(-np.ones((4, 3)), 2)
    with pytest.raises(OSError):
        faun.read_matrix("/nonexistent/file.mtx")


def test_sparse_generator_density_one():
    s = faun.gen_sparse_uniform(5, 4, 1.0, 1)
    assert (s > 0).all() and (s <= 1).all()
