import logging

import numpy as np
import pytest

from cellfree_fh.clustering import ClusterGraph
from cellfree_fh.downlink import PrecoderSet, build_precoders, dl_rate_report, dl_sinr
from cellfree_fh.geometry import SnrCalibration
from cellfree_fh.uplink import CombinerWeights, ReceiverBank


def snr(s):
    return SnrCalibration(snr=s, d_L=1.0, beta_bar=1.0)


def cn(rng, *shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2)


def setup(seed=0, L=3, K=4, M=2):
    rng = np.random.default_rng(seed)
    assoc = rng.random((L, K)) < 0.6
    assoc[1] = True
    bank = ReceiverBank(np.where(assoc[..., None], cn(rng, L, K, M), 0), np.ones(L))
    w0 = np.where(assoc, cn(rng, L, K), 0)
    return ClusterGraph(assoc), bank, CombinerWeights(w0.copy(), w0)


def test_unit_norm_and_support():
    g, bank, w = setup()
    P = build_precoders(bank, w, g)
    norms = np.linalg.norm(P.stacked(), axis=0)
    np.testing.assert_allclose(norms[g.served_mask()], 1.0, atol=1e-10)
    block_norms = np.linalg.norm(P.u, axis=2)
    assert np.array_equal(block_norms > 0, g.assoc)
    assert np.all(P.power == 1)


def test_single_block_is_normalized_receiver():
    g, bank, w = setup()
    g1 = ClusterGraph(np.zeros_like(g.assoc))
    g1.assoc[1, 0] = True
    P = build_precoders(bank, w, g1)
    v = bank.v[1, 0]
    phase = w.w0[1, 0] / abs(w.w0[1, 0])
    np.testing.assert_allclose(P.u[1, 0], phase * v / np.linalg.norm(v), atol=1e-12)
    assert np.all(P.u[:, 1:] == 0)


def test_common_scaling_of_w0_is_irrelevant():
    g, bank, w = setup(1)
    a = build_precoders(bank, w, g)
    b = build_precoders(bank, CombinerWeights(w.w, 3.7 * w.w0), g)
    np.testing.assert_allclose(a.u, b.u, atol=1e-12)


def test_pruned_support_shrinks():
    g, bank, w = setup(2)
    cut = g.without(np.eye(*g.assoc.shape, dtype=bool))
    P = build_precoders(bank, w, cut)
    assert not np.any((np.linalg.norm(P.u, axis=2) > 0) & ~cut.assoc)


def test_zero_precoder_warns(caplog):
    g, bank, w = setup(3)
    w0 = w.w0.copy()
    k = int(np.flatnonzero(g.served_mask())[0])
    w0[:, k] = 0
    with caplog.at_level(logging.WARNING):
        P = build_precoders(bank, CombinerWeights(w.w, w0), g)
    assert "zero precoder" in caplog.text
    assert np.all(P.u[:, k] == 0)


def test_single_user_cauchy_schwarz():
    rng = np.random.default_rng(4)
    h = cn(rng, 2, 1, 3)
    s = snr(2.0)
    u_match = h / np.linalg.norm(h)
    best = dl_sinr(h, PrecoderSet(u_match, np.ones(1)), s)[0]
    assert best == pytest.approx(2.0 * np.sum(np.abs(h) ** 2), rel=1e-12)
    for _ in range(10):
        u = cn(rng, 2, 1, 3)
        u /= np.linalg.norm(u)
        assert dl_sinr(h, PrecoderSet(u, np.ones(1)), s)[0] <= best + 1e-12


def test_zero_precoder_zero_sinr():
    rng = np.random.default_rng(5)
    h = cn(rng, 2, 2, 3)
    u = cn(rng, 2, 2, 3)
    u[:, 1] = 0
    assert dl_sinr(h, PrecoderSet(u, np.ones(2)), snr(1.0))[1] == 0


def test_orthogonal_interferers():
    h = np.zeros((1, 2, 2), dtype=complex)
    h[0, 0] = [1, 0]
    h[0, 1] = [0, 2]
    u = np.zeros_like(h)
    u[0, 0] = [1, 0]
    u[0, 1] = [0, 1]
    out = dl_sinr(h, PrecoderSet(u, np.ones(2)), snr(4.0))
    np.testing.assert_allclose(out, [4.0 * 1, 4.0 * 4])


def test_dl_sinr_explicit_formula():
    rng = np.random.default_rng(6)
    h = cn(rng, 3, 4, 2)
    u = cn(rng, 3, 4, 2)
    q = rng.uniform(0.5, 2, 4)
    out = dl_sinr(h, PrecoderSet(u, q), snr(1.5))
    H = h.transpose(0, 2, 1).reshape(6, 4)
    U = u.transpose(0, 2, 1).reshape(6, 4)
    X = np.abs(H.conj().T @ U) ** 2 * q
    for k in range(4):
        ref = X[k, k] / (1 / 1.5 + X[k].sum() - X[k, k])
        assert out[k] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize(
    "samples, expected",
    [([[1.0], [1.0]], 1.0), ([[0.0]], 0.0), ([[1.0], [3.0]], 1.5)],
)
def test_dl_rate_examples(samples, expected):
    rep = dl_rate_report(samples)
    assert rep.per_user_rate[0] == pytest.approx(expected)
    assert rep.realization_count == len(samples)
