"""Uplink: local LMMSE combining, rate-distortion quantization, cluster-level combining."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .clustering import ClusterGraph
from .geometry import SnrCalibration


@dataclass
class ReceiverBank:
    v: np.ndarray  # (L, K, M), zero off the association edges
    nu: np.ndarray  # (L,)


@dataclass
class ObservationStats:
    sigma2: np.ndarray  # (L, K), zero off the association edges
    sample_count: int


@dataclass
class QuantizationPlan:
    distortion: float
    rate_bits: np.ndarray  # (L, K)
    alpha: np.ndarray  # (L, K), zero on pruned and absent edges
    err_var: np.ndarray  # (L, K)
    pruned_edges: np.ndarray  # (L, K) bool


@dataclass
class CombinerWeights:
    w: np.ndarray  # (L, K) complex, nonzero only on surviving edges
    w0: np.ndarray  # (L, K) complex, zero-distortion weights on the unpruned graph


@dataclass
class UlRateReport:
    per_user_rate: np.ndarray  # (K,) bit per channel use
    sinr: np.ndarray  # (R, K)

    @property
    def realization_count(self) -> int:
        return self.sinr.shape[0]


def compute_lmmse_receivers(
    h_hat: np.ndarray, clusters: ClusterGraph, beta: np.ndarray, snr: SnrCalibration
) -> ReceiverBank:
    L, K, M = h_hat.shape
    s = snr.snr
    nu = 1.0 + s * np.where(clusters.assoc, 0.0, beta).sum(axis=1)
    v = np.zeros_like(h_hat)
    for l in range(L):
        users = np.flatnonzero(clusters.assoc[l])
        if users.size == 0:
            continue
        Hl = h_hat[l, users].T  # (M, |U_l|)
        A = nu[l] * np.eye(M) + s * (Hl @ Hl.conj().T)
        v[l, users] = cho_solve(cho_factor(A), Hl).T
    return ReceiverBank(v=v, nu=nu)


def cross_gains(v: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``G[l, k, i] = v_{l,k}^H h_{l,i}``, shape (L, K, K)."""
    return np.matmul(v.conj(), h.transpose(0, 2, 1))


def observation_power(h: np.ndarray, bank: ReceiverBank, snr: SnrCalibration) -> np.ndarray:
    """``E|r_{l,k}|^2`` given the channels: ``SNR sum_i |v^H h_i|^2 + ||v||^2``."""
    G = cross_gains(bank.v, h)
    return snr.snr * (np.abs(G) ** 2).sum(axis=2) + (np.abs(bank.v) ** 2).sum(axis=2)


def estimate_observation_stats(
    realizations: Iterable[tuple[np.ndarray, ReceiverBank]], snr: SnrCalibration
) -> ObservationStats:
    total, n = None, 0
    for h, bank in realizations:
        p = observation_power(h, bank, snr)
        total = p if total is None else total + p
        n += 1
    if n == 0:
        raise ValueError("need at least one realization")
    return ObservationStats(sigma2=total / n, sample_count=n)


def quantization_params(sigma2, D):
    """Rate, Bussgang gain and error variance for signal power(s) ``sigma2`` at distortion ``D``.

    Entries with ``sigma2 <= D`` get zero rate, gain and error (the observation is not sent).
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    keep = sigma2 > D
    safe = np.where(keep, sigma2, 1.0)
    rate = np.where(keep, np.log2(safe / D), 0.0)
    alpha = np.where(keep, (safe - D) / safe, 0.0)
    err = np.where(keep, (1.0 - D / safe) * D, 0.0)
    return rate, alpha, err, keep


def build_quantization_plan(
    stats: ObservationStats, D: float, clusters: ClusterGraph
) -> tuple[QuantizationPlan, ClusterGraph]:
    if D <= 0:
        raise ValueError("distortion must be positive")
    rate, alpha, err, keep = quantization_params(stats.sigma2, D)
    live = clusters.assoc & keep
    pruned = clusters.assoc & ~keep
    plan = QuantizationPlan(
        distortion=D,
        rate_bits=np.where(live, rate, 0.0),
        alpha=np.where(live, alpha, 0.0),
        err_var=np.where(live, err, 0.0),
        pruned_edges=pruned,
    )
    return plan, clusters.without(pruned)


def _rayleigh_weights(Ghat, v, nu, alpha, err, live, unpruned, s):
    # Ghat[l, k, i] = v_{l,k}^H hhat_{l,i}; interference restricted to U_l
    own = np.einsum("lkk->lk", Ghat)
    mask = unpruned[:, None, :] & ~np.eye(Ghat.shape[1], dtype=bool)[None]
    interf = s * np.where(mask, np.abs(Ghat) ** 2, 0.0).sum(axis=2)
    vnorm2 = (np.abs(v) ** 2).sum(axis=2)
    gamma = alpha**2 * (vnorm2 * nu[:, None] + interf) + err
    gamma = np.where(live, gamma, 1.0)
    return np.where(live, alpha * own / gamma, 0.0)


def compute_combiner_weights(
    h_hat: np.ndarray,
    bank: ReceiverBank,
    plan: QuantizationPlan,
    clusters: ClusterGraph,
    snr: SnrCalibration,
) -> CombinerWeights:
    """Per-UE maximizer ``w = Gamma^{-1} a`` of the nominal SINR.

    ``a_l = alpha v^H hhat_k`` is the estimated gain through the quantizer and
    ``Gamma`` is diagonal: nominal interference from the RU's other served UEs
    plus noise, scaled by ``alpha^2``, plus the quantization error variance.
    ``clusters`` is the pruned graph; ``w0`` uses the unpruned one with
    ``alpha = 1`` and no quantization error.
    """
    unpruned = clusters.assoc | plan.pruned_edges
    Ghat = cross_gains(bank.v, h_hat)
    s = snr.snr
    w = _rayleigh_weights(Ghat, bank.v, bank.nu, plan.alpha, plan.err_var, clusters.assoc, unpruned, s)
    ones = unpruned.astype(float)
    w0 = _rayleigh_weights(Ghat, bank.v, bank.nu, ones, np.zeros_like(ones), unpruned, unpruned, s)
    return CombinerWeights(w=w, w0=w0)


def actual_ul_sinr(
    h: np.ndarray,
    bank: ReceiverBank,
    weights: CombinerWeights,
    plan: QuantizationPlan,
    clusters: ClusterGraph,
    snr: SnrCalibration,
    G: np.ndarray | None = None,
) -> np.ndarray:
    """Actual UL SINR of every UE given the true channels; 0 for unserved UEs.

    ``G`` may carry precomputed ``cross_gains(bank.v, h)``.
    """
    s = snr.snr
    if G is None:
        G = cross_gains(bank.v, h)
    live = clusters.assoc
    coef = np.where(live, weights.w.conj() * plan.alpha, 0.0)
    S = np.einsum("lk,lki->ki", coef, G)  # sum over the cluster of g~_{l,k,i}
    vnorm2 = (np.abs(bank.v) ** 2).sum(axis=2)
    d = np.where(live, np.abs(weights.w) ** 2 * (plan.alpha**2 * vnorm2 + plan.err_var), 0.0).sum(axis=0)
    p = np.abs(S) ** 2
    signal = s * np.diagonal(p)
    interference = s * (p.sum(axis=1) - np.diagonal(p))
    denom = d + interference
    served = live.any(axis=0) & (denom > 0)
    return np.where(served, signal / np.where(served, denom, 1.0), 0.0)


def ergodic_rates(sinr: np.ndarray) -> np.ndarray:
    """Mean of ``log2(1 + SINR)`` over the realization axis (axis 0)."""
    return np.log2(1.0 + np.asarray(sinr, dtype=float)).mean(axis=0)


def ul_rate_report(sinr_samples) -> UlRateReport:
    sinr = np.atleast_2d(np.asarray(sinr_samples, dtype=float))
    if sinr.shape[0] < 1:
        raise ValueError("need at least one realization")
    return UlRateReport(per_user_rate=ergodic_rates(sinr), sinr=sinr)
