"""Downlink precoding from UL-DL reciprocity and downlink SINR."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterGraph
from .geometry import SnrCalibration
from .uplink import CombinerWeights, ReceiverBank, ergodic_rates

log = logging.getLogger(__name__)


@dataclass
class PrecoderSet:
    u: np.ndarray  # (L, K, M); column k stacked over (l, m) has unit norm for served UEs
    power: np.ndarray  # (K,)

    def stacked(self) -> np.ndarray:
        """Precoders as the (L*M, K) matrix of stacked blocks."""
        L, K, M = self.u.shape
        return self.u.transpose(0, 2, 1).reshape(L * M, K)


@dataclass
class DlRateReport:
    per_user_rate: np.ndarray
    sinr: np.ndarray  # (R, K)

    @property
    def realization_count(self) -> int:
        return self.sinr.shape[0]


def build_precoders(bank: ReceiverBank, weights: CombinerWeights, clusters: ClusterGraph) -> PrecoderSet:
    """Stack ``w0_{l,k} v_{l,k}`` over the (pruned) cluster and normalize."""
    blocks = np.where(clusters.assoc[..., None], weights.w0[..., None] * bank.v, 0.0)
    norms = np.sqrt((np.abs(blocks) ** 2).sum(axis=(0, 2)))
    served = clusters.assoc.any(axis=0)
    dead = served & (norms == 0)
    if dead.any():
        log.warning("zero precoder for served UE(s) %s; treated as unserved", np.flatnonzero(dead).tolist())
    ok = norms > 0
    u = blocks / np.where(ok, norms, 1.0)[None, :, None]
    return PrecoderSet(u=u, power=np.ones(u.shape[1]))


def dl_sinr(h: np.ndarray, precoders: PrecoderSet, snr: SnrCalibration) -> np.ndarray:
    # HU[k, j] = hh_k^H uu_j over all L*M antennas
    HU = np.einsum("lkm,ljm->kj", h.conj(), precoders.u)
    p = np.abs(HU) ** 2 * precoders.power[None, :]
    signal = np.diagonal(p)
    interference = p.sum(axis=1) - signal
    return signal / (1.0 / snr.snr + interference)


def dl_rate_report(sinr_samples) -> DlRateReport:
    sinr = np.atleast_2d(np.asarray(sinr_samples, dtype=float))
    if sinr.shape[0] < 1:
        raise ValueError("need at least one realization")
    return DlRateReport(per_user_rate=ergodic_rates(sinr), sinr=sinr)
