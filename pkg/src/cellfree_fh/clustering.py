"""User-centric cluster formation, pilot assignment and subspace-projection estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SnrCalibration, SubspaceBasis, complex_normal, dft_matrix


@dataclass
class ClusterGraph:
    """Bipartite UE-RU association; ``assoc[l, k]`` is True iff RU l serves UE k."""

    assoc: np.ndarray  # (L, K) bool

    @property
    def L(self) -> int:
        return self.assoc.shape[0]

    @property
    def K(self) -> int:
        return self.assoc.shape[1]

    @property
    def serving_sets(self) -> list[list[int]]:
        return [np.flatnonzero(self.assoc[:, k]).tolist() for k in range(self.K)]

    @property
    def served_sets(self) -> list[list[int]]:
        return [np.flatnonzero(self.assoc[l]).tolist() for l in range(self.L)]

    def cluster_sizes(self) -> np.ndarray:
        return self.assoc.sum(axis=0)

    def served_mask(self) -> np.ndarray:
        return self.assoc.any(axis=0)

    def without(self, edges: np.ndarray) -> "ClusterGraph":
        """Copy with the edges flagged in the boolean (L, K) array removed."""
        return ClusterGraph(self.assoc & ~edges)


@dataclass
class PilotAssignment:
    pilot_index: np.ndarray  # (K,) ints in [0, tau_p)
    dimension: int


def form_clusters(beta: np.ndarray, snr: SnrCalibration, eta: float, M: int, C_max: int) -> ClusterGraph:
    """Each UE picks up to ``C_max`` strongest RUs passing ``beta >= eta / (M * SNR)``."""
    if eta <= 0 or C_max < 1:
        raise ValueError("eta must be positive and C_max at least 1")
    L, K = beta.shape
    eligible = beta >= eta / (M * snr.snr)
    assoc = np.zeros((L, K), dtype=bool)
    for k in range(K):
        # stable sort on -beta keeps the lower RU index first among ties
        order = np.argsort(-beta[:, k], kind="stable")
        chosen = [l for l in order if eligible[l, k]][:C_max]
        assoc[chosen, k] = True
    return ClusterGraph(assoc)


def subspace_overlap(a: SubspaceBasis, b: SubspaceBasis) -> float:
    """``||Fa^H Fb||_F^2 / min(|Sa|, |Sb|)``; for DFT column sets this counts shared indices."""
    shared = len(set(a.index_set) & set(b.index_set))
    return shared / min(a.dim, b.dim)


def assign_pilots(
    clusters: ClusterGraph,
    bases: list[list[SubspaceBasis]],
    tau_p: int,
    beta: np.ndarray,
) -> PilotAssignment:
    """Greedy overlap-minimizing pilot assignment.

    UEs are visited by decreasing strongest LSFC. Each takes the pilot whose
    worst subspace overlap with already-assigned co-pilot UEs at the shared
    serving RUs is smallest; ties go to the least used pilot, then the lowest
    index.
    """
    if tau_p < 1:
        raise ValueError("tau_p must be at least 1")
    K = clusters.K
    serving = clusters.serving_sets
    served = clusters.served_sets
    pilots = np.full(K, -1, dtype=int)
    usage = np.zeros(tau_p, dtype=int)
    order = np.argsort(-beta.max(axis=0), kind="stable")
    for k in order:
        cost = np.zeros(tau_p)
        for l in serving[k]:
            for i in served[l]:
                t = pilots[i]
                if i == k or t < 0:
                    continue
                cost[t] = max(cost[t], subspace_overlap(bases[l][k], bases[l][i]))
        best = min(range(tau_p), key=lambda t: (cost[t], usage[t], t))
        pilots[k] = best
        usage[best] += 1
    return PilotAssignment(pilot_index=pilots, dimension=tau_p)


def estimate_channels(
    h: np.ndarray,
    pilots: PilotAssignment,
    clusters: ClusterGraph,
    masks: np.ndarray,
    snr: SnrCalibration,
    tau_p: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Subspace-projection estimates on the association edges, zeros elsewhere.

    One projected-noise draw per (RU, pilot) is shared by the co-pilot UEs of
    that RU; non-co-pilot UEs are removed by pilot orthogonality.
    """
    L, K, M = h.shape
    t = pilots.pilot_index
    # received pilot signal after despreading, per RU and pilot: (L, tau_p, M)
    z = complex_normal(rng, (L, pilots.dimension, M)) / np.sqrt(tau_p * snr.snr)
    y = z.copy()
    for p in range(pilots.dimension):
        members = t == p
        if members.any():
            y[:, p, :] += h[:, members, :].sum(axis=1)
    F = dft_matrix(M)
    # project y[l, t_k] onto the support of (l, k) in the DFT domain
    coeffs = y[:, t, :] @ F.conj()
    h_hat = (np.where(masks, coeffs, 0.0)) @ F.T
    return np.where(clusters.assoc[..., None], h_hat, 0.0)
