"""Network layout on a torus, 3GPP UMi pathloss and one-ring DFT channels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ConfigurationError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class NetworkArea:
    width: float = 200.0
    height: float = 200.0
    torus: bool = True

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError("area dimensions must be positive")

    @property
    def size(self) -> float:
        return self.width * self.height


@dataclass
class NetworkLayout:
    ru_positions: np.ndarray  # (L, 2)
    ue_positions: np.ndarray  # (K, 2)
    antennas_per_ru: int
    area: NetworkArea = field(default_factory=NetworkArea)

    @property
    def L(self) -> int:
        return len(self.ru_positions)

    @property
    def K(self) -> int:
        return len(self.ue_positions)

    @property
    def M(self) -> int:
        return self.antennas_per_ru


@dataclass(frozen=True)
class PathlossConfig:
    carrier_frequency: float = 3.5  # GHz
    ru_height: float = 10.0
    ue_height: float = 1.5
    min_2d_distance: float = 1.0
    model_variant: str = "umi_los"

    def __post_init__(self):
        if self.carrier_frequency <= 0:
            raise ConfigurationError("carrier frequency must be positive")
        if self.ru_height <= 0 or self.ue_height <= 0:
            raise ConfigurationError("antenna heights must be positive")
        if self.model_variant not in ("umi_los", "umi_nlos"):
            raise ConfigurationError(f"unknown pathloss variant {self.model_variant!r}")


@dataclass(frozen=True)
class SnrCalibration:
    snr: float
    d_L: float
    beta_bar: float


@dataclass
class SubspaceBasis:
    index_set: list[int]
    columns: np.ndarray  # (M, |S|)
    center_angle: float
    spread: float

    @property
    def dim(self) -> int:
        return len(self.index_set)


def place_rus_grid(L: int, grid_rows: int, grid_cols: int, area: NetworkArea) -> np.ndarray:
    """RU positions at the cell centers of a ``grid_rows x grid_cols`` grid.

    Row index runs along y, column index along x; returned in row-major order.
    """
    if grid_rows * grid_cols != L:
        raise ConfigurationError(f"grid {grid_rows}x{grid_cols} does not hold L={L} RUs")
    xs = (np.arange(grid_cols) + 0.5) * area.width / grid_cols
    ys = (np.arange(grid_rows) + 0.5) * area.height / grid_rows
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def place_ues_uniform(K: int, area: NetworkArea, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(K, 2)) * np.array([area.width, area.height])


def torus_displacement(p, q, area: NetworkArea) -> np.ndarray:
    """Shortest displacement vector(s) from ``p`` to ``q``; broadcasts over leading axes."""
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    if area.torus:
        span = np.array([area.width, area.height])
        d = d - span * np.round(d / span)
    return d


def torus_distance(p, q, area: NetworkArea):
    d = torus_displacement(p, q, area)
    return np.hypot(d[..., 0], d[..., 1])


def pathloss_db(d2d, cfg: PathlossConfig = PathlossConfig()):
    """3GPP TR 38.901 UMi street-canyon pathloss in dB (no shadowing).

    Accepts scalars or arrays of 2-D distances in meters.
    """
    d2d = np.maximum(np.asarray(d2d, dtype=float), cfg.min_2d_distance)
    d3d = np.sqrt(d2d**2 + (cfg.ru_height - cfg.ue_height) ** 2)
    fc = cfg.carrier_frequency
    # breakpoint uses effective heights (environment height 1 m)
    d_bp = 4.0 * (cfg.ru_height - 1.0) * (cfg.ue_height - 1.0) * fc * 1e9 / SPEED_OF_LIGHT
    pl1 = 32.4 + 21.0 * np.log10(d3d) + 20.0 * np.log10(fc)
    pl2 = (
        32.4
        + 40.0 * np.log10(d3d)
        + 20.0 * np.log10(fc)
        - 9.5 * np.log10(d_bp**2 + (cfg.ru_height - cfg.ue_height) ** 2)
    )
    pl_los = np.where(d2d <= d_bp, pl1, pl2)
    if cfg.model_variant == "umi_los":
        return pl_los
    pl_nlos = 35.3 * np.log10(d3d) + 22.4 + 21.3 * np.log10(fc) - 0.3 * (cfg.ue_height - 1.5)
    return np.maximum(pl_los, pl_nlos)


def lsfc_matrix(layout: NetworkLayout, cfg: PathlossConfig) -> np.ndarray:
    """Linear large-scale fading coefficients, shape (L, K)."""
    d = torus_distance(layout.ru_positions[:, None, :], layout.ue_positions[None, :, :], layout.area)
    return 10.0 ** (-pathloss_db(d, cfg) / 10.0)


def calibrate_snr(area: NetworkArea, L: int, M: int, cfg: PathlossConfig) -> SnrCalibration:
    d_L = math.sqrt(area.size / (math.pi * L))
    beta_bar = float(10.0 ** (-pathloss_db(2.5 * d_L, cfg) / 10.0))
    return SnrCalibration(snr=1.0 / (beta_bar * M), d_L=d_L, beta_bar=beta_bar)


def dft_matrix(M: int) -> np.ndarray:
    a = np.arange(M)
    return np.exp(-2j * np.pi * np.outer(a, a) / M) / np.sqrt(M)


def angular_index_set(theta: float, M: int, spread: float) -> list[int]:
    """DFT indices m whose angle 2*pi*m/M lies in [theta - spread/2, theta + spread/2) mod 2*pi."""
    if not 0.0 < spread < 2.0 * np.pi:
        raise ConfigurationError("angular spread must lie in (0, 2*pi)")
    grid = 2.0 * np.pi * np.arange(M) / M
    offset = np.mod(grid - (theta - spread / 2.0), 2.0 * np.pi)
    members = np.flatnonzero(offset < spread)
    if members.size == 0:
        gap = np.abs(np.angle(np.exp(1j * (grid - theta))))
        members = np.array([int(np.argmin(gap))])
    return sorted(int(m) for m in members)


def build_subspace(ru_pos, ue_pos, M: int, spread: float, area: NetworkArea) -> SubspaceBasis:
    d = torus_displacement(ru_pos, ue_pos, area)
    theta = float(np.arctan2(d[1], d[0]))
    idx = angular_index_set(theta, M, spread)
    return SubspaceBasis(index_set=idx, columns=dft_matrix(M)[:, idx], center_angle=theta, spread=spread)


def build_all_subspaces(layout: NetworkLayout, spread: float) -> list[list[SubspaceBasis]]:
    """Bases indexed ``[l][k]``."""
    return [
        [build_subspace(ru, ue, layout.M, spread, layout.area) for ue in layout.ue_positions]
        for ru in layout.ru_positions
    ]


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channel(beta: float, basis: SubspaceBasis, M: int, rng: np.random.Generator) -> np.ndarray:
    nu = complex_normal(rng, basis.dim)
    return np.sqrt(beta * M / basis.dim) * (basis.columns @ nu)


def subspace_masks(bases: list[list[SubspaceBasis]], M: int) -> np.ndarray:
    """Boolean (L, K, M) mask of DFT indices in each channel's support."""
    L, K = len(bases), len(bases[0])
    mask = np.zeros((L, K, M), dtype=bool)
    for l in range(L):
        for k in range(K):
            mask[l, k, bases[l][k].index_set] = True
    return mask


def draw_channels(beta: np.ndarray, masks: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Channels of every RU-UE pair, shape (L, K, M).

    A full (L, K, M) block of innovations is drawn and masked, so the entry of
    pair (l, k) depends only on the stream and not on the other pairs' supports.
    """
    L, K, M = masks.shape
    nu = complex_normal(rng, (L, K, M))
    dims = masks.sum(axis=2)
    coeffs = np.where(masks, nu, 0.0) * np.sqrt(beta * M / dims)[..., None]
    # back to the antenna domain: h = F[:, S] nu_S
    return coeffs @ dft_matrix(M).T
