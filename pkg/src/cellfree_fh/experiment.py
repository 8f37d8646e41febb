"""Drops, Monte-Carlo realizations and (K, D) sweeps with CSV output."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import platform
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import ConfigurationError, __version__
from .clustering import ClusterGraph, PilotAssignment, assign_pilots, estimate_channels, form_clusters
from .downlink import build_precoders, dl_sinr
from .fronthaul import (
    FronthaulGraph,
    SolverConfig,
    TrafficDemand,
    build_milp,
    default_topology,
    improve_with_placement,
    link_load_report,
    load_topology,
    placement,
    solve_milp,
    validate_solution,
)
from .geometry import (
    NetworkArea,
    NetworkLayout,
    PathlossConfig,
    SnrCalibration,
    build_all_subspaces,
    calibrate_snr,
    draw_channels,
    lsfc_matrix,
    place_rus_grid,
    place_ues_uniform,
    subspace_masks,
)
from .uplink import (
    ObservationStats,
    QuantizationPlan,
    ReceiverBank,
    actual_ul_sinr,
    build_quantization_plan,
    compute_combiner_weights,
    compute_lmmse_receivers,
    ergodic_rates,
    estimate_observation_stats,
)

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    area_width: float = 200.0
    area_height: float = 200.0
    L: int = 20
    M: int = 10
    grid_rows: int = 4
    grid_cols: int = 5
    K_list: list[int] = field(default_factory=lambda: [75, 100, 125, 150, 175, 200])
    D_ratios: list[float] = field(default_factory=lambda: [0.5, 1, 2, 5, 10, 20, 50])
    angular_spread: float = math.pi / 8
    tau_p: int = 20
    T: int = 200
    gamma_dl: float = 0.8
    C_max: int = 7
    eta: float = 1.0
    Q: int = 5
    N: int = 4
    Z: int | None = None  # per-DU processor limit; None -> ceil(K / 2)
    objective_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    realizations: int = 100
    drops: int = 1
    seed: int = 2024
    pathloss: PathlossConfig = field(default_factory=PathlossConfig)
    topology: str | None = None  # JSON file; None -> built-in default
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(backend="highs", time_limit=600.0, rel_gap=1e-2))
    dump_link_loads: bool = False

    def __post_init__(self):
        self.objective_weights = tuple(float(w) for w in self.objective_weights)
        self.K_list = [int(k) for k in self.K_list]
        self.D_ratios = [float(r) for r in self.D_ratios]
        if isinstance(self.pathloss, dict):
            self.pathloss = PathlossConfig(**self.pathloss)
        if isinstance(self.solver, dict):
            self.solver = SolverConfig(**self.solver)
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.gamma_dl < 1.0:
            raise ConfigurationError("gamma_dl must lie in (0, 1)")
        if not self.tau_p < self.T:
            raise ConfigurationError("tau_p must be smaller than T")
        counts = dict(L=self.L, M=self.M, tau_p=self.tau_p, C_max=self.C_max, Q=self.Q, N=self.N,
                      realizations=self.realizations, drops=self.drops)
        for name, v in counts.items():
            if int(v) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if not self.K_list or min(self.K_list) < 1:
            raise ConfigurationError("K_list must hold positive user counts")
        if not self.D_ratios or min(self.D_ratios) <= 0:
            raise ConfigurationError("D_ratios must be positive")
        if self.grid_rows * self.grid_cols != self.L:
            raise ConfigurationError("grid_rows * grid_cols must equal L")
        if self.eta <= 0:
            raise ConfigurationError("eta must be positive")

    @property
    def area(self) -> NetworkArea:
        return NetworkArea(self.area_width, self.area_height)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["objective_weights"] = list(self.objective_weights)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        data = yaml.safe_load(Path(path).read_text()) or {}
        return cls.from_dict(data)


@dataclass
class Realization:
    h: np.ndarray
    h_hat: np.ndarray
    bank: ReceiverBank


@dataclass
class DropState:
    K: int
    drop: int
    layout: NetworkLayout
    beta: np.ndarray
    snr: SnrCalibration
    clusters: ClusterGraph
    pilots: PilotAssignment
    realizations: list[Realization]
    stats: ObservationStats

    @property
    def sigma2_min(self) -> float:
        return float(self.stats.sigma2[self.clusters.assoc].min())


@dataclass
class PhyOutcome:
    plan: QuantizationPlan
    clusters: ClusterGraph  # after pruning
    ul_rate: np.ndarray  # (K,) bit per channel use
    dl_rate: np.ndarray
    ul_sinr: np.ndarray  # (R, K)
    dl_sinr: np.ndarray


SWEEP_COLUMNS = [
    "K", "drop", "D_ratio", "D_abs", "SE_ul", "SE_dl", "SE_tot",
    "fh_objective", "C_L", "C_Q", "C_D", "mean_cluster_size",
    "pct5_dl_se", "pct5_ul_se", "unserved", "pruned_edges", "solver_status",
    "config_hash", "seed",
]


def percentile(values, p: float) -> float:
    """Linear-interpolation percentile on sorted values, endpoints inclusive; ``p`` in [0, 1]."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("percentile of an empty list")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return float(np.quantile(v, p, method="linear"))


def _rng(cfg: ExperimentConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=key))


_LAYOUT, _CHANNEL, _PILOT_NOISE = 0, 1, 2


def simulate_drop(cfg: ExperimentConfig, K: int, drop: int, realizations: int | None = None) -> DropState:
    """Everything of one drop that does not depend on the distortion level."""
    R = cfg.realizations if realizations is None else realizations
    area = cfg.area
    ru = place_rus_grid(cfg.L, cfg.grid_rows, cfg.grid_cols, area)
    ue = place_ues_uniform(K, area, _rng(cfg, K, drop, _LAYOUT))
    layout = NetworkLayout(ru, ue, cfg.M, area)
    beta = lsfc_matrix(layout, cfg.pathloss)
    snr = calibrate_snr(area, cfg.L, cfg.M, cfg.pathloss)
    clusters = form_clusters(beta, snr, cfg.eta, cfg.M, cfg.C_max)
    bases = build_all_subspaces(layout, cfg.angular_spread)
    masks = subspace_masks(bases, cfg.M)
    pilots = assign_pilots(clusters, bases, cfg.tau_p, beta)
    reals = []
    for r in range(R):
        h = draw_channels(beta, masks, _rng(cfg, K, drop, _CHANNEL, r))
        h_hat = estimate_channels(h, pilots, clusters, masks, snr, cfg.tau_p, _rng(cfg, K, drop, _PILOT_NOISE, r))
        reals.append(Realization(h, h_hat, compute_lmmse_receivers(h_hat, clusters, beta, snr)))
    stats = estimate_observation_stats(((x.h, x.bank) for x in reals), snr)
    return DropState(K, drop, layout, beta, snr, clusters, pilots, reals, stats)


def evaluate_distortion(state: DropState, D: float) -> PhyOutcome:
    plan, pruned = build_quantization_plan(state.stats, D, state.clusters)
    ul, dl = [], []
    for x in state.realizations:
        weights = compute_combiner_weights(x.h_hat, x.bank, plan, pruned, state.snr)
        ul.append(actual_ul_sinr(x.h, x.bank, weights, plan, pruned, state.snr))
        dl.append(dl_sinr(x.h, build_precoders(x.bank, weights, pruned), state.snr))
    ul, dl = np.array(ul), np.array(dl)
    return PhyOutcome(plan, pruned, ergodic_rates(ul), ergodic_rates(dl), ul, dl)


def spectral_efficiency(cfg: ExperimentConfig, ul_rate, dl_rate) -> tuple[np.ndarray, np.ndarray]:
    """Per-user UL and DL SE (bit/s/Hz) with TDD and pilot-overhead prefactors."""
    overhead = 1.0 - cfg.tau_p / cfg.T
    return (1.0 - cfg.gamma_dl) * overhead * np.asarray(ul_rate), cfg.gamma_dl * overhead * np.asarray(dl_rate)


def fronthaul_topology(cfg: ExperimentConfig, ru_positions: np.ndarray) -> FronthaulGraph:
    if cfg.topology:
        graph = load_topology(cfg.topology)
        if (graph.L, graph.Q, graph.N) != (cfg.L, cfg.Q, cfg.N):
            raise ConfigurationError("topology file does not match L, Q, N of the config")
        graph.check()
        return graph
    return default_topology(ru_positions, cfg.Q, cfg.N, cfg.area)


def traffic_demand(cfg: ExperimentConfig, phy: PhyOutcome) -> TrafficDemand:
    served = phy.clusters.served_mask()
    return TrafficDemand(
        ul_bits=phy.plan.rate_bits,
        dl_bits=np.where(served, phy.dl_rate, 0.0),
        gamma_dl=cfg.gamma_dl,
        assoc=phy.clusters.assoc,
    )


def du_limits(cfg: ExperimentConfig, K: int) -> np.ndarray:
    z = math.ceil(K / 2) if cfg.Z is None else cfg.Z
    return np.full(cfg.N, float(z))


@dataclass
class SweepRecord:
    row: dict
    timings: dict
    link_loads: list = field(default_factory=list)
    validation_ok: bool = True


def _version_string() -> str:
    try:
        sha = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).parent,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        sha = ""
    return f"{__version__}+g{sha}" if sha else __version__


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def sweep_rows(cfg: ExperimentConfig):
    """Yield one :class:`SweepRecord` per (K, drop, D ratio), in that nesting order."""
    graph = None
    digest = cfg.digest()
    for K in cfg.K_list:
        for drop in range(cfg.drops):
            t0 = time.perf_counter()
            state = simulate_drop(cfg, K, drop)
            t_phy = time.perf_counter() - t0
            if graph is None:
                graph = fronthaul_topology(cfg, state.layout.ru_positions)
            s2min = state.sigma2_min
            prev_pruned = -1
            prev_hosts = None
            for ratio in cfg.D_ratios:
                D = ratio * s2min
                t1 = time.perf_counter()
                phy = evaluate_distortion(state, D)
                se_ul, se_dl = spectral_efficiency(cfg, phy.ul_rate, phy.dl_rate)
                t2 = time.perf_counter()
                model = build_milp(graph, traffic_demand(cfg, phy), du_limits(cfg, K), cfg.objective_weights)
                sol = solve_milp(model, cfg.solver)
                if prev_hosts is not None:
                    sol = improve_with_placement(model, sol, prev_hosts, cfg.solver)
                t3 = time.perf_counter()
                feasible = np.all(np.isfinite(sol.values))
                if feasible:
                    prev_hosts = placement(model, sol)
                    rep = link_load_report(model, sol, cfg.objective_weights)
                    val = validate_solution(model, sol, tol=1e-6)
                    loads = [(c, a, b, v) for c, a, b, v in rep.rows()]
                    C = (rep.C_L, rep.C_Q, rep.C_D)
                    objective = rep.weighted_objective
                    if not val.ok:
                        log.error("K=%d drop=%d ratio=%g: solution failed validation: %s", K, drop, ratio, val)
                else:
                    val, loads, C, objective = None, [], (math.nan,) * 3, math.nan
                pruned = int(phy.plan.pruned_edges.sum())
                if pruned < prev_pruned:
                    log.warning("pruned edge count decreased with larger D")
                prev_pruned = pruned
                log.info("K=%d drop=%d D/sigma2_min=%g pruned_edges=%d status=%s objective=%.6g",
                         K, drop, ratio, pruned, sol.status, objective)
                row = {
                    "K": K,
                    "drop": drop,
                    "D_ratio": ratio,
                    "D_abs": D,
                    "SE_ul": float(se_ul.sum()),
                    "SE_dl": float(se_dl.sum()),
                    "SE_tot": float(se_ul.sum() + se_dl.sum()),
                    "fh_objective": float(objective),
                    "C_L": float(C[0]),
                    "C_Q": float(C[1]),
                    "C_D": float(C[2]),
                    "mean_cluster_size": float(phy.clusters.cluster_sizes().mean()),
                    "pct5_dl_se": percentile(se_dl, 0.05),
                    "pct5_ul_se": percentile(se_ul, 0.05),
                    "unserved": int((~phy.clusters.served_mask()).sum()),
                    "pruned_edges": pruned,
                    "solver_status": sol.status,
                    "config_hash": digest,
                    "seed": cfg.seed,
                }
                timings = {"phy_drop_s": t_phy, "phy_eval_s": t2 - t1, "milp_s": t3 - t2}
                yield SweepRecord(row, timings, loads, validation_ok=bool(val is not None and val.ok))


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def run_sweep(cfg: ExperimentConfig, out_dir=None) -> list[dict]:
    """Run the full sweep; with ``out_dir`` also write results.csv, metadata.json (and link_loads.csv)."""
    started = time.time()
    records = list(sweep_rows(cfg))
    rows = [r.row for r in records]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(rows_to_csv(rows))
        meta = {
            "version": _version_string(),
            "config": cfg.to_dict(),
            "config_hash": cfg.digest(),
            "python": platform.python_version(),
            "started_unix": started,
            "total_wall_s": time.time() - started,
            "timings": [
                {"K": r.row["K"], "drop": r.row["drop"], "D_ratio": r.row["D_ratio"], **r.timings}
                for r in records
            ],
            "all_solutions_valid": all(r.validation_ok for r in records),
        }
        (out / "metadata.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")
        if cfg.dump_link_loads:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["K", "drop", "D_ratio", "link_class", "a", "b", "load"])
            for r in records:
                for c, a, b, v in r.link_loads:
                    w.writerow([r.row["K"], r.row["drop"], _fmt(r.row["D_ratio"]), c, a, b, _fmt(float(v))])
            (out / "link_loads.csv").write_text(buf.getvalue())
    return rows
