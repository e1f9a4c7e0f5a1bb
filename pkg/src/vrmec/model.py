"""World model for VR viewpoint delivery over MEC-enabled small cells.

A Scenario is an immutable description of the physical world: small-cell
base stations (SBSs, each hosting a mobile edge server), VR head-mounted
displays (HMDs), and a catalog of viewpoints.  Every viewpoint exists in a
monocular version (MV, ``mv_size_bits`` bits) and a stereoscopic version
(SV, ``sv_ratio`` times larger); projecting MV into SV costs
``cycles_per_bit`` CPU cycles per bit.  Request probabilities follow a
Zipf law over the catalog.

Scenarios are generated deterministically from a (config, seed) pair and
round-trip losslessly through JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

import numpy as np

__all__ = [
    "Viewpoint",
    "Scenario",
    "GenerationConfig",
    "zipf_popularity",
    "generate_scenario",
    "validate_scenario",
    "scenario_to_json",
    "scenario_from_json",
    "paper_config",
    "desk_config",
    "micro_config",
]


def zipf_popularity(n: int, lam: float) -> np.ndarray:
    """Zipf request probabilities q_i = (1/i^lam) / sum_j (1/j^lam), i = 1..n.

    The result is non-increasing and sums to 1 (within 1e-12).  lam = 0
    gives the uniform distribution.
    """
    if n < 1:
        raise ValueError("catalog size must be at least 1")
    if lam < 0:
        raise ValueError("Zipf skewness must be nonnegative")
    ranks = np.arange(1, n + 1, dtype=float)
    weights = ranks ** (-float(lam))
    return weights / weights.sum()


@dataclass(frozen=True)
class Viewpoint:
    """One deliverable VR content unit.

    mv_size_bits is the size of the monocular version; the stereoscopic
    version a headset consumes is sv_ratio times larger (sv_ratio lives on
    the Scenario).  cycles_per_bit is the CPU cost of projecting MV to SV.
    """

    id: int
    mv_size_bits: float
    cycles_per_bit: float
    popularity: float

    def __post_init__(self):
        if self.mv_size_bits <= 0:
            raise ValueError(f"viewpoint {self.id}: mv_size_bits must be > 0")
        if self.cycles_per_bit <= 0:
            raise ValueError(f"viewpoint {self.id}: cycles_per_bit must be > 0")
        if not (0 < self.popularity <= 1):
            raise ValueError(f"viewpoint {self.id}: popularity must be in (0, 1]")


@dataclass(frozen=True)
class GenerationConfig:
    """Parameters for random scenario generation.

    Defaults reproduce the large evaluation preset: 40 SBSs and 100 HMDs in
    a 100 m x 100 m area, 100 viewpoints of 10-30 Mb, 30 dBm (1 W) transmit
    power and a 1 GHz downlink shared equally among HMDs.  Constants the
    evaluation setting leaves open (sv_ratio, zipf_lambda, CPU speeds,
    energy coefficients, backhaul delay, caches, budgets, channel model)
    carry declared defaults here so every emitted result is reproducible.
    """

    sbs_count: int = 40
    hmd_count: int = 100
    viewpoint_count: int = 100
    area_m: float = 100.0
    size_min_bits: float = 10e6
    size_max_bits: float = 30e6
    cycles_per_bit: float = 50.0
    zipf_lambda: float = 0.8
    sv_ratio: float = 4.0
    total_power_w: float = 1.0          # 30 dBm
    total_bandwidth_hz: float = 1e9
    bandwidth_per_hmd_hz: float | None = None  # default: total / hmd_count
    noise_power_w: float = 1e-10
    orthogonality: float = 0.1
    mes_cpu_hz: float = 1e10
    hmd_cpu_hz: float = 2e9
    mes_energy_coeff: float = 1e-27
    hmd_energy_coeff: float = 1e-27
    mes_cache_bits: float = 200e6
    hmd_cache_bits: float = 40e6
    mes_energy_budget_j: float = 1e4
    hmd_energy_budget_j: float = 1e2
    backhaul_delay_s: float = 0.1
    # Deterministic distance-based channel: gain = ref_gain * max(d, ref_dist)^-exponent
    pathloss_ref_gain: float = 1e-3
    pathloss_ref_distance_m: float = 1.0
    pathloss_exponent: float = 3.5

    def validate(self) -> None:
        if min(self.sbs_count, self.hmd_count, self.viewpoint_count) < 1:
            raise ValueError("counts must be at least 1")
        if self.area_m <= 0:
            raise ValueError("area side must be positive")
        if not (0 < self.size_min_bits <= self.size_max_bits):
            raise ValueError("viewpoint sizes must satisfy 0 < min <= max")
        for name in ("cycles_per_bit", "total_power_w", "total_bandwidth_hz",
                     "noise_power_w", "mes_cpu_hz", "hmd_cpu_hz",
                     "mes_energy_coeff", "hmd_energy_coeff",
                     "mes_energy_budget_j", "hmd_energy_budget_j",
                     "pathloss_ref_gain", "pathloss_ref_distance_m",
                     "pathloss_exponent"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mes_cache_bits < 0 or self.hmd_cache_bits < 0:
            raise ValueError("cache capacities must be nonnegative")
        if self.backhaul_delay_s < 0:
            raise ValueError("backhaul delay must be nonnegative")


@dataclass(frozen=True)
class Scenario:
    """Immutable world description.

    Array shapes: channel_gain is (M, U); per-node capacity and budget
    vectors have length M (MES side) or U (HMD side).  Positions are kept
    for generation provenance and the distance-based baselines.
    """

    sbs_count: int
    hmd_count: int
    viewpoints: tuple[Viewpoint, ...]
    sv_ratio: float
    channel_gain: np.ndarray            # (M, U) linear power gain
    bandwidth_per_hmd: float            # Hz
    noise_power: float                  # W
    orthogonality: float                # intra-cell interference factor in [0, 1]
    total_power: float                  # W, per-SBS budget
    mes_cpu_hz: float
    hmd_cpu_hz: float
    mes_energy_coeff: float
    hmd_energy_coeff: float
    mes_cache_bits: np.ndarray          # (M,)
    hmd_cache_bits: np.ndarray          # (U,)
    mes_energy_budget: np.ndarray       # (M,) joules
    hmd_energy_budget: np.ndarray       # (U,) joules
    backhaul_delay: float               # s
    sbs_positions: np.ndarray           # (M, 2) metres
    hmd_positions: np.ndarray           # (U, 2) metres
    seed: int | None = None
    generation: GenerationConfig | None = None

    def __post_init__(self):
        for name in ("channel_gain", "mes_cache_bits", "hmd_cache_bits",
                     "mes_energy_budget", "hmd_energy_budget",
                     "sbs_positions", "hmd_positions"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # --- catalog views -------------------------------------------------
    @property
    def viewpoint_count(self) -> int:
        return len(self.viewpoints)

    @property
    def mv_sizes(self) -> np.ndarray:
        return np.array([v.mv_size_bits for v in self.viewpoints])

    @property
    def sv_sizes(self) -> np.ndarray:
        return self.sv_ratio * self.mv_sizes

    @property
    def popularity(self) -> np.ndarray:
        return np.array([v.popularity for v in self.viewpoints])

    @property
    def cycles(self) -> np.ndarray:
        return np.array([v.cycles_per_bit for v in self.viewpoints])

    def mes_compute_energy(self) -> np.ndarray:
        """Per-viewpoint projection energy on an MES (J)."""
        return self.mes_energy_coeff * self.mes_cpu_hz ** 2 * self.mv_sizes * self.cycles

    def hmd_compute_energy(self) -> np.ndarray:
        """Per-viewpoint projection energy on an HMD (J)."""
        return self.hmd_energy_coeff * self.hmd_cpu_hz ** 2 * self.mv_sizes * self.cycles

    def mes_compute_delay(self) -> np.ndarray:
        """Per-viewpoint projection delay on an MES (s)."""
        return self.mv_sizes * self.cycles / self.mes_cpu_hz

    def hmd_compute_delay(self) -> np.ndarray:
        """Per-viewpoint projection delay on an HMD (s)."""
        return self.mv_sizes * self.cycles / self.hmd_cpu_hz

    def sbs_hmd_distances(self) -> np.ndarray:
        d = self.sbs_positions[:, None, :] - self.hmd_positions[None, :, :]
        return np.sqrt((d ** 2).sum(axis=2))


def generate_scenario(config: GenerationConfig, seed: int) -> Scenario:
    """Draw a Scenario from config with a fixed seed.

    SBS then HMD positions are i.i.d. uniform in the square (drawn in that
    order); viewpoint MV sizes are uniform in [size_min, size_max]; channel
    gains follow the deterministic path-loss law.  Identical (config, seed)
    gives a bit-identical Scenario.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    m, u, n = config.sbs_count, config.hmd_count, config.viewpoint_count

    sbs_pos = rng.uniform(0.0, config.area_m, size=(m, 2))
    hmd_pos = rng.uniform(0.0, config.area_m, size=(u, 2))
    sizes = rng.uniform(config.size_min_bits, config.size_max_bits, size=n)

    q = zipf_popularity(n, config.zipf_lambda)
    viewpoints = tuple(
        Viewpoint(id=i + 1, mv_size_bits=float(sizes[i]),
                  cycles_per_bit=config.cycles_per_bit, popularity=float(q[i]))
        for i in range(n)
    )

    diff = sbs_pos[:, None, :] - hmd_pos[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    dist = np.maximum(dist, config.pathloss_ref_distance_m)
    gain = config.pathloss_ref_gain * dist ** (-config.pathloss_exponent)

    if config.bandwidth_per_hmd_hz is not None:
        w = config.bandwidth_per_hmd_hz
    else:
        w = config.total_bandwidth_hz / u

    return Scenario(
        sbs_count=m,
        hmd_count=u,
        viewpoints=viewpoints,
        sv_ratio=config.sv_ratio,
        channel_gain=gain,
        bandwidth_per_hmd=float(w),
        noise_power=config.noise_power_w,
        orthogonality=config.orthogonality,
        total_power=config.total_power_w,
        mes_cpu_hz=config.mes_cpu_hz,
        hmd_cpu_hz=config.hmd_cpu_hz,
        mes_energy_coeff=config.mes_energy_coeff,
        hmd_energy_coeff=config.hmd_energy_coeff,
        mes_cache_bits=np.full(m, config.mes_cache_bits),
        hmd_cache_bits=np.full(u, config.hmd_cache_bits),
        mes_energy_budget=np.full(m, config.mes_energy_budget_j),
        hmd_energy_budget=np.full(u, config.hmd_energy_budget_j),
        backhaul_delay=config.backhaul_delay_s,
        sbs_positions=sbs_pos,
        hmd_positions=hmd_pos,
        seed=seed,
        generation=config,
    )


def validate_scenario(s: Scenario) -> list[str]:
    """Check every Scenario invariant; returns one message per violation.

    Reports rather than raises so callers can surface all problems at once.
    """
    out: list[str] = []
    if s.sbs_count < 1 or s.hmd_count < 1:
        out.append("sbs_count and hmd_count must be at least 1")
    if len(s.viewpoints) < 1:
        out.append("viewpoint catalog must be non-empty")
    if s.sv_ratio <= 2:
        out.append(f"sv_ratio must exceed 2 (got {s.sv_ratio})")
    if not (0 <= s.orthogonality <= 1):
        out.append(f"orthogonality must lie in [0, 1] (got {s.orthogonality})")
    if s.channel_gain.shape != (s.sbs_count, s.hmd_count):
        out.append(
            f"channel_gain must be {s.sbs_count}x{s.hmd_count} "
            f"(got {s.channel_gain.shape})")
    elif not np.all(s.channel_gain > 0):
        out.append("channel gains must be strictly positive")
    for name in ("bandwidth_per_hmd", "noise_power", "total_power",
                 "mes_cpu_hz", "hmd_cpu_hz", "mes_energy_coeff",
                 "hmd_energy_coeff"):
        if getattr(s, name) <= 0:
            out.append(f"{name} must be strictly positive")
    if s.backhaul_delay < 0:
        out.append("backhaul_delay must be nonnegative")
    for name, size in (("mes_cache_bits", s.sbs_count),
                       ("hmd_cache_bits", s.hmd_count),
                       ("mes_energy_budget", s.sbs_count),
                       ("hmd_energy_budget", s.hmd_count)):
        arr = getattr(s, name)
        if arr.shape != (size,):
            out.append(f"{name} must have length {size}")
        elif np.any(arr < 0):
            out.append(f"{name} entries must be nonnegative")
    for v in s.viewpoints:
        if v.mv_size_bits <= 0 or v.cycles_per_bit <= 0:
            out.append(f"viewpoint {v.id}: sizes and cycle counts must be positive")
        if not (0 < v.popularity <= 1):
            out.append(f"viewpoint {v.id}: popularity must lie in (0, 1]")
    total_q = sum(v.popularity for v in s.viewpoints)
    if abs(total_q - 1.0) > 1e-9:
        out.append(f"catalog popularities must sum to 1 (got {total_q!r})")
    return out


# --- JSON round trip ---------------------------------------------------

def scenario_to_json(s: Scenario) -> str:
    doc = {
        "sbs_count": s.sbs_count,
        "hmd_count": s.hmd_count,
        "viewpoints": [
            {"id": v.id, "mv_size_bits": v.mv_size_bits,
             "cycles_per_bit": v.cycles_per_bit, "popularity": v.popularity}
            for v in s.viewpoints
        ],
        "sv_ratio": s.sv_ratio,
        "channel_gain": s.channel_gain.tolist(),
        "bandwidth_per_hmd": s.bandwidth_per_hmd,
        "noise_power": s.noise_power,
        "orthogonality": s.orthogonality,
        "total_power": s.total_power,
        "mes_cpu_hz": s.mes_cpu_hz,
        "hmd_cpu_hz": s.hmd_cpu_hz,
        "mes_energy_coeff": s.mes_energy_coeff,
        "hmd_energy_coeff": s.hmd_energy_coeff,
        "mes_cache_bits": s.mes_cache_bits.tolist(),
        "hmd_cache_bits": s.hmd_cache_bits.tolist(),
        "mes_energy_budget": s.mes_energy_budget.tolist(),
        "hmd_energy_budget": s.hmd_energy_budget.tolist(),
        "backhaul_delay": s.backhaul_delay,
        "sbs_positions": s.sbs_positions.tolist(),
        "hmd_positions": s.hmd_positions.tolist(),
        "seed": s.seed,
        "generation": None if s.generation is None else {
            f.name: getattr(s.generation, f.name) for f in fields(s.generation)
        },
    }
    return json.dumps(doc, indent=2)


def scenario_from_json(text: str) -> Scenario:
    doc = json.loads(text)
    gen = doc.get("generation")
    return Scenario(
        sbs_count=doc["sbs_count"],
        hmd_count=doc["hmd_count"],
        viewpoints=tuple(Viewpoint(**v) for v in doc["viewpoints"]),
        sv_ratio=doc["sv_ratio"],
        channel_gain=np.array(doc["channel_gain"]),
        bandwidth_per_hmd=doc["bandwidth_per_hmd"],
        noise_power=doc["noise_power"],
        orthogonality=doc["orthogonality"],
        total_power=doc["total_power"],
        mes_cpu_hz=doc["mes_cpu_hz"],
        hmd_cpu_hz=doc["hmd_cpu_hz"],
        mes_energy_coeff=doc["mes_energy_coeff"],
        hmd_energy_coeff=doc["hmd_energy_coeff"],
        mes_cache_bits=np.array(doc["mes_cache_bits"]),
        hmd_cache_bits=np.array(doc["hmd_cache_bits"]),
        mes_energy_budget=np.array(doc["mes_energy_budget"]),
        hmd_energy_budget=np.array(doc["hmd_energy_budget"]),
        backhaul_delay=doc["backhaul_delay"],
        sbs_positions=np.array(doc["sbs_positions"]),
        hmd_positions=np.array(doc["hmd_positions"]),
        seed=doc.get("seed"),
        generation=None if gen is None else GenerationConfig(**gen),
    )


# --- presets ------------------------------------------------------------

def paper_config() -> GenerationConfig:
    """Large preset: 40 SBSs, 100 HMDs, 100 viewpoints of 10-30 Mb."""
    return GenerationConfig()


def desk_config(**overrides) -> GenerationConfig:
    """Desk-scale preset solvable in seconds: 8 SBSs, 12 HMDs, 20 viewpoints.

    Sizes shrink to 1-3 Mb with caches, budgets, area and backhaul chosen
    so that caching, association and power allocation all matter: the
    dense 45 m square keeps several SBSs within reach of every HMD, one
    MES holds a handful of MV versions, and a cloud round trip costs far
    more than an edge transmission.
    """
    base = dict(
        sbs_count=8, hmd_count=12, viewpoint_count=20,
        area_m=45.0,
        size_min_bits=1e6, size_max_bits=3e6,
        total_bandwidth_hz=4e8,
        mes_cache_bits=12e6, hmd_cache_bits=2e6,
        mes_energy_budget_j=500.0, hmd_energy_budget_j=2.0,
        backhaul_delay_s=1.0,
    )
    base.update(overrides)
    return GenerationConfig(**base)


def micro_config(**overrides) -> GenerationConfig:
    """Tiny preset for exhaustive enumeration: 2 SBSs, 2 HMDs, 3 viewpoints.

    Caches stay scarce so placement decisions bind, while bandwidth is
    plentiful: the interesting structure sits in caching/offloading, which
    keeps exact branch-and-bound certification fast.
    """
    base = dict(
        sbs_count=2, hmd_count=2, viewpoint_count=3,
        area_m=50.0, size_min_bits=1e6, size_max_bits=3e6,
        total_bandwidth_hz=2e8,
        mes_cache_bits=8e6, hmd_cache_bits=2e6,
        mes_energy_budget_j=100.0, hmd_energy_budget_j=5.0,
    )
    base.update(overrides)
    return GenerationConfig(**base)
