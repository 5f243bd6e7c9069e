"""Synthetic EMI-like survey sites with a planted target signature.

Background samples are correlated Gaussians ``mu + C^(1/2) z``. A target adds
``C^(1/2) (a * u)`` where ``u`` is a unit vector in (true) whitened space and
the amplitude is

    a = snr * depth * metal_gain * sqrt(d) * exp(-r^2 / (2 sigma^2))

with ``r`` the distance to the target center and ``sigma`` half the response
radius, so ``snr`` compares the peak target norm with the RMS norm of the
whitened background. Depth only scales the magnitude, so every target shares
one response shape. ``metal_gain`` defaults to 1 for every class; lowering
it for the low- and no-metal classes makes their effective snr smaller
than ``snr``.

Layout: lane ``L`` is a row of grids; each grid is a square raster sweep with
one buried target, preceded by a short blank sweep. Positive bags are the
grid samples inside the response radius; each lane contributes one negative
bag built from the blank sweeps of its low- and no-metal grids (high-metal
blank sweeps may carry bleed-over response and are left out).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Bag, MilDataset, Sweep
from .evaluation import GroundTruth, Target
from .exceptions import ConfigError

__all__ = [
    "SynthConfig",
    "Site",
    "generate_site",
    "background_model",
    "sample_background",
    "make_mil_dataset",
]


@dataclass(frozen=True)
class SynthConfig:
    d: int = 8
    lanes: int = 5
    grids_per_lane: int = 4
    target_signature_seed: int | None = None
    depth_scale_range: tuple[float, float] = (0.3, 1.0)
    background_condition: float = 100.0
    snr: float = 3.0
    samples_per_sweep: int = 400
    blank_samples: int = 100
    grid_size: float = 2.0
    response_radius: float = 0.35
    metal_class_mix: tuple[float, float, float] = (0.4, 0.4, 0.2)
    metal_gain: tuple[float, float, float] = (1.0, 1.0, 1.0)
    blank_bleed: float = 0.15
    position_jitter: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise ConfigError("d must be >= 2")
        if self.lanes < 2:
            raise ConfigError("a site needs at least 2 lanes")
        if self.grids_per_lane < 1:
            raise ConfigError("grids_per_lane must be >= 1")
        if not self.snr > 0:
            raise ConfigError("snr must be > 0")
        lo, hi = self.depth_scale_range
        if not 0 < lo <= hi:
            raise ConfigError("depth_scale_range must be positive with low <= high")
        if self.background_condition < 1:
            raise ConfigError("background_condition must be >= 1")
        if self.samples_per_sweep < 4 or self.blank_samples < 2:
            raise ConfigError("sweeps are too small")
        if not self.response_radius > 0 or not self.grid_size > 0:
            raise ConfigError("response_radius and grid_size must be > 0")
        mix = np.asarray(self.metal_class_mix, dtype=float)
        if mix.shape != (3,) or np.any(mix < 0) or mix.sum() == 0:
            raise ConfigError("metal_class_mix is three nonnegative proportions (high, low, none)")
        object.__setattr__(self, "depth_scale_range", (float(lo), float(hi)))
        object.__setattr__(self, "metal_class_mix", tuple(float(v) for v in mix))
        gain = tuple(float(v) for v in self.metal_gain)
        if len(gain) != 3 or not all(g > 0 for g in gain):
            raise ConfigError("metal_gain is three positive multipliers (high, low, none)")
        object.__setattr__(self, "metal_gain", gain)


@dataclass(frozen=True, eq=False)
class Site:
    dataset: MilDataset
    sweeps: tuple[Sweep, ...]
    truth: GroundTruth
    planted_signature: np.ndarray
    planted_whitened: np.ndarray
    background_mean: np.ndarray
    background_covariance: np.ndarray
    config: SynthConfig = field(repr=False, default=None)

    def __iter__(self):
        # unpack as (dataset, sweeps, truth, planted_signature)
        return iter((self.dataset, self.sweeps, self.truth, self.planted_signature))


def _sym_sqrt(cov):
    evals, evecs = np.linalg.eigh(cov)
    return (evecs * np.sqrt(evals)) @ evecs.T


def background_model(config: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """The (mean, covariance) the generator draws background samples from."""
    rng = np.random.default_rng([config.seed, 1])
    d = config.d
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    cond = config.background_condition
    evals = np.exp(rng.uniform(-0.5 * np.log(cond), 0.5 * np.log(cond), size=d))
    cov = (q * evals) @ q.T
    mean = rng.normal(0.0, 2.0, size=d)
    return mean, 0.5 * (cov + cov.T)


def sample_background(config: SynthConfig, n: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng([config.seed, 2]) if rng is None else rng
    mean, cov = background_model(config)
    return mean + rng.standard_normal((n, config.d)) @ _sym_sqrt(cov)


def _planted(config: SynthConfig) -> np.ndarray:
    seed = config.seed if config.target_signature_seed is None else config.target_signature_seed
    u = np.random.default_rng([seed, 3]).standard_normal(config.d)
    return u / np.linalg.norm(u)


def _raster(n, x0, y0, width, height, rng, jitter):
    nx = max(2, int(round(math.sqrt(n * width / height))))
    ny = max(2, int(math.ceil(n / nx)))
    xs = x0 + (np.arange(nx) + 0.5) * width / nx
    ys = y0 + (np.arange(ny) + 0.5) * height / ny
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])[:n]
    return pts + rng.normal(0.0, jitter, size=pts.shape)


def generate_site(config: SynthConfig = SynthConfig()) -> Site:
    mean, cov = background_model(config)
    root = _sym_sqrt(cov)
    u = _planted(config)
    planted_raw = root @ u
    rng = np.random.default_rng([config.seed, 4])
    d = config.d
    sigma = config.response_radius / 2
    mix = np.asarray(config.metal_class_mix) / sum(config.metal_class_mix)
    classes = ("high", "low", "none")
    gains = dict(zip(classes, config.metal_gain))
    pitch = config.grid_size + 1.0
    lane_spacing = config.grid_size + 1.0
    blank_depth = 0.5

    bags, sweeps, targets = [], [], []
    blanks_by_lane: dict[str, list] = {}
    high_blanks: dict[str, list] = {}
    for li in range(config.lanes):
        lane = str(li + 1)
        y0 = li * lane_spacing
        for gi in range(config.grids_per_lane):
            gid = f"L{lane}G{gi + 1}"
            x0 = gi * pitch
            metal = classes[int(rng.choice(3, p=mix))]
            depth = rng.uniform(*config.depth_scale_range)
            half = config.grid_size / 2
            center = np.array([x0 + half, y0 + half]) + rng.uniform(-0.25, 0.25, 2) * config.grid_size
            amp = config.snr * depth * gains[metal] * math.sqrt(d)
            targets.append(Target(f"T-{gid}", (float(center[0]), float(center[1])),
                                  config.response_radius, metal, lane))

            pos = _raster(config.samples_per_sweep, x0, y0, config.grid_size, config.grid_size,
                          rng, config.position_jitter)
            r2 = ((pos - center) ** 2).sum(axis=1)
            a = amp * np.exp(-r2 / (2 * sigma * sigma))
            z = rng.standard_normal((len(pos), d)) + a[:, None] * u
            feats = mean + z @ root
            sweeps.append(Sweep(gid, feats, pos, lane))
            inside = np.flatnonzero(r2 <= config.response_radius ** 2)
            if inside.size == 0:
                inside = np.array([int(np.argmin(r2))])
            bags.append(Bag(gid, 1, feats[inside], pos[inside], (gid,) * inside.size, lane))

            bpos = _raster(config.blank_samples, x0 - blank_depth - 0.2, y0, blank_depth,
                           config.grid_size, rng, config.position_jitter)
            zb = rng.standard_normal((len(bpos), d))
            if metal == "high":
                zb = zb + config.blank_bleed * amp * u
            bfeats = mean + zb @ root
            entry = (gid, bfeats, bpos)
            (high_blanks if metal == "high" else blanks_by_lane).setdefault(lane, []).append(entry)

    if not blanks_by_lane:
        # every grid is high metal; fall back to their blank sweeps
        blanks_by_lane = high_blanks
    for lane, entries in blanks_by_lane.items():
        bags.append(
            Bag(
                f"L{lane}-blank",
                0,
                np.concatenate([e[1] for e in entries]),
                np.concatenate([e[2] for e in entries]),
                tuple(f"{e[0]}-blank" for e in entries for _ in range(len(e[1]))),
                lane,
            )
        )
    return Site(
        MilDataset(tuple(bags)),
        tuple(sweeps),
        GroundTruth(tuple(targets)),
        planted_raw,
        u,
        mean,
        cov,
        config,
    )


def make_mil_dataset(
    n_pos: int,
    n_neg: int,
    n_pos_bags: int,
    d: int = 8,
    snr: float = 3.0,
    seed: int = 0,
    witness_fraction: float = 0.2,
    depth_scale_range: tuple[float, float] = (0.3, 1.0),
    n_neg_bags: int = 1,
) -> Site:
    """A site-free MIL dataset of prescribed size.

    ``n_pos`` instances are split as evenly as possible over ``n_pos_bags``
    positive bags; in each, ``ceil(witness_fraction * size)`` instances (at
    least one) carry the planted signature at amplitude
    ``snr * depth * sqrt(d)``. Negative instances are pure background.
    """
    if n_pos_bags < 1 or n_pos < n_pos_bags or n_neg < 2 or n_neg_bags < 1 or n_neg < n_neg_bags:
        raise ConfigError("inconsistent dataset sizes")
    cfg = SynthConfig(d=d, snr=snr, seed=seed, depth_scale_range=depth_scale_range)
    mean, cov = background_model(cfg)
    root = _sym_sqrt(cov)
    u = _planted(cfg)
    rng = np.random.default_rng([seed, 5])
    bags = []
    sizes = np.full(n_pos_bags, n_pos // n_pos_bags)
    sizes[: n_pos % n_pos_bags] += 1
    for j, n in enumerate(sizes):
        z = rng.standard_normal((n, d))
        k = max(1, int(math.ceil(witness_fraction * n)))
        depth = rng.uniform(*depth_scale_range, size=k)
        z[:k] += (snr * math.sqrt(d) * depth)[:, None] * u
        z = z[rng.permutation(n)]
        bags.append(Bag(f"P{j}", 1, mean + z @ root, lane_id="0"))
    neg_sizes = np.full(n_neg_bags, n_neg // n_neg_bags)
    neg_sizes[: n_neg % n_neg_bags] += 1
    for j, n in enumerate(neg_sizes):
        bags.append(Bag(f"N{j}", 0, mean + rng.standard_normal((n, d)) @ root, lane_id="0"))
    return Site(MilDataset(tuple(bags)), (), GroundTruth(()), root @ u, u, mean, cov, cfg)
