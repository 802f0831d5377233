"""Deployment geometry: positions, half-space assignment, angles and distances.

The panel is a UPA in the Y-Z plane at x = 0; the reflection half-space ``r``
is x < 0, refraction ``t`` is x > 0. Elevation is measured from the horizontal
plane (sin phi = z-component of the unit direction) and azimuth from the +Y
panel axis (cos phi * cos varphi = y-component), matching the steering-vector
phase structure. A Y-Z panel cannot resolve the sign of the x-component, so
azimuth lives in [0, pi].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ScenarioConfig

SPACES = ("r", "t")

BS_POS = np.array([0.0, 30.0, 3.0])
RIS_POS = np.array([0.0, 0.0, 5.0])
BOX_X = (-30.0, 30.0)
BOX_Y = (-30.0, 30.0)

_MAX_RESAMPLES = 10**6


def direction_angles(origin, point):
    """(elevation, azimuth) in radians of ``point`` seen from ``origin``."""
    delta = np.asarray(point, dtype=float) - np.asarray(origin, dtype=float)
    dist = float(np.linalg.norm(delta))
    if dist <= 0.0:
        raise ValueError("coincident points have no direction")
    phi = np.arcsin(np.clip(delta[2] / dist, -1.0, 1.0))
    cos_phi = np.cos(phi)
    if cos_phi < 1e-12:
        varphi = 0.0
    else:
        varphi = float(np.arccos(np.clip(delta[1] / (dist * cos_phi), -1.0, 1.0)))
    return float(phi), varphi


def angles_to_position(origin, phi, varphi, dist, space):
    """Place a point at range ``dist`` from ``origin`` along (phi, varphi) in ``space``."""
    u_z = np.sin(phi)
    u_y = np.cos(phi) * np.cos(varphi)
    u_x_sq = max(0.0, 1.0 - u_y**2 - u_z**2)
    u_x = np.sqrt(u_x_sq)
    if space == "r":
        u_x = -u_x
    return np.asarray(origin, dtype=float) + dist * np.array([u_x, u_y, u_z])


@dataclass
class Geometry:
    """Realized positions plus the derived distances and angles used by the channels."""

    bs_pos: np.ndarray
    ris_pos: np.ndarray
    user_pos: np.ndarray          # (K, 3)
    target_pos: np.ndarray        # (J, 3)
    user_space: list              # K labels in {"r", "t"}, first K_r are "r"
    target_space: list            # J labels, first J_r are "r"
    d_br: float = field(init=False)
    d_ru: np.ndarray = field(init=False)
    d_rt: np.ndarray = field(init=False)
    bs_angles: tuple = field(init=False)
    user_angles: np.ndarray = field(init=False)    # (K, 2) of (phi, varphi)
    target_angles: np.ndarray = field(init=False)  # (J, 2)

    def __post_init__(self):
        self.user_pos = np.atleast_2d(np.asarray(self.user_pos, dtype=float))
        self.target_pos = (np.asarray(self.target_pos, dtype=float).reshape(-1, 3)
                           if len(self.target_pos) else np.zeros((0, 3)))
        self.d_br = float(np.linalg.norm(self.bs_pos - self.ris_pos))
        self.d_ru = np.linalg.norm(self.user_pos - self.ris_pos, axis=1)
        self.d_rt = (np.linalg.norm(self.target_pos - self.ris_pos, axis=1)
                     if len(self.target_pos) else np.zeros(0))
        if self.d_br <= 0 or np.any(self.d_ru <= 0) or np.any(self.d_rt <= 0):
            raise ValueError("all distances from the panel must be strictly positive")
        self.bs_angles = direction_angles(self.ris_pos, self.bs_pos)
        self.user_angles = np.array(
            [direction_angles(self.ris_pos, p) for p in self.user_pos])
        self.target_angles = (np.array(
            [direction_angles(self.ris_pos, p) for p in self.target_pos])
            if len(self.target_pos) else np.zeros((0, 2)))

    def users_in(self, space: str):
        return [k for k, s in enumerate(self.user_space) if s == space]

    def targets_in(self, space: str):
        return [j for j, s in enumerate(self.target_space) if s == space]


def _space_of(x: float) -> str:
    return "r" if x < 0.0 else "t"


def _sample_entities(rng, count_r: int, count_t: int):
    """Rejection-sample positions in the deployment box until both quotas fill."""
    pos_r, pos_t = [], []
    for _ in range(_MAX_RESAMPLES):
        if len(pos_r) == count_r and len(pos_t) == count_t:
            break
        x = rng.uniform(*BOX_X)
        y = rng.uniform(*BOX_Y)
        p = np.array([x, y, 0.0])
        bucket = pos_r if _space_of(x) == "r" else pos_t
        quota = count_r if _space_of(x) == "r" else count_t
        if len(bucket) < quota:
            bucket.append(p)
    else:
        raise RuntimeError("rejection sampling exceeded the resample cap")
    return pos_r, pos_t


def _validate_explicit(name: str, rows, count_r: int, count_t: int):
    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    for i, p in enumerate(arr):
        expected = "r" if i < count_r else "t"
        if _space_of(p[0]) != expected:
            raise ConfigError(
                f"{name}[{i}] = {p.tolist()} lies in half-space "
                f"{_space_of(p[0])!r} but index order requires {expected!r}")
    return arr


def sample_geometry(cfg: ScenarioConfig, rng: np.random.Generator) -> Geometry:
    """Realize user/target positions for one scenario.

    Users and targets without explicit placement are drawn uniformly in the
    deployment box with half-space quotas filled by rejection sampling. The
    same rng state always yields the same geometry.
    """
    if cfg.user_positions is not None:
        user_pos = _validate_explicit("user_positions", cfg.user_positions,
                                      cfg.users_r, cfg.users_t)
    else:
        pos_r, pos_t = _sample_entities(rng, cfg.users_r, cfg.users_t)
        user_pos = np.array(pos_r + pos_t) if (pos_r or pos_t) else np.zeros((0, 3))

    if cfg.target_positions is not None:
        target_pos = _validate_explicit("target_positions", cfg.target_positions,
                                        cfg.targets_r, cfg.targets_t)
    elif cfg.target_angles_deg is not None:
        rows = []
        for j, (horiz_deg, vert_deg) in enumerate(cfg.target_angles_deg):
            space = "r" if j < cfg.targets_r else "t"
            rows.append(angles_to_position(
                RIS_POS, np.deg2rad(vert_deg), np.deg2rad(horiz_deg),
                cfg.target_range_m, space))
        target_pos = np.array(rows) if rows else np.zeros((0, 3))
    else:
        pos_r, pos_t = _sample_entities(rng, cfg.targets_r, cfg.targets_t)
        target_pos = np.array(pos_r + pos_t) if (pos_r or pos_t) else np.zeros((0, 3))

    return Geometry(
        bs_pos=BS_POS.copy(),
        ris_pos=RIS_POS.copy(),
        user_pos=user_pos,
        target_pos=target_pos,
        user_space=["r"] * cfg.users_r + ["t"] * cfg.users_t,
        target_space=["r"] * cfg.targets_r + ["t"] * cfg.targets_t,
    )
