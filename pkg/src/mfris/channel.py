"""Channel synthesis: steering vectors, Rician links and multi-target responses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .geometry import Geometry, SPACES

_KAPPA_LOS_ONLY = 1e12  # Rician factors at or above this collapse to the LoS component


def steering_vector(theta_tilde: float, n: int) -> np.ndarray:
    """Phase ramp [1, e^{-j2pi theta}, ..., e^{-j2pi (n-1) theta}]."""
    if n < 1:
        raise ValueError(f"steering vector needs n >= 1, got {n}")
    return np.exp(-2j * np.pi * theta_tilde * np.arange(n))


def ris_tx_steering(phi, varphi, m_y, m_z, spacing=0.5) -> np.ndarray:
    """Panel departure/arrival steering b(phi, varphi), length m_y * m_z.

    Vertical ramp over the m_z rows (spacing * sin phi) Kronecker the
    horizontal ramp over the m_y columns (spacing * cos phi * cos varphi).
    """
    vert = steering_vector(spacing * np.sin(phi), m_z)
    horiz = steering_vector(spacing * np.cos(phi) * np.cos(varphi), m_y)
    return np.kron(vert, horiz)


def sensor_rx_steering(phi, varphi, m_v, m_h, spacing=0.5) -> np.ndarray:
    """Sensing-array steering a(phi, varphi): vertical block stacked over horizontal."""
    vert = steering_vector(spacing * np.sin(phi), m_v)
    horiz = steering_vector(spacing * np.cos(phi) * np.cos(varphi), m_h)
    return np.concatenate([vert, horiz])


def bs_los(phi, varphi, m_y, m_z, n_tx, spacing=0.5) -> np.ndarray:
    """Rank-one LoS matrix between the BS array and the panel (m_y*m_z x n_tx)."""
    panel = ris_tx_steering(phi, varphi, m_y, m_z, spacing)
    bs = steering_vector(spacing * np.cos(phi) * np.cos(varphi), n_tx)
    return np.outer(panel, bs)


def rician_channel(los, path_gain, kappa, rng) -> np.ndarray:
    """Rician-faded channel sqrt(g) (sqrt(k/(1+k)) LoS + sqrt(1/(1+k)) NLoS).

    The NLoS part is i.i.d. circularly-symmetric unit-variance Gaussian, so
    E||H||_F^2 = path_gain * los.size.
    """
    los = np.asarray(los)
    if kappa >= _KAPPA_LOS_ONLY:
        return np.sqrt(path_gain) * los.astype(complex)
    nlos = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / np.sqrt(2)
    mix = np.sqrt(kappa / (kappa + 1.0)) * los + np.sqrt(1.0 / (kappa + 1.0)) * nlos
    return np.sqrt(path_gain) * mix


@dataclass
class TargetResponse:
    """Factorized multi-target response G = A diag(alpha) B^H for one half-space."""

    arrival: np.ndarray      # A, (M_s, J_d) sensing-side steering columns
    departure: np.ndarray    # B, (M, J_d) panel-side steering columns
    alpha: np.ndarray        # (J_d,) complex round-trip echo coefficients
    angles: np.ndarray       # (J_d, 2) of (phi, varphi)

    @property
    def matrix(self) -> np.ndarray:
        return self.arrival @ np.diag(self.alpha) @ self.departure.conj().T


def target_response(angles, distances, cfg: ScenarioConfig, rng,
                    m_y=None, m_z=None) -> TargetResponse:
    """Synthesize the echo response of the targets in one half-space.

    |alpha_j|^2 carries the two-hop (panel-target-panel) path loss
    h0 * d^(-2 alpha0) scaled by the radar cross-section, with uniform phase.
    """
    m_y = cfg.m_y if m_y is None else m_y
    m_z = cfg.m_z if m_z is None else m_z
    angles = np.asarray(angles, dtype=float).reshape(-1, 2)
    n_targets = len(angles)
    m_elems = m_y * m_z
    arrival = np.zeros((cfg.m_sense, n_targets), dtype=complex)
    departure = np.zeros((m_elems, n_targets), dtype=complex)
    alpha = np.zeros(n_targets, dtype=complex)
    for j in range(n_targets):
        phi, varphi = angles[j]
        arrival[:, j] = sensor_rx_steering(phi, varphi, cfg.m_v, cfg.m_h,
                                           cfg.element_spacing_ratio)
        departure[:, j] = ris_tx_steering(phi, varphi, m_y, m_z,
                                          cfg.element_spacing_ratio)
        magnitude = np.sqrt(cfg.h0 * distances[j] ** (-2.0 * cfg.alpha0) * cfg.rcs)
        alpha[j] = magnitude * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    return TargetResponse(arrival=arrival, departure=departure, alpha=alpha, angles=angles)


@dataclass
class ChannelSet:
    """All realized links for one scenario.

    bs_ris: (M, N); ris_user[k]: (M,); bs_sensor[d]: (M_s, N);
    targets[d]: factorized response whose ``matrix`` is G_d (M_s, M).
    """

    bs_ris: np.ndarray
    ris_user: list
    bs_sensor: dict
    targets: dict
    geometry: Geometry
    m_elems: int
    m_y: int
    m_z: int

    def response(self, space: str) -> np.ndarray:
        return self.targets[space].matrix

    def users_in(self, space: str):
        return self.geometry.users_in(space)

    def user_space(self, k: int) -> str:
        return self.geometry.user_space[k]


def build_channels(geom: Geometry, cfg: ScenarioConfig, rng) -> ChannelSet:
    """Draw every channel for one scenario in a fixed order (reproducible per rng state)."""
    m_y, m_z = cfg.ris_upa()
    m_elems = m_y * m_z
    spacing = cfg.element_spacing_ratio
    kappa = cfg.rician_k

    l_br = cfg.h0 * geom.d_br ** (-cfg.alpha0)
    los_bs = bs_los(*geom.bs_angles, m_y, m_z, cfg.n_tx, spacing)
    bs_ris = rician_channel(los_bs, l_br, kappa, rng)

    ris_user = []
    for k in range(cfg.users):
        phi, varphi = geom.user_angles[k]
        los_u = ris_tx_steering(phi, varphi, m_y, m_z, spacing)
        gain = cfg.h0 * geom.d_ru[k] ** (-cfg.alpha0)
        ris_user.append(rician_channel(los_u, gain, kappa, rng))

    sensor_los = np.outer(
        sensor_rx_steering(*geom.bs_angles, cfg.m_v, cfg.m_h, spacing),
        steering_vector(spacing * np.cos(geom.bs_angles[0]) * np.cos(geom.bs_angles[1]),
                        cfg.n_tx))
    bs_sensor = {d: rician_channel(sensor_los, l_br, kappa, rng) for d in SPACES}

    targets = {}
    for d in SPACES:
        idx = geom.targets_in(d)
        targets[d] = target_response(
            geom.target_angles[idx] if idx else np.zeros((0, 2)),
            geom.d_rt[idx] if idx else np.zeros(0),
            cfg, rng, m_y=m_y, m_z=m_z)

    return ChannelSet(bs_ris=bs_ris, ris_user=ris_user, bs_sensor=bs_sensor,
                      targets=targets, geometry=geom, m_elems=m_elems, m_y=m_y, m_z=m_z)


def _write_block(fh, name, array):
    array = np.atleast_2d(np.asarray(array, dtype=complex))
    fh.write(f"# {name} {array.shape[0]} {array.shape[1]}\n")
    for row in array:
        fh.write(";".join(f"{z.real:.17g},{z.imag:.17g}" for z in row) + "\n")


def _read_blocks(lines):
    blocks = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line.startswith("#"):
            i += 1
            continue
        name, rows, cols = line[1:].split()
        rows, cols = int(rows), int(cols)
        data = np.zeros((rows, cols), dtype=complex)
        for r in range(rows):
            cells = lines[i + 1 + r].strip().split(";")
            for c, cell in enumerate(cells):
                re, im = cell.split(",")
                data[r, c] = float(re) + 1j * float(im)
        blocks[name] = data
        i += 1 + rows
    return blocks


def dump_channels(path, channels: ChannelSet):
    """Write the realized links as text blocks of 're,im' cells (regression fixtures)."""
    with open(path, "w") as fh:
        _write_block(fh, "bs_ris", channels.bs_ris)
        for k, g in enumerate(channels.ris_user):
            _write_block(fh, f"ris_user_{k}", g.reshape(1, -1))
        for d in SPACES:
            _write_block(fh, f"bs_sensor_{d}", channels.bs_sensor[d])
            _write_block(fh, f"response_{d}", channels.response(d))


def load_channel_blocks(path) -> dict:
    """Read a channel dump back into named complex arrays."""
    with open(path) as fh:
        lines = fh.readlines()
    return _read_blocks(lines)
