"""Per-element baseband channels: exact LoS, far-field rank-one model, fading.

Every LoS entry has the free-space form ``sqrt(alpha)/d * exp(-j 2 pi d / lambda)``
evaluated at the exact element distance ``d``. Channel vectors are 1-D complex
arrays in linear element order; channel matrices have shape ``(K_rx, K_tx)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import (
    GeometryError,
    PanelGeometry,
    boresight_angles,
    distance,
    pairwise_distances,
    point_to_panel_distances,
)

_U64 = 1 << 64


def free_space_ref_gain(wavelength: float) -> float:
    """Free-space power gain at 1 m, (lambda / 4 pi)^2."""
    return (wavelength / (4 * math.pi)) ** 2


@dataclass(frozen=True)
class PropagationParams:
    wavelength: float
    ref_gain: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.wavelength) and self.wavelength > 0):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if self.ref_gain is None:
            object.__setattr__(self, "ref_gain", free_space_ref_gain(self.wavelength))
        elif not (math.isfinite(self.ref_gain) and self.ref_gain > 0):
            raise ValueError(f"ref_gain must be positive, got {self.ref_gain}")

    @property
    def alpha(self) -> float:
        return self.ref_gain


@dataclass(frozen=True)
class RngStream:
    """Seeded, independently addressable random stream.

    The generator is numpy's PCG64 seeded from ``SeedSequence(seed,
    spawn_key=(stream_id, *subkeys))``; normals come from ``Generator.standard_normal``
    (ziggurat). The same (seed, stream_id, subkeys) always gives the same draws.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= value < _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")

    def generator(self, *subkeys: int) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *subkeys))
        return np.random.Generator(np.random.PCG64(seq))


def complex_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples: independent N(0, 1/2) real and imaginary parts."""
    shape = (int(shape),) if isinstance(shape, (int, np.integer)) else tuple(shape)
    draws = gen.standard_normal((2, *shape))
    return (draws[0] + 1j * draws[1]) * math.sqrt(0.5)


def los_from_distances(d: np.ndarray, prop: PropagationParams) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    return (math.sqrt(prop.alpha) / d) * np.exp(-2j * math.pi * d / prop.wavelength)


def los_vector(panel: PanelGeometry, point, prop: PropagationParams) -> np.ndarray:
    """LoS channel between a point and every element of ``panel``."""
    return los_from_distances(point_to_panel_distances(point, panel), prop)


def los_matrix_exact(
    tx_panel: PanelGeometry, rx_panel: PanelGeometry, prop: PropagationParams
) -> np.ndarray:
    """Exact LoS channel, entry (k2, k1) from tx element k1 to rx element k2."""
    return los_from_distances(pairwise_distances(tx_panel, rx_panel), prop)


@dataclass(frozen=True)
class SignatureDecomposition:
    """Rank-one inter-panel channel ``scale * outer(g2, g1)``."""

    g1: np.ndarray
    g2: np.ndarray
    scale: complex
    d_s: float


def signature_decomposition(
    tx_panel: PanelGeometry, rx_panel: PanelGeometry, prop: PropagationParams
) -> SignatureDecomposition:
    """Far-field signature vectors of the tx -> rx panel pair.

    Path-length differences are projected onto the anchor-to-anchor direction,
    so the phase ramp across each panel is linear in its grid indices.
    """
    link = np.asarray(rx_panel.anchor) - np.asarray(tx_panel.anchor)
    d_s = float(np.linalg.norm(link))
    if d_s == 0.0:
        raise GeometryError("panel anchors coincide")
    k = 2 * math.pi / prop.wavelength

    def ramp(panel: PanelGeometry) -> np.ndarray:
        om = boresight_angles(panel, link)
        ka, kb = panel.grid_indices()
        return ka * panel.spacing * math.cos(om.omega_a) + kb * panel.spacing * math.cos(om.omega_b)

    g1 = np.exp(1j * k * ramp(tx_panel))
    g2 = np.exp(-1j * k * ramp(rx_panel))
    scale = (math.sqrt(prop.alpha) / d_s) * np.exp(-1j * k * d_s)
    return SignatureDecomposition(g1=g1, g2=g2, scale=complex(scale), d_s=d_s)


def far_field_matrix(dec: SignatureDecomposition) -> np.ndarray:
    return dec.scale * np.outer(dec.g2, dec.g1)


def rank_one_margin(rx_panel: PanelGeometry, d_s: float, prop: PropagationParams) -> float:
    """How far ``d_s`` exceeds sqrt(K_rx) l^2 / lambda; larger means closer to rank one."""
    if not d_s > 0:
        raise ValueError(f"d_s must be positive, got {d_s}")
    return d_s / (math.sqrt(rx_panel.size) * rx_panel.spacing**2 / prop.wavelength)


def anchor_distance(a: PanelGeometry, b: PanelGeometry) -> float:
    return distance(a.anchor, b.anchor)


def rayleigh_from_distances(
    d: np.ndarray, prop: PropagationParams, gen: np.random.Generator
) -> np.ndarray:
    """Independent entries ~ sqrt(alpha)/d * CN(0, 1)."""
    d = np.asarray(d, dtype=float)
    return (math.sqrt(prop.alpha) / d) * complex_normal(gen, d.shape)


def rician_mix(los: np.ndarray, scatter_amplitude: np.ndarray, tau: float, gen) -> np.ndarray:
    """sqrt(tau/(tau+1)) * los + sqrt(1/(tau+1)) * scatter.

    ``tau = inf`` returns ``los`` itself (not a copy) without consuming draws;
    ``tau = 0`` returns the scattering draw alone.
    """
    tau = _check_tau(tau)
    if math.isinf(tau):
        return np.asarray(los)
    scatter = scatter_amplitude * complex_normal(gen, np.shape(scatter_amplitude))
    if tau == 0:
        return scatter
    return math.sqrt(tau / (tau + 1)) * los + math.sqrt(1 / (tau + 1)) * scatter


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if math.isnan(tau) or tau < 0:
        raise ValueError(f"Rician factor must be >= 0 or inf, got {tau}")
    return tau


def rayleigh_matrix(
    tx_panel: PanelGeometry, rx_panel: PanelGeometry, prop: PropagationParams, rng: RngStream
) -> np.ndarray:
    return rayleigh_from_distances(pairwise_distances(tx_panel, rx_panel), prop, rng.generator())


def rician_matrix(
    tx_panel: PanelGeometry,
    rx_panel: PanelGeometry,
    prop: PropagationParams,
    tau: float,
    rng: RngStream,
) -> np.ndarray:
    tau = _check_tau(tau)
    d = pairwise_distances(tx_panel, rx_panel)
    return rician_mix(los_from_distances(d, prop), math.sqrt(prop.alpha) / d, tau, rng.generator())


def rician_vector(
    panel: PanelGeometry, point, prop: PropagationParams, tau: float, rng: RngStream
) -> np.ndarray:
    """Point-to-panel channel with Rician fading of factor ``tau``."""
    tau = _check_tau(tau)
    d = point_to_panel_distances(point, panel)
    return rician_mix(los_from_distances(d, prop), math.sqrt(prop.alpha) / d, tau, rng.generator())


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    """Dump a channel matrix as ``k2,k1,re,im`` rows with 1-based indices."""
    matrix = np.asarray(matrix)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k2", "k1", "re", "im"])
        for (i, j), value in np.ndenumerate(matrix):
            writer.writerow([i + 1, j + 1, repr(float(value.real)), repr(float(value.imag))])
