"""Closed-form reflection configurations and cascaded-channel evaluation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

UNIT_MODULUS_TOL = 1e-12


class UndefinedPhaseError(ValueError):
    """A channel entry is zero, so its phase cannot be aligned."""


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class ReflectionConfig:
    """Diagonal of a reflection matrix, stored as unit-modulus complex numbers."""

    phases: np.ndarray

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=complex).reshape(-1)
        dev = np.abs(np.abs(phases) - 1.0)
        if dev.size and not np.all(dev <= UNIT_MODULUS_TOL):
            raise ValueError(
                f"reflection coefficients must be unit modulus (max deviation {dev.max():.3e})"
            )
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)

    def __len__(self) -> int:
        return self.phases.size

    def perturbed(self, rotations: np.ndarray) -> ReflectionConfig:
        return ReflectionConfig(self.phases * np.exp(1j * np.asarray(rotations, dtype=float)))

    def to_csv(self, path) -> None:
        """Write ``k,re,im`` rows, k 1-based."""
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "re", "im"])
            for k, value in enumerate(self.phases, start=1):
                writer.writerow([k, repr(float(value.real)), repr(float(value.imag))])


@dataclass(frozen=True)
class EffectiveChannel:
    value: complex

    @property
    def power_gain(self) -> float:
        return abs(self.value) ** 2


def _unit(x: np.ndarray, what: str) -> np.ndarray:
    mag = np.abs(x)
    if np.any(mag == 0):
        raise UndefinedPhaseError(f"{what} has a zero entry; phase undefined")
    return x / mag


def _vec(x, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 1:
        raise DimensionError(f"{what} must be one-dimensional, got shape {arr.shape}")
    return arr


def _same_length(*named) -> None:
    sizes = {name: arr.size for name, arr in named}
    if len(set(sizes.values())) != 1:
        raise DimensionError(f"length mismatch: {sizes}")


def _aligned(product: np.ndarray) -> ReflectionConfig:
    # renormalize so |phi| = 1 survives the rounding of the division above
    phi = np.conj(product)
    return ReflectionConfig(phi / np.abs(phi))


def irs1_phases(g1, t) -> ReflectionConfig:
    """Transmit-side configuration: conj(g1_k * t_k / |t_k|)."""
    g1, t = _vec(g1, "g1"), _vec(t, "t")
    _same_length(("g1", g1), ("t", t))
    return _aligned(g1 * _unit(t, "t"))


def irs2_phases(g2, r) -> ReflectionConfig:
    """Receive-side configuration: conj(r_k * g2_k / |r_k|)."""
    g2, r = _vec(g2, "g2"), _vec(r, "r")
    _same_length(("g2", g2), ("r", r))
    return _aligned(_unit(r, "r") * g2)


def single_irs_phases(t_tilde, r_tilde) -> ReflectionConfig:
    """Co-phase every reflected path of a single IRS."""
    t_tilde, r_tilde = _vec(t_tilde, "t_tilde"), _vec(r_tilde, "r_tilde")
    _same_length(("t_tilde", t_tilde), ("r_tilde", r_tilde))
    return _aligned(_unit(r_tilde, "r_tilde") * _unit(t_tilde, "t_tilde"))


def cascade_double(r, phi2: ReflectionConfig, S, phi1: ReflectionConfig, t) -> EffectiveChannel:
    """h = r^T diag(phi2) S diag(phi1) t, evaluated right to left."""
    r, t = _vec(r, "r"), _vec(t, "t")
    S = np.asarray(S)
    if S.ndim != 2:
        raise DimensionError(f"S must be a matrix, got shape {S.shape}")
    k2, k1 = S.shape
    if not (t.size == len(phi1) == k1 and r.size == len(phi2) == k2):
        raise DimensionError(
            f"incompatible shapes: r {r.size}, phi2 {len(phi2)}, S {S.shape}, "
            f"phi1 {len(phi1)}, t {t.size}"
        )
    at_rx = S @ (phi1.phases * t)
    return EffectiveChannel(complex(np.sum(r * phi2.phases * at_rx)))


def cascade_single(r_tilde, phi: ReflectionConfig, t_tilde) -> EffectiveChannel:
    r_tilde, t_tilde = _vec(r_tilde, "r_tilde"), _vec(t_tilde, "t_tilde")
    if not r_tilde.size == len(phi) == t_tilde.size:
        raise DimensionError(
            f"length mismatch: r_tilde {r_tilde.size}, phi {len(phi)}, t_tilde {t_tilde.size}"
        )
    return EffectiveChannel(complex(np.sum(r_tilde * phi.phases * t_tilde)))
