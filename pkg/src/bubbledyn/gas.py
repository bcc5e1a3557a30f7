"""Barotropic gas laws and the total potential energy of a configuration
(internal gas energy + far-field pressure work + optional surface tension)
with packed parameter gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .shapes import Configuration, measures


@dataclass(frozen=True)
class GasLaw:
    """Polytropic law p(s) = K s^gamma; gamma = 1 is the isothermal case.

    The free energy per unit mass e(s) satisfies p(s) = s^2 e'(s):
    e = K s^(gamma-1)/(gamma-1) for gamma > 1 and K ln s for gamma = 1
    (additive constant fixed to zero)."""

    K: float
    gamma: float

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError(f"gas constant K must be > 0, got {self.K}")
        if not self.gamma >= 1.0:
            raise ValueError(f"polytropic exponent must be >= 1, got {self.gamma}")


@dataclass(frozen=True)
class BubbleGasState:
    """Fixed gas mass of one bubble together with its law."""

    mass: float
    law: GasLaw

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"bubble gas mass must be > 0, got {self.mass}")


def pressure(law: GasLaw, density: float):
    density = np.asarray(density, dtype=float)
    if np.any(density <= 0.0):
        raise ValueError("pressure needs density > 0")
    return law.K * density ** law.gamma


def free_energy(law: GasLaw, density: float):
    density = np.asarray(density, dtype=float)
    if np.any(density <= 0.0):
        raise ValueError("free energy needs density > 0")
    if law.gamma == 1.0:
        return law.K * np.log(density)
    return law.K * density ** (law.gamma - 1.0) / (law.gamma - 1.0)


def bubble_pressure(state: BubbleGasState, volume: float) -> float:
    """Homogeneous pressure of a bubble of the given volume."""
    return float(pressure(state.law, state.mass / volume))


def equilibrium_radius(state: BubbleGasState, p_infinity: float) -> float:
    """Radius at which a spherical bubble's pressure matches p_infinity
    (no surface tension)."""
    if p_infinity <= 0.0:
        raise ValueError("equilibrium radius requires p_infinity > 0")
    rho_eq = (p_infinity / state.law.K) ** (1.0 / state.law.gamma)
    return float((3.0 * state.mass / (4.0 * np.pi * rho_eq)) ** (1.0 / 3.0))


@dataclass(frozen=True)
class PotentialEnergy:
    U: float
    dU_dm: np.ndarray          # packed covector over the configuration
    bubble_pressures: np.ndarray


def potential_energy(gas_states, p_infinity: float, surface_tension: float,
                     config: Configuration) -> PotentialEnergy:
    """Total potential energy

        U = sum_k [ M_k e(M_k / vol_k) + p_inf vol_k + sigma area_k ]

    with gradient assembled from the measure gradients through
    dU/d(vol_k) = -p_k + p_inf and dU/d(area_k) = sigma."""
    if len(gas_states) != config.n_bubbles:
        raise ValueError("one gas state per bubble required")
    U = 0.0
    parts = []
    pressures = []
    for state, shape in zip(gas_states, config.bubbles):
        m = measures(shape)
        rho_g = state.mass / m.volume
        p_k = float(pressure(state.law, rho_g))
        pressures.append(p_k)
        U += state.mass * float(free_energy(state.law, rho_g))
        U += p_infinity * m.volume
        grad = (p_infinity - p_k) * m.d_volume_dm
        if surface_tension != 0.0:
            U += surface_tension * m.area
            grad = grad + surface_tension * m.d_area_dm
        parts.append(grad)
    return PotentialEnergy(U=float(U), dU_dm=np.concatenate(parts),
                           bubble_pressures=np.array(pressures))
