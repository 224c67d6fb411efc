"""Double-quantum-dot rate matrices from physical parameters.

State ordering is fixed as (00, 10, 01, 11): both dots empty, left occupied,
right occupied, both occupied.  The Coulomb-blockade variant drops state 11.
All energies and rates are in MHz with k_B = hbar = e = 1, and the bias
enters through mu_L = -vsd/2, mu_R = +vsd/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateFermi
from .markov import RateMatrix, validate_rate_matrix

__all__ = [
    "DqdParams",
    "FermiSet",
    "fermi",
    "effective_coupling",
    "fermi_set",
    "build_dqd",
    "build_dqd_blockade",
    "LABELS_4",
    "LABELS_3",
]

LABELS_4 = ("00", "10", "01", "11")
LABELS_3 = ("00", "10", "01")


@dataclass(frozen=True)
class DqdParams:
    """Physical parameters of the double-dot transport model (MHz units).

    ``vg`` sets a common gate voltage for both dots; pass ``vg_left`` and
    ``vg_right`` instead to detune them (used for the effective-coupling
    formula, the transport results assume equal gates).
    """

    g: float
    gamma: float
    temperature: float
    u: float
    vsd: float
    vg: float | None = None
    vg_left: float | None = None
    vg_right: float | None = None
    blockade: bool = False

    def __post_init__(self):
        if self.g <= 0 or self.gamma <= 0 or self.temperature <= 0:
            raise ValueError("g, gamma and temperature must be positive")
        if self.u < 0:
            raise ValueError("u must be nonnegative")
        if self.vg is None and (self.vg_left is None or self.vg_right is None):
            raise ValueError("provide vg, or both vg_left and vg_right")
        if self.vg_left is None:
            object.__setattr__(self, "vg_left", self.vg)
        if self.vg_right is None:
            object.__setattr__(self, "vg_right", self.vg)

    @property
    def mu_left(self) -> float:
        return -self.vsd / 2.0

    @property
    def mu_right(self) -> float:
        return self.vsd / 2.0


@dataclass(frozen=True)
class FermiSet:
    """Lead occupations: bare (f) and Coulomb-shifted (f_u) for each side."""

    f_left: float
    f_right: float
    f_left_u: float
    f_right_u: float


def fermi(energy: float, mu: float, temperature: float) -> float:
    """Fermi occupation 1 / (exp((energy - mu) / T) + 1), overflow safe."""
    x = (energy - mu) / temperature
    if x >= 0.0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


def effective_coupling(g: float, gamma: float, vg_left: float, vg_right: float) -> float:
    """Inter-dot hopping rate 2 g^2 gamma / (gamma^2 + (vg_left - vg_right)^2)."""
    d = vg_left - vg_right
    return 2.0 * g * g * gamma / (gamma * gamma + d * d)


def fermi_set(p: DqdParams) -> FermiSet:
    return FermiSet(
        f_left=fermi(p.vg_left, p.mu_left, p.temperature),
        f_right=fermi(p.vg_right, p.mu_right, p.temperature),
        f_left_u=fermi(p.vg_left + p.u, p.mu_left, p.temperature),
        f_right_u=fermi(p.vg_right + p.u, p.mu_right, p.temperature),
    )


def lead_log_ratio(p: DqdParams, side: str, shifted: bool = False) -> float:
    """log((1 - f)/f) for one lead occupation, evaluated in closed form as
    (energy - mu)/T; avoids the 1 - f cancellation for occupations near 1."""
    if side == "L":
        energy, mu = p.vg_left, p.mu_left
    elif side == "R":
        energy, mu = p.vg_right, p.mu_right
    else:
        raise ValueError("side must be 'L' or 'R'")
    if shifted:
        energy += p.u
    return (energy - mu) / p.temperature


def require_finite_fermi(f: FermiSet, with_u: bool = True) -> None:
    """Raise DegenerateFermi when any occupation is exactly 0 or 1."""
    vals = [f.f_left, f.f_right]
    if with_u:
        vals += [f.f_left_u, f.f_right_u]
    for v in vals:
        if v <= 0.0 or v >= 1.0:
            raise DegenerateFermi(f"Fermi occupation {v} is degenerate")


def build_dqd(p: DqdParams) -> RateMatrix:
    """Four-state rate matrix over (00, 10, 01, 11).

    Leads inject with gamma*f and extract with gamma*(1-f); the shifted
    occupations f_u govern transitions touching the doubly occupied state;
    the effective coupling connects 10 and 01.
    """
    f = fermi_set(p)
    gam = p.gamma
    geff = effective_coupling(p.g, gam, p.vg_left, p.vg_right)
    w = [
        [0.0, gam * (1 - f.f_left), gam * (1 - f.f_right), 0.0],
        [gam * f.f_left, 0.0, geff, gam * (1 - f.f_right_u)],
        [gam * f.f_right, geff, 0.0, gam * (1 - f.f_left_u)],
        [0.0, gam * f.f_right_u, gam * f.f_left_u, 0.0],
    ]
    return validate_rate_matrix(w, labels=LABELS_4)


def build_dqd_blockade(p: DqdParams) -> RateMatrix:
    """Three-state rate matrix over (00, 10, 01): the u -> infinity limit,
    i.e. the four-state matrix with state 11 deleted and f_u -> 0."""
    f = fermi_set(p)
    gam = p.gamma
    geff = effective_coupling(p.g, gam, p.vg_left, p.vg_right)
    w = [
        [0.0, gam * (1 - f.f_left), gam * (1 - f.f_right)],
        [gam * f.f_left, 0.0, geff],
        [gam * f.f_right, geff, 0.0],
    ]
    return validate_rate_matrix(w, labels=LABELS_3)


def build_model(p: DqdParams) -> RateMatrix:
    """Dispatch on the blockade flag."""
    return build_dqd_blockade(p) if p.blockade else build_dqd(p)
