"""Wave-strength ratios and limiter functions for correction waves.

On mapped grids with anisotropic media the two shear families have no
smoothly varying polarization labels, so comparing a wave against "the
same family" upwind is ill-posed.  The energy-inner-product ratio
avoids family matching: it measures the component of the summed upwind
waves along the wave being limited, using the energy matrix of the
cell the wave propagates into.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from porowave.riemann import WaveSet

__all__ = [
    "StrengthRatio",
    "LimiterChoice",
    "phi_minmod",
    "phi_mc",
    "phi_superbee",
    "PHI_BY_NAME",
    "RATIO_BY_NAME",
    "theta_classical",
    "theta_E_full",
    "apply_limiter",
]

_DENOM_FLOOR = 1e-300


class StrengthRatio(Enum):
    CLASSICAL = "classical"
    E_SHEAR_ONLY = "e-shear"
    E_FULL = "e-full"


def phi_minmod(theta):
    return np.maximum(0.0, np.minimum(1.0, theta))


def phi_mc(theta):
    theta = np.asarray(theta, dtype=float)
    return np.maximum(
        0.0, np.minimum(np.minimum(0.5 * (1.0 + theta), 2.0), 2.0 * theta))


def phi_superbee(theta):
    theta = np.asarray(theta, dtype=float)
    return np.maximum(0.0, np.maximum(
        np.minimum(1.0, 2.0 * theta), np.minimum(2.0, theta)))


PHI_BY_NAME: dict[str, Callable | None] = {
    "none": None,
    "minmod": phi_minmod,
    "mc": phi_mc,
    "superbee": phi_superbee,
}

RATIO_BY_NAME = {r.value: r for r in StrengthRatio}


@dataclass(frozen=True)
class LimiterChoice:
    strength_ratio: StrengthRatio = StrengthRatio.E_FULL
    phi: Callable | None = phi_mc

    @classmethod
    def from_names(cls, strength_ratio: str, function: str) -> "LimiterChoice":
        try:
            ratio = RATIO_BY_NAME[strength_ratio]
        except KeyError:
            raise ValueError(
                f"unknown strength ratio {strength_ratio!r}; options are "
                + ", ".join(sorted(RATIO_BY_NAME))) from None
        try:
            phi = PHI_BY_NAME[function]
        except KeyError:
            raise ValueError(
                f"unknown limiter function {function!r}; options are "
                + ", ".join(sorted(PHI_BY_NAME))) from None
        return cls(strength_ratio=ratio, phi=phi)


def theta_classical(W, W_up) -> float:
    """Unweighted ratio against the same-index upwind wave."""
    denom = float(W @ W)
    if denom == 0.0:
        return 0.0
    return float(W @ W_up) / denom


def theta_E_full(W, sum_upwind_same_direction, sum_local_same_direction,
                 E) -> float:
    """Energy-weighted ratio against all same-direction upwind waves.

    The denominator equals W^T E W when the local waves share one
    E-orthogonal basis; passing the local same-direction sum instead
    saves one matrix-vector product per wave.
    """
    EW = E @ sum_local_same_direction
    denom = float(W @ EW)
    if abs(denom) <= _DENOM_FLOOR:
        return 0.0
    return float(W @ (E @ sum_upwind_same_direction)) / denom


_SHEAR = frozenset(("S1", "S2"))


def _direction_sums(ws: WaveSet | None):
    if ws is None:
        zero = np.zeros(13)
        return zero, zero
    neg = ws.W[:, ws.speeds < 0.0].sum(axis=1)
    pos = ws.W[:, ws.speeds > 0.0].sum(axis=1)
    return neg, pos


def _shear_sums(ws: WaveSet | None):
    if ws is None or ws.families is None:
        zero = np.zeros(13)
        return zero, zero
    shear = np.array([f in _SHEAR for f in ws.families])
    neg = ws.W[:, shear & (ws.speeds < 0.0)].sum(axis=1)
    pos = ws.W[:, shear & (ws.speeds > 0.0)].sum(axis=1)
    return neg, pos


def apply_limiter(ws: WaveSet, upwind_minus: WaveSet | None,
                  upwind_plus: WaveSet | None, choice: LimiterChoice,
                  E_left, E_right) -> np.ndarray:
    """Returns the waves scaled by phi(theta) for the correction flux.

    Right-going waves compare against the face on their left
    (upwind_minus) and use the right cell's energy matrix; left-going
    waves use upwind_plus and the left cell's.  A missing upwind face
    counts as zero upwind waves.  First-order fluctuations are not
    touched here.

    Args:
        ws: Waves at the face being limited.
        upwind_minus: Waves at the adjacent face on the left, or None.
        upwind_plus: Waves at the adjacent face on the right, or None.
        choice: Strength-ratio form and limiter function.
        E_left: Energy matrix of the cell on the left of the face.
        E_right: Energy matrix of the cell on the right.
    """
    if choice.phi is None:
        return ws.W
    ratio = choice.strength_ratio
    W_lim = ws.W.copy()

    if ratio is not StrengthRatio.CLASSICAL:
        local_neg, local_pos = _direction_sums(ws)
        um_neg, um_pos = _direction_sums(upwind_minus)
        up_neg, up_pos = _direction_sums(upwind_plus)
    if ratio is StrengthRatio.E_SHEAR_ONLY:
        um_sh_neg, um_sh_pos = _shear_sums(upwind_minus)
        up_sh_neg, up_sh_pos = _shear_sums(upwind_plus)

    for p, s in enumerate(ws.speeds):
        W = ws.W[:, p]
        going_right = s > 0.0
        up = upwind_minus if going_right else upwind_plus
        E = E_right if going_right else E_left

        if ratio is StrengthRatio.CLASSICAL:
            if up is None or p >= up.W.shape[1]:
                W_up = np.zeros(13)
            else:
                W_up = up.W[:, p]
            theta = theta_classical(W, W_up)
        elif ratio is StrengthRatio.E_FULL:
            sum_up = (um_pos if going_right else up_neg)
            sum_local = (local_pos if going_right else local_neg)
            theta = theta_E_full(W, sum_up, sum_local, E)
        else:
            if ws.families is not None and ws.families[p] in _SHEAR:
                sum_up = (um_sh_pos if going_right else up_sh_neg)
                theta = theta_E_full(W, sum_up, W, E)
            else:
                if up is None or p >= up.W.shape[1]:
                    W_up = np.zeros(13)
                else:
                    W_up = up.W[:, p]
                theta = theta_classical(W, W_up)

        W_lim[:, p] = choice.phi(theta) * W
    return W_lim
