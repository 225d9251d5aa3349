"""Bosonic bath spectral models and the thermal golden-rule rate function.

Units: hbar = k_B = 1, energies and temperatures in inverse time.

gamma(w) is the one-sided noise power evaluated at a system transition
frequency w = eps_src - eps_dst:

    w > 0 (emission):    gamma(w) = 2*pi * J(w)  * (nbar(w) + 1)
    w < 0 (absorption):  gamma(w) = 2*pi * J(|w|) *  nbar(|w|)
    w = 0 (dephasing):   classical limit, family dependent (see below)

with nbar(w) = 1/(exp(w/T) - 1); at T = 0 nbar = 0 so absorption vanishes.
Detailed balance gamma(w)/gamma(-w) = exp(w/T) holds by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("ohmic", "flat")


@dataclass(frozen=True)
class SpectralModel:
    """J(w) for w >= 0 with an exponential cutoff.

    ohmic: J(w) = prefactor * w * exp(-w/cutoff)
    flat:  J(w) = prefactor * exp(-w/cutoff)
    """

    family: str
    prefactor: float
    cutoff: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown spectral family {self.family!r}")
        if not (self.prefactor >= 0 and math.isfinite(self.prefactor)):
            raise ValueError("prefactor must be finite and >= 0")
        if not (self.cutoff > 0 and math.isfinite(self.cutoff)):
            raise ValueError("cutoff must be finite and > 0")

    def density(self, w):
        """J(w) for w >= 0 (elementwise)."""
        w = np.asarray(w, dtype=float)
        if np.any(w < 0):
            raise ValueError("spectral density is defined for w >= 0")
        envelope = np.exp(-w / self.cutoff)
        if self.family == "ohmic":
            return self.prefactor * w * envelope
        return self.prefactor * envelope

    def zero_frequency_rate(self, temperature: float) -> float:
        """gamma(0+): the dephasing noise power.

        ohmic: 2*pi * prefactor * T (the J(w)*nbar(w) -> prefactor*T limit).
        flat: finite only at T = 0 (2*pi*prefactor); at T > 0 the limit
        diverges like T/w and a ValueError is raised -- callers evaluate this
        lazily so flat baths still work whenever no dephasing term is needed.
        """
        t = float(temperature)
        if self.family == "ohmic":
            return 2.0 * math.pi * self.prefactor * t
        if t == 0.0:
            return 2.0 * math.pi * self.prefactor
        raise ValueError(
            "flat spectral density has divergent zero-frequency noise at T > 0; "
            "use the ohmic family for dephasing-generating couplings")


def occupation(w, temperature: float):
    """Bose-Einstein occupation nbar(w) for w > 0 (elementwise; 0 at T = 0)."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("occupation needs w > 0")
    if temperature == 0.0:
        return np.zeros_like(w)
    x = w / temperature
    with np.errstate(over="ignore"):
        n = 1.0 / np.expm1(np.minimum(x, 700.0))
    return np.where(x >= 700.0, 0.0, n)


def thermal_rate(model: SpectralModel, w, temperature: float):
    """gamma(w) for signed transition frequencies (elementwise).

    Exact zeros in w are mapped to 0 here; the dephasing channel uses
    zero_frequency_rate explicitly instead (lazy evaluation of the w -> 0
    limit, which diverges for some families).
    """
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape)
    pos = w > 0
    neg = w < 0
    if np.any(pos):
        wp = w[pos]
        out[pos] = 2.0 * math.pi * model.density(wp) * (occupation(wp, temperature) + 1.0)
    if np.any(neg):
        wn = -w[neg]
        if temperature == 0.0:
            out[neg] = 0.0
        else:
            out[neg] = 2.0 * math.pi * model.density(wn) * occupation(wn, temperature)
    return out if out.shape else float(out)
