"""Closed-form PCI predictors from the literature, used as baselines.

Models that can leave the 0-100 scale return a :class:`PciEstimate` holding
both the raw formula value and the clamped index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    InvalidInput,
    InvalidTreatment,
    NegativeDeflection,
    NegativeIri,
    NonPositiveIri,
    ZeroCenterDeflection,
)

# Park et al. publish log(PCI) without a base; base 10 is assumed here.
PARK_LOG_BASE = 10.0

OBRIEN_INTERCEPT = 96.6


@dataclass(frozen=True)
class PciEstimate:
    raw: float
    clamped: float

    @classmethod
    def of(cls, raw: float) -> "PciEstimate":
        return cls(raw=raw, clamped=min(100.0, max(0.0, raw)))

    def to_dict(self) -> dict[str, float]:
        return {"raw": self.raw, "clamped": self.clamped}


@dataclass(frozen=True)
class ObrienInputs:
    age: float  # years since last overlay (AGE)
    age_to_overlay: float  # years to last overlay (AGESOL)
    age_total: float  # total pavement age (AGETOT)
    log_traffic: float  # log of weighted traffic total (LPMTOT)
    d0: float  # deflection at plate center
    d12: float  # deflection 12 in from center

    def __post_init__(self) -> None:
        for name in ("age", "age_to_overlay", "age_total"):
            if getattr(self, name) < 0:
                raise InvalidInput(f"{name} must be >= 0")
        if self.age_total < self.age_to_overlay:
            raise InvalidInput("age_total must be >= age_to_overlay")


def diff(d0: float, d12: float) -> float:
    """Normalized deflection basin slope (d0 - d12) / d0."""
    if d0 == 0:
        raise ZeroCenterDeflection("DIFF is undefined for zero center deflection")
    if d0 < 0:
        raise NegativeDeflection(f"center deflection {d0} is negative")
    return (d0 - d12) / d0


def area(d0: float, d12: float) -> float:
    """Deflection basin area 12 * (d0 + d12), in in^2/10^3 when inputs are mils."""
    if d0 < 0 or d12 < 0:
        raise NegativeDeflection(f"deflections must be >= 0, got d0={d0}, d12={d12}")
    return 12.0 * (d0 + d12)


def obrien_pci(inputs: ObrienInputs) -> PciEstimate:
    slope = diff(inputs.d0, inputs.d12)
    basin = area(inputs.d0, inputs.d12)
    age = inputs.age
    t1 = 0.000572 * age**2 * inputs.log_traffic * slope * basin
    t2 = 0.3062 * age**0.25 * inputs.age_to_overlay**2 * slope**2
    t3 = 0.00156 * age**0.5 * inputs.age_total * inputs.log_traffic * slope * basin
    return PciEstimate.of(OBRIEN_INTERCEPT - (t1 + t2 + t3))


def park_pci(iri: float) -> PciEstimate:
    if not iri > 0:
        raise NonPositiveIri(f"IRI must be > 0, got {iri}")
    return PciEstimate.of(PARK_LOG_BASE ** (2.0 - 0.436 * math.log(iri, PARK_LOG_BASE)))


def dewan_smith_pci(iri: float) -> PciEstimate:
    if iri < 0:
        raise NegativeIri(f"IRI must be >= 0, got {iri}")
    return PciEstimate.of(153.0 - iri / 0.0171)


def age_curve_pci(age: float, a: float, b: float, c: float) -> float:
    """Power-law performance curve a + b * age**c."""
    if age < 0:
        raise InvalidInput(f"age must be >= 0, got {age}")
    return a + b * age**c


def michles_pci(treatment: int, age: float) -> PciEstimate:
    """Treatment 0 is microsurfacing, 1 is thin overlay."""
    if treatment not in (0, 1) or isinstance(treatment, bool):
        raise InvalidTreatment(f"treatment must be 0 or 1, got {treatment!r}")
    if age < 0:
        raise InvalidInput(f"age must be >= 0, got {age}")
    return PciEstimate.of(71.09 + 27.42 * treatment - 4.07 * age)
