"""Pulse parameters and derived dimensionless characteristics.

Units are natural (hbar = c = 1) with the electron mass as the unit of
energy, momentum and frequency, 1/m as the unit of time and the critical
field E_c = m^2/|e| as the unit of field strength. With this choice the
coupling product e*E equals the dimensionless field E/E_c (in units of
m^2), so field amplitudes are passed around as plain numbers and no
elementary charge ever appears in the numerics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import NonPositiveParameter, RatioOutOfRange

__all__ = [
    "PulseModel",
    "PulseConfig",
    "KeldyshParams",
    "validate",
    "keldysh",
    "strong_only",
    "weak_only",
]


class PulseModel(str, enum.Enum):
    """Field families with a Gaussian envelope.

    ``SINGLE_GAUSS``: E0 cos(w t + phi) exp(-t^2 / 2 tau^2).
    ``BIFREQ_GAUSS``: E0 [cos(w t) + kE cos(kOmega w t)] exp(-t^2 / 2 tau^2).
    ``AM_GAUSS``: E0 [1 + kE cos(w2 t)] exp(-t^2 / 2 tau^2) with w2 = kOmega w
    and envelope width m tau = sigma.
    """

    SINGLE_GAUSS = "single"
    BIFREQ_GAUSS = "bifreq"
    AM_GAUSS = "am"

    @classmethod
    def parse(cls, value: "PulseModel | str") -> "PulseModel":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "single": cls.SINGLE_GAUSS,
            "singlegauss": cls.SINGLE_GAUSS,
            "bifreq": cls.BIFREQ_GAUSS,
            "bifreqgauss": cls.BIFREQ_GAUSS,
            "am": cls.AM_GAUSS,
            "amgauss": cls.AM_GAUSS,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown pulse model {value!r}") from None


@dataclass(frozen=True)
class PulseConfig:
    """Complete parameter set of one pulse.

    Attributes
    ----------
    model : PulseModel
    E0 : float
        Peak amplitude of the strong component in units of E_c.
    omega : float
        Carrier frequency of the strong component in units of m.
    sigma : float
        Cycle count omega*tau (Gaussian models) or m*tau (``AM_GAUSS``).
    kE : float
        Weak-to-strong amplitude ratio, 0 <= kE <= 1.
    kOmega : float
        Frequency ratio >= 1 of the weak component.
    phi : float
        Carrier envelope phase (honoured by ``SINGLE_GAUSS`` only).
    """

    model: PulseModel = PulseModel.BIFREQ_GAUSS
    E0: float = 0.2
    omega: float = 0.02
    sigma: float = 5.0
    kE: float = 0.0
    kOmega: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if not isinstance(self.model, PulseModel):
            object.__setattr__(self, "model", PulseModel.parse(self.model))

    @property
    def tau(self) -> float:
        """Envelope width in units of 1/m."""
        if self.model is PulseModel.AM_GAUSS:
            return float(self.sigma)
        return self.sigma / self.omega

    @property
    def omega2(self) -> float:
        """Carrier frequency of the weak (or modulating) component."""
        return self.kOmega * self.omega

    @property
    def fastest_frequency(self) -> float:
        """Highest carrier frequency carrying nonzero amplitude."""
        if self.model is PulseModel.SINGLE_GAUSS:
            return self.omega
        if self.kE == 0.0:
            return self.omega if self.model is PulseModel.BIFREQ_GAUSS else 0.0
        return self.omega2

    @property
    def peak_field(self) -> float:
        """Upper bound of |E(t)| in units of E_c."""
        if self.model is PulseModel.SINGLE_GAUSS:
            return abs(self.E0)
        return abs(self.E0) * (1.0 + self.kE)

    def window(self, halfwidth_factor: float = 8.0) -> tuple[float, float]:
        half = halfwidth_factor * self.tau
        return -half, half

    def to_dict(self) -> dict:
        return {
            "model": self.model.value,
            "E0_over_Ec": self.E0,
            "omega_over_m": self.omega,
            "sigma": self.sigma,
            "k_E": self.kE,
            "k_omega": self.kOmega,
            "phi": self.phi,
        }


@dataclass(frozen=True)
class KeldyshParams:
    gamma_omega: float
    gamma_tau: float


def validate(config: PulseConfig) -> PulseConfig:
    """Return a normalized copy of ``config`` or raise a ``ConfigError``.

    ``E0 = 0`` is accepted as the field-free limit; it is the only
    non-positive amplitude allowed.
    """
    model = PulseModel.parse(config.model)
    values = {}
    for name in ("E0", "omega", "sigma", "kE", "kOmega", "phi"):
        value = float(getattr(config, name))
        if not math.isfinite(value):
            raise NonPositiveParameter(f"{name} must be finite, got {value!r}")
        values[name] = value

    if values["E0"] < 0.0:
        raise NonPositiveParameter(f"E0 must be positive, got {values['E0']!r}")
    for name in ("omega", "sigma"):
        if values[name] <= 0.0:
            raise NonPositiveParameter(f"{name} must be positive, got {values[name]!r}")
    if not 0.0 <= values["kE"] <= 1.0:
        raise RatioOutOfRange(f"kE must lie in [0, 1], got {values['kE']!r}")
    if values["kOmega"] < 1.0:
        raise RatioOutOfRange(f"kOmega must be >= 1, got {values['kOmega']!r}")
    if model is not PulseModel.SINGLE_GAUSS:
        # carrier envelope phases are dropped for the two-component pulses
        values["phi"] = 0.0
    return replace(config, model=model, **values)


def keldysh(config: PulseConfig) -> KeldyshParams:
    """Keldysh parameters of the strong component.

    gamma_omega = (omega/m)(E_c/E0) and gamma_tau = (E_c/E0)/(m tau).
    """
    if config.E0 == 0.0:
        return KeldyshParams(math.inf, math.inf)
    return KeldyshParams(config.omega / config.E0, 1.0 / (config.tau * config.E0))


def strong_only(config: PulseConfig) -> PulseConfig:
    """Field "1": the two-component pulse with the weak term switched off."""
    return replace(config, kE=0.0)


def weak_only(config: PulseConfig) -> PulseConfig:
    """Field "2": the weak term alone as a single Gaussian pulse.

    The envelope width is kept, so the cycle count scales with kOmega.
    ``AM_GAUSS`` maps to a single pulse of amplitude kE*E0 at w2 with the
    same m*tau.
    """
    if config.model is PulseModel.AM_GAUSS:
        return PulseConfig(
            model=PulseModel.SINGLE_GAUSS,
            E0=config.kE * config.E0,
            omega=config.omega2,
            sigma=config.omega2 * config.tau,
        )
    return PulseConfig(
        model=PulseModel.SINGLE_GAUSS,
        E0=config.kE * config.E0,
        omega=config.omega2,
        sigma=config.kOmega * config.sigma,
    )
