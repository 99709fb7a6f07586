"""Stabilizing output-feedback laws closed around an internal model.

Two laws share one damping shape rho(e) >= 1: a fixed high-gain law
u = -k rho(e) e + chi, and an adaptive variant whose gain state k_hat
integrates rho(e) e^2 and therefore never decreases. rho is an even
polynomial so it serializes directly into scenario configs.
"""

from dataclasses import dataclass

from .errors import ConfigError


@dataclass
class GainLaw:
    """Gain descriptor plus, in adaptive mode, the scalar gain state.

    rho_coeffs are the coefficients (c_0, c_1, ...) of
    rho(e) = c_0 + c_1 e^2 + c_2 e^4 + ...; all must be nonnegative with
    c_0 >= 1 so that rho >= 1 everywhere. k_hat is owned by the simulation
    loop, which writes the current adapted gain before each evaluation.
    """

    mode: str = "fixed"
    k: float = 1.0
    k_hat: float = 0.0
    rho_coeffs: tuple = (1.0,)

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ConfigError(f"unknown gain mode {self.mode!r}")
        if self.mode == "fixed" and self.k <= 0:
            raise ConfigError("fixed-mode gain k must be positive")
        if self.mode == "adaptive" and self.k_hat < 0:
            raise ConfigError("adaptive gain state must be nonnegative")
        coeffs = tuple(float(c) for c in self.rho_coeffs)
        if not coeffs or coeffs[0] < 1.0 or any(c < 0.0 for c in coeffs):
            raise ConfigError(
                "rho needs nonnegative coefficients with constant term >= 1"
            )
        self.rho_coeffs = coeffs

    def rho(self, e):
        """Damping shape rho(e), an even polynomial with rho(e) >= 1."""
        e2 = e * e
        acc = 0.0
        for c in reversed(self.rho_coeffs):
            acc = acc * e2 + c
        return acc


def control_fixed(gain, e, chi_val):
    """Fixed-gain law u = -k rho(e) e + chi_val."""
    if gain.mode != "fixed":
        raise ConfigError("fixed-gain law evaluated on a non-fixed GainLaw")
    return -gain.k * gain.rho(e) * e + chi_val


def adaptive_gain_rhs(gain, e):
    """Adaptation speed rho(e) e^2; nonnegative, so the gain never decreases."""
    if gain.mode != "adaptive":
        raise ConfigError("adaptive gain update evaluated on a fixed GainLaw")
    return gain.rho(e) * e * e


def control_adaptive(gain, e, chi_val):
    """Adaptive law u = -k_hat rho(e) e + chi_val with the current gain state."""
    if gain.mode != "adaptive":
        raise ConfigError("adaptive law evaluated on a fixed GainLaw")
    return -gain.k_hat * gain.rho(e) * e + chi_val
