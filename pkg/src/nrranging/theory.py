"""Closed-form DM-RS autocorrelation, EMLP S-curve and discriminator gain.

These are the analytical companions of the tracking loop: the ideal ACF of a
uniform pilot comb (exact Dirichlet-kernel form and its sinc approximation),
the early-minus-late-power S-curve, and its slope at the origin, which
normalizes the DLL discriminator.

Timing-error arguments are in samples.  ``epsilon`` is the replica delay
minus the true delay, so the S-curve has positive slope at zero and the loop
applies negative feedback.
"""

from dataclasses import dataclass

import numpy as np

# chip rates used only for the mainlobe-width comparison against GNSS codes
GNSS_CHIP_RATE_HZ = {
    "gps_l1_ca": 1.023e6,
    "galileo_e1b": 1.023e6,
    "bds_b2a": 10.23e6,
}


@dataclass(frozen=True)
class AcfParams:
    """Pilot-comb geometry: spacing kappa, count n_p, FFT size, start index."""

    kappa: int = 4
    n_p: int = 60
    n_fft: int = 256
    p0: int = 2
    amp: float = 1.0

    def __post_init__(self):
        if self.kappa < 1 or self.n_p < 1 or self.n_fft < 1:
            raise ValueError("kappa, n_p and n_fft must be positive")

    @property
    def beta(self) -> float:
        return self.kappa * self.n_p / self.n_fft

    @property
    def alpha(self) -> float:
        return (2 * self.p0 + self.kappa * (self.n_p - 1)) / self.n_fft

    @property
    def first_null(self) -> float:
        """First zero of the ACF mainlobe, in samples."""
        return self.n_fft / (self.kappa * self.n_p)


def _dirichlet(params: AcfParams, epsilon):
    """sin(pi*k*Np*e/N) / (Np*sin(pi*k*e/N)) with its removable singularities."""
    eps = np.asarray(epsilon, dtype=float)
    num_arg = np.pi * params.kappa * params.n_p * eps / params.n_fft
    den_arg = np.pi * params.kappa * eps / params.n_fft
    den = np.sin(den_arg)
    singular = np.abs(den) < 1e-14
    safe_den = np.where(singular, 1.0, den)
    ratio = np.sin(num_arg) / (params.n_p * safe_den)
    # at sin(den)=0 both numerator and denominator vanish; l'Hopital gives
    # cos(num_arg)/cos(den_arg), which is +-1 at those points
    limit = np.cos(num_arg) / np.cos(den_arg)
    return np.where(singular, limit, ratio)


def ideal_acf_exact(params: AcfParams, epsilon):
    """Exact noise-free pilot-comb ACF (Dirichlet form), peak value amp."""
    eps = np.asarray(epsilon, dtype=float)
    phase = np.exp(1j * np.pi * params.alpha * eps)
    return params.amp * phase * _dirichlet(params, eps)


def sinc(x):
    """sin(x)/x with sinc(0) = 1 (the pi factors stay in the argument)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-12
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0, np.sin(safe) / safe)


def ideal_acf_approx(params: AcfParams, epsilon):
    """Sinc approximation of the comb ACF, valid for |epsilon| << N/kappa."""
    eps = np.asarray(epsilon, dtype=float)
    return params.amp * np.exp(1j * np.pi * params.alpha * eps) * sinc(np.pi * params.beta * eps)


def s_curve(epsilon, xi: float, amp: float = 1.0, beta: float = 0.9375):
    """EMLP S-curve, sinc closed form: A^2 [sinc^2(pi b(e-xi)) - sinc^2(pi b(e+xi))]."""
    if not 0 < xi < 0.5 + 1e-12:
        raise ValueError(f"correlator spacing xi={xi} outside (0, 0.5]")
    eps = np.asarray(epsilon, dtype=float)
    early = sinc(np.pi * beta * (eps - xi)) ** 2
    late = sinc(np.pi * beta * (eps + xi)) ** 2
    return amp ** 2 * (early - late)


def s_curve_exact(params: AcfParams, epsilon, xi: float):
    """EMLP S-curve from the exact ACF magnitude.

    This is what a noise-free early/late correlator pair over the comb
    produces to machine precision; the sinc form is its approximation.
    """
    if not 0 < xi < 0.5 + 1e-12:
        raise ValueError(f"correlator spacing xi={xi} outside (0, 0.5]")
    eps = np.asarray(epsilon, dtype=float)
    early = np.abs(ideal_acf_exact(params, eps - xi)) ** 2
    late = np.abs(ideal_acf_exact(params, eps + xi)) ** 2
    return early - late


def discriminator_gain(xi: float, amp: float = 1.0, beta: float = 0.9375) -> float:
    """Slope of the sinc-form S-curve at epsilon = 0.

    Positive across xi in (0, 0.5], so the tracking loop sees negative
    feedback.  For small pi*beta*xi the closed form cancels catastrophically
    and a series expansion is used instead.
    """
    if not 0 < xi < 0.5 + 1e-12:
        raise ValueError(f"correlator spacing xi={xi} outside (0, 0.5]")
    x = np.pi * beta * xi
    if x < 0.1:
        bracket = (2.0 / 3.0) * x ** 4 - (8.0 / 45.0) * x ** 6 + (2.0 / 105.0) * x ** 8
    else:
        bracket = 1.0 - np.cos(2 * x) - x * np.sin(2 * x)
    return 2.0 * amp ** 2 * bracket / (np.pi ** 2 * beta ** 2 * xi ** 3)


def first_null_seconds(params: AcfParams, sample_rate_hz: float) -> float:
    """ACF mainlobe half-width in seconds at the given sample rate."""
    return params.first_null / sample_rate_hz


def gnss_one_chip_seconds(code: str = "gps_l1_ca") -> float:
    """One-chip ACF null position of a classic GNSS ranging code."""
    return 1.0 / GNSS_CHIP_RATE_HZ[code]
