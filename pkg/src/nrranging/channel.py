"""Multipath / impairment channel simulation and trajectory synthesis.

Implements the received-signal model

    r(k) = exp(j(2 pi k df/N + phi)) * sum_l h_l s(k - tau_l) + n(k)

with fractional path delays realized as frequency-domain phase ramps over the
whole buffer (exact for the band-limited model), sampling-clock offset as a
slowly sliding fractional resample, and complex Gaussian noise scaled to a
per-sample SNR measured over the signal-active portion of the buffer.
"""

from dataclasses import dataclass

import numpy as np

from .grid import Numerology

SPEED_OF_LIGHT = 299792458.0

MAX_PEDESTRIAN_SPEED = 3.0  # m/s, radial bound assumed by the phase model


@dataclass(frozen=True)
class PathComponent:
    """One propagation path: complex gain and delay in samples (fractional)."""

    gain: complex
    delay: float

    def __post_init__(self):
        if not np.isfinite(self.gain):
            raise ValueError("path gain must be finite")
        if not np.isfinite(self.delay) or self.delay < 0:
            raise ValueError(f"path delay must be >= 0, got {self.delay}")


@dataclass(frozen=True)
class MultipathChannel:
    """Channel impulse response as paths in strictly increasing delay order."""

    paths: tuple

    def __post_init__(self):
        if len(self.paths) < 1:
            raise ValueError("channel needs at least one path")
        delays = [p.delay for p in self.paths]
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("path delays must be strictly increasing")

    @classmethod
    def from_pairs(cls, pairs) -> "MultipathChannel":
        """Build from (gain, delay) pairs, e.g. [(1, 0.0), (0.5, 2.0)]."""
        return cls(tuple(PathComponent(complex(g), float(d)) for g, d in pairs))

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths])

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths])


@dataclass(frozen=True)
class Impairments:
    """Receiver-side impairment set of the signal model.

    cfo_norm is the CFO in units of the subcarrier spacing; sto is a common
    timing offset in samples added to every path delay; snr_db None means
    noiseless.
    """

    cfo_norm: float = 0.0
    phase0: float = 0.0
    sto: float = 0.0
    sco_ppm: float = 0.0
    snr_db: float | None = None

    def __post_init__(self):
        if not abs(self.cfo_norm) < 0.5:
            raise ValueError(f"|cfo_norm| must be < 0.5, got {self.cfo_norm}")
        if not np.isfinite(self.sco_ppm):
            raise ValueError("sco_ppm must be finite")
        if self.sto < 0:
            raise ValueError("sto must be >= 0 (delays cannot be negative)")


IDENTITY_CHANNEL = MultipathChannel.from_pairs([(1.0, 0.0)])
NO_IMPAIRMENTS = Impairments()


def _delay_transfer(n: int, gains, delays) -> np.ndarray:
    """Channel transfer function over an n-point buffer, signed frequencies."""
    f = np.fft.fftfreq(n)
    h = np.zeros(n, dtype=np.complex128)
    for g, d in zip(gains, delays):
        h += g * np.exp(-2j * np.pi * f * d)
    return h


def channel_frequency_response(chan: MultipathChannel, indices,
                               n_fft: int = 256) -> np.ndarray:
    """Per-subcarrier response H(p) = sum_l h_l exp(-2j pi nu(p) tau_l / N).

    ``indices`` are SSB subcarrier numbers (0..239); nu(p) = p - 120 is the
    signed FFT bin the package-wide delay convention is written in.
    """
    nu = np.asarray(indices) - 120
    h = np.zeros(len(nu), dtype=np.complex128)
    for p in chan.paths:
        h += p.gain * np.exp(-2j * np.pi * nu * p.delay / n_fft)
    return h


def apply_channel_to_grid(grid: np.ndarray, chan: MultipathChannel,
                          n_fft: int = 256) -> np.ndarray:
    """Apply the multipath channel on the resource grid, symbol-circularly.

    Multiplying each subcarrier by H(p) realizes every path delay as a
    cyclic shift within its OFDM symbol: exactly the CP-protected model the
    receiver assumes, with no edge transients.  Valid while the delay spread
    stays inside the cyclic prefix.
    """
    g = np.asarray(grid)
    h = channel_frequency_response(chan, np.arange(g.shape[0]), n_fft)
    return g * h[:, None]


def fractional_shift(x: np.ndarray, delay: float, pad: int | None = None) -> np.ndarray:
    """Delay x by a (possibly fractional) number of samples, band-limited.

    The buffer is zero-padded so delayed content does not wrap; output has
    the input length.
    """
    x = np.asarray(x, dtype=np.complex128)
    if pad is None:
        pad = int(np.ceil(abs(delay))) + 8
    n = len(x) + pad
    spec = np.fft.fft(x, n)
    spec *= np.exp(-2j * np.pi * np.fft.fftfreq(n) * delay)
    return np.fft.ifft(spec)[:len(x)]


def _apply_clock_skew(x: np.ndarray, sco_ppm: float,
                      block: int = 2048, margin: int = 64) -> np.ndarray:
    """Resample x at rate (1 + sco_ppm*1e-6): out[k] = x(k*(1+delta)).

    Blockwise fractional shifts approximate the slowly sliding sampling
    grid; within one block the shift is treated as constant, which bounds
    the timing ripple to delta*block/2 samples.
    """
    delta = sco_ppm * 1e-6
    if delta == 0.0:
        return x.copy()
    n = len(x)
    out = np.empty(n, dtype=np.complex128)
    f = np.fft.fftfreq(block + 2 * margin)
    for b0 in range(0, n, block):
        b1 = min(b0 + block, n)
        advance = delta * 0.5 * (b0 + b1)
        i_int = int(np.floor(advance))
        frac = advance - i_int
        lo, hi = b0 + i_int - margin, b1 + i_int + margin
        src = np.zeros(hi - lo, dtype=np.complex128)
        s0, s1 = max(lo, 0), min(hi, n)
        src[s0 - lo:s1 - lo] = x[s0:s1]
        if hi - lo == block + 2 * margin:
            ramp = np.exp(2j * np.pi * f * frac)
        else:
            ramp = np.exp(2j * np.pi * np.fft.fftfreq(hi - lo) * frac)
        shifted = np.fft.ifft(np.fft.fft(src) * ramp)
        out[b0:b1] = shifted[margin:margin + (b1 - b0)]
    return out


def signal_power(x: np.ndarray, floor_ratio: float = 1e-4) -> float:
    """Mean power over signal-active samples (within 40 dB of the peak).

    A burst capture is mostly silence; the SNR is defined against the power
    during the bursts, the way a real capture looks.
    """
    p = np.abs(np.asarray(x)) ** 2
    peak = p.max()
    if peak == 0.0:
        return 0.0
    active = p > floor_ratio * peak
    return float(p[active].mean())


def apply_channel(samples: np.ndarray, chan: MultipathChannel,
                  imp: Impairments = NO_IMPAIRMENTS, seed=None,
                  n_fft: int = 256) -> np.ndarray:
    """Run samples through the multipath + CFO/STO/SCO + AWGN model.

    Deterministic for a given seed.  n_fft sets the CFO normalization
    (one subcarrier spacing = one cycle per n_fft samples).
    """
    x = np.asarray(samples, dtype=np.complex128)
    if len(x) == 0:
        raise ValueError("samples must be non-empty")

    delays = chan.delays + imp.sto
    if np.allclose(delays, 0.0) and len(chan.paths) == 1:
        y = chan.paths[0].gain * x
    else:
        pad = int(np.ceil(delays.max())) + 8
        n = len(x) + pad
        spec = np.fft.fft(x, n) * _delay_transfer(n, chan.gains, delays)
        y = np.fft.ifft(spec)[:len(x)]

    if imp.cfo_norm != 0.0 or imp.phase0 != 0.0:
        k = np.arange(len(y))
        y = y * np.exp(1j * (2 * np.pi * k * imp.cfo_norm / n_fft + imp.phase0))

    if imp.sco_ppm != 0.0:
        y = _apply_clock_skew(y, imp.sco_ppm)

    if imp.snr_db is not None:
        p_sig = signal_power(y)
        sigma2 = p_sig / 10 ** (imp.snr_db / 10)
        rng = np.random.default_rng(seed)
        noise = np.sqrt(sigma2 / 2) * (rng.standard_normal(len(y))
                                       + 1j * rng.standard_normal(len(y)))
        y = y + noise
    return y


@dataclass(frozen=True)
class Trajectory:
    """Radial pedestrian trajectory: (time_s, radial_distance_m) waypoints.

    Distances are ranges to the transmitter; linear interpolation between
    waypoints.  The implied radial speed must stay within the pedestrian
    bound the no-ambiguity phase model assumes.
    """

    waypoints: tuple
    carrier_freq_hz: float = 2565e6
    ssb_period_s: float = 0.02

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ValueError("trajectory needs at least one waypoint")
        t = np.array([w[0] for w in self.waypoints], dtype=float)
        r = np.array([w[1] for w in self.waypoints], dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("waypoint times must be strictly increasing")
        if np.any(r < 0):
            raise ValueError("radial distances must be >= 0")
        if len(t) > 1:
            speed = np.abs(np.diff(r) / np.diff(t))
            if np.any(speed > MAX_PEDESTRIAN_SPEED + 1e-9):
                raise ValueError(
                    f"radial speed {speed.max():.2f} m/s exceeds the "
                    f"{MAX_PEDESTRIAN_SPEED} m/s pedestrian bound")
        if self.carrier_freq_hz <= 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def t_end(self) -> float:
        return self.waypoints[-1][0]

    def radial_distance(self, t: float) -> float:
        times = [w[0] for w in self.waypoints]
        dists = [w[1] for w in self.waypoints]
        if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
            raise ValueError(f"t={t} s outside trajectory span [{times[0]}, {times[-1]}]")
        return float(np.interp(t, times, dists))


def trajectory_to_channel(traj: Trajectory, epoch_index: int,
                          static_multipath: MultipathChannel,
                          sample_rate_hz: float = Numerology().sample_rate_hz):
    """Channel snapshot for one SSB epoch of a moving receiver.

    The first path of the static profile carries the geometry: its delay is
    extended by the propagation delay of the current radial distance and its
    gain rotated by the carrier phase -2 pi r/lambda.  Later paths keep the
    static profile.  Returns (channel, carrier_phase_offset_rad).
    """
    t = epoch_index * traj.ssb_period_s
    r = traj.radial_distance(t)
    extra_delay = r / SPEED_OF_LIGHT * sample_rate_hz
    phase = -2 * np.pi * r / traj.wavelength_m
    first = static_multipath.paths[0]
    moved = PathComponent(gain=first.gain * np.exp(1j * phase),
                          delay=first.delay + extra_delay)
    paths = (moved,) + static_multipath.paths[1:]
    if len(paths) > 1 and paths[0].delay >= paths[1].delay:
        raise ValueError("moving first path caught up with the next static path")
    return MultipathChannel(paths), phase
