"""Multipath acquisition, per-path DLL tracking and carrier-phase ranging.

The frequency-domain machinery all builds on one atom: a path at delay tau
(samples) turns the pilot replica c(p) into c(p) exp(-2j pi nu(p) tau / N)
with nu(p) the signed FFT bin of subcarrier p.  Acquisition greedily picks
atoms from a delay grid and jointly re-fits their coefficients by least
squares; tracking steers each path's delay with an early-minus-late-power
discriminator normalized so its output approximates the timing error
(replica delay minus true delay), then refreshes the channel coefficient by
projecting the interference-cancelled pilots onto the tracked replica.

Carrier phase is read per epoch from the first path's coefficient; wrapped
phase increments convert to range increments of at most half a wavelength,
positive when moving toward the transmitter.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import SPEED_OF_LIGHT
from .grid import PilotSet, signed_bins
from .theory import discriminator_gain

logger = logging.getLogger(__name__)

DEFAULT_XI = 0.5
STATIC_LOOP_BANDWIDTH_HZ = 25.0
DYNAMIC_LOOP_BANDWIDTH_HZ = 0.5
DEFAULT_UPDATE_PERIOD_S = 0.02
MAX_LOOP_GAIN = 0.5   # 4*B*T for the 25 Hz static setting would be 2.0: unstable
LOCK_MISS_LIMIT = 10  # consecutive out-of-pull-in epochs before flagging


def delay_shift(values: np.ndarray, indices: np.ndarray, delay: float,
                n_fft: int = 256) -> np.ndarray:
    """Shift replica values to a (fractional) delay in samples."""
    nu = signed_bins(indices)
    return values * np.exp(-2j * np.pi * nu * delay / n_fft)


def delay_dictionary(replica: PilotSet, taus: np.ndarray, n_fft: int = 256) -> np.ndarray:
    """(N_p, N_tau) matrix of delay atoms over a grid of candidate delays."""
    nu = signed_bins(replica.indices)
    return replica.values[:, None] * np.exp(
        -2j * np.pi * nu[:, None] * np.asarray(taus)[None, :] / n_fft)


def cir_magnitude(d: np.ndarray, replica: PilotSet, taus: np.ndarray,
                  n_fft: int = 256) -> np.ndarray:
    """Matched-filter CIR scan |<atom_tau, d>|/N_p over the delay grid."""
    atoms = delay_dictionary(replica, taus, n_fft)
    return np.abs(atoms.conj().T @ d) / replica.count


@dataclass(frozen=True)
class AcquisitionConfig:
    """Delay-grid search settings for the matching-pursuit acquisition.

    The grid must reach past demod_guard plus the expected delay spread,
    since delays are measured from the guarded demodulation anchor.
    """

    delta_tau: float = 0.1
    n_tau: int = 141
    max_paths: int = 6
    power_threshold: float = 0.8

    def __post_init__(self):
        if not 0 < self.delta_tau <= 0.5:
            raise ValueError(f"delta_tau must be in (0, 0.5], got {self.delta_tau}")
        if not 0 < self.power_threshold <= 1:
            raise ValueError("power_threshold must be in (0, 1]")
        if self.max_paths < 1 or self.n_tau < 1:
            raise ValueError("max_paths and n_tau must be >= 1")

    @property
    def grid(self) -> np.ndarray:
        return self.delta_tau * np.arange(self.n_tau)


@dataclass(frozen=True)
class AcquiredPath:
    """One estimated path from acquisition: delay in samples, complex gain."""

    delay: float
    coeff: complex


@dataclass
class AcquisitionResult:
    paths: list
    residual_power_fraction: float
    residual_history: list  # residual fraction after each iteration


def acquire_multipaths(d: np.ndarray, replica: PilotSet,
                       cfg: AcquisitionConfig = AcquisitionConfig(),
                       n_fft: int = 256) -> AcquisitionResult:
    """Order-recursive least-squares matching pursuit over the delay grid.

    Each iteration picks the grid atom best correlated with the current
    residual, jointly re-solves the coefficients of every retained delay,
    and subtracts the fit.  Iteration stops once the fit holds at least
    ``power_threshold`` of the pilot power or ``max_paths`` is reached.
    Paths come back sorted by ascending delay.
    """
    d = np.asarray(d, dtype=np.complex128)
    if replica.count < cfg.max_paths:
        raise ValueError("need at least as many pilots as paths")
    total = float(np.sum(np.abs(d) ** 2))
    if total <= 0:
        raise ValueError("pilot vector has no energy")

    atoms = delay_dictionary(replica, cfg.grid, n_fft)
    residual = d.copy()
    chosen: list[int] = []
    coeffs = np.zeros(0, dtype=np.complex128)
    history = []
    while len(chosen) < cfg.max_paths:
        scores = np.abs(atoms.conj().T @ residual)
        scores[chosen] = -1.0
        chosen.append(int(np.argmax(scores)))
        basis = atoms[:, chosen]
        coeffs = np.linalg.lstsq(basis, d, rcond=None)[0]
        residual = d - basis @ coeffs
        frac = float(np.sum(np.abs(residual) ** 2)) / total
        history.append(frac)
        if 1.0 - frac >= cfg.power_threshold:
            break

    delays = cfg.grid[chosen]
    order = np.argsort(delays)
    paths = [AcquiredPath(delay=float(delays[i]), coeff=complex(coeffs[i]))
             for i in order]
    return AcquisitionResult(paths=paths, residual_power_fraction=history[-1],
                             residual_history=history)


def emlp_discriminator(z: np.ndarray, replica_shifted: np.ndarray,
                       indices: np.ndarray, xi: float, k_norm: float,
                       n_fft: int = 256) -> float:
    """Normalized early-minus-late-power timing discriminator.

    ``replica_shifted`` is the replica already at the tracked delay; the
    early/late pair sits at -+xi samples around it.  The output approximates
    the timing error (tracked delay minus true delay) near lock when
    ``k_norm`` is |h|^2 times the closed-form S-curve gain.
    """
    if k_norm == 0:
        raise ValueError("k_norm must be nonzero")
    nu = signed_bins(indices)
    ramp = np.exp(2j * np.pi * nu * xi / n_fft)
    r_early = np.mean(z * np.conj(replica_shifted * ramp))
    r_late = np.mean(z * np.conj(replica_shifted / ramp))
    return float((np.abs(r_early) ** 2 - np.abs(r_late) ** 2) / k_norm)


@dataclass
class DllTrackState:
    """Per-path delay-locked loop state."""

    path_index: int
    delay: float
    coeff: complex
    xi: float = DEFAULT_XI
    loop_bandwidth_hz: float = DYNAMIC_LOOP_BANDWIDTH_HZ
    update_period_s: float = DEFAULT_UPDATE_PERIOD_S
    k_norm: float = 1.0
    gain: float = field(init=False)
    last_error: float = 0.0
    miss_streak: int = 0
    weak_streak: int = 0
    lock_ok: bool = True

    def __post_init__(self):
        if not 0 < self.xi <= 0.5:
            raise ValueError(f"xi must be in (0, 0.5], got {self.xi}")
        if self.loop_bandwidth_hz <= 0 or self.update_period_s <= 0:
            raise ValueError("loop bandwidth and update period must be positive")
        g = 4.0 * self.loop_bandwidth_hz * self.update_period_s
        if g > MAX_LOOP_GAIN:
            logger.warning("loop gain 4*B*T = %.2f clamped to %.2f "
                           "(B=%.1f Hz, T=%.0f ms)", g, MAX_LOOP_GAIN,
                           self.loop_bandwidth_hz, 1e3 * self.update_period_s)
            g = MAX_LOOP_GAIN
        self.gain = g


def init_track_states(paths, xi: float = DEFAULT_XI,
                      loop_bandwidth_hz: float = DYNAMIC_LOOP_BANDWIDTH_HZ,
                      update_period_s: float = DEFAULT_UPDATE_PERIOD_S,
                      k_d: float | None = None) -> list:
    """Build one DLL state per acquired path, normalized by |h|^2 k_d."""
    if k_d is None:
        k_d = discriminator_gain(xi)
    states = []
    for i, p in enumerate(paths):
        k_norm = max(abs(p.coeff) ** 2, 1e-12) * k_d
        states.append(DllTrackState(path_index=i, delay=p.delay, coeff=p.coeff,
                                    xi=xi, loop_bandwidth_hz=loop_bandwidth_hz,
                                    update_period_s=update_period_s, k_norm=k_norm))
    return states


def subtract_paths(d: np.ndarray, replica: PilotSet, earlier_paths,
                   n_fft: int = 256) -> np.ndarray:
    """Interference cancellation: remove earlier paths' reconstructions."""
    z = np.asarray(d, dtype=np.complex128).copy()
    for delay, coeff in earlier_paths:
        z -= coeff * delay_shift(replica.values, replica.indices, delay, n_fft)
    return z


def dll_step(state: DllTrackState, d: np.ndarray, replica: PilotSet,
             earlier_paths=(), n_fft: int = 256,
             lock_miss_limit: int = LOCK_MISS_LIMIT) -> np.ndarray:
    """One tracking epoch for one path: discriminate, filter, steer the delay.

    ``earlier_paths`` holds (delay, coeff) snapshots of already-tracked
    paths, taken at epoch start, which are subtracted from the pilots before
    discrimination.  The first-order loop applies gain*discriminator as a
    negative-feedback correction.  Returns the interference-cancelled pilot
    vector so the caller can refresh the channel coefficient from it.
    """
    z = subtract_paths(d, replica, earlier_paths, n_fft)
    c_hat = delay_shift(replica.values, replica.indices, state.delay, n_fft)
    a = emlp_discriminator(z, c_hat, replica.indices, state.xi, state.k_norm, n_fft)
    if abs(a) > 2 * state.xi:
        state.miss_streak += 1
        if state.miss_streak >= lock_miss_limit:
            state.lock_ok = False
    else:
        state.miss_streak = 0
    correction = state.gain * a
    state.delay -= correction
    state.last_error = correction
    return z


def update_channel_coeff(tracked_replica: np.ndarray, z: np.ndarray) -> complex:
    """Least-squares refresh of one path coefficient: (c^H c)^-1 c^H z."""
    c = np.asarray(tracked_replica, dtype=np.complex128)
    energy = float(np.sum(np.abs(c) ** 2))
    if energy <= 0:
        raise ValueError("replica vector has zero norm")
    return complex(np.vdot(c, z) / energy)


def track_epoch(states: list, d: np.ndarray, replica: PilotSet, k_d: float,
                n_fft: int = 256, drop_fraction: float = 0.05,
                drop_after: int = 10) -> list:
    """Run all per-path loops for one epoch, in ascending-delay order.

    Earlier paths are subtracted using their epoch-start snapshots; after
    the delay update each coefficient is refreshed from its cancelled pilot
    vector and the discriminator normalization re-derived from it.  Paths
    whose refreshed power stays below ``drop_fraction`` of the total for
    ``drop_after`` consecutive epochs are dropped.  Returns the surviving
    states (ascending delay).
    """
    states.sort(key=lambda s: s.delay)
    snapshot = [(s.delay, s.coeff) for s in states]
    for l, state in enumerate(states):
        z = dll_step(state, d, replica, earlier_paths=snapshot[:l], n_fft=n_fft)
        c_new = delay_shift(replica.values, replica.indices, state.delay, n_fft)
        state.coeff = update_channel_coeff(c_new, z)
        state.k_norm = max(abs(state.coeff) ** 2, 1e-12) * k_d

    total = sum(abs(s.coeff) ** 2 for s in states)
    survivors = []
    for state in states:
        if total > 0 and abs(state.coeff) ** 2 < drop_fraction * total:
            state.weak_streak += 1
        else:
            state.weak_streak = 0
        if state.weak_streak >= drop_after:
            logger.info("dropping path %d at delay %.2f: weak for %d epochs",
                        state.path_index, state.delay, state.weak_streak)
            continue
        survivors.append(state)
    return survivors


def wrap_phase(x: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return (x - np.pi) % (-2 * np.pi) + np.pi


@dataclass
class RangeTrack:
    """Carrier-phase range accumulator over SSB epochs."""

    wavelength_m: float
    epoch_index: list = field(default_factory=list)
    toa_samples: list = field(default_factory=list)
    phase_rad: list = field(default_factory=list)
    delta_m: list = field(default_factory=list)
    cumulative_m: list = field(default_factory=list)
    lock: list = field(default_factory=list)

    def __len__(self):
        return len(self.epoch_index)


def carrier_phase_range(track: RangeTrack, epoch_index: int, toa_samples: float,
                        phase_rad: float, lock_ok: bool = True) -> float:
    """Append one epoch: range increment from the wrapped phase step.

    Positive increments mean motion toward the transmitter.  The first epoch
    records a zero increment.  Returns the increment in meters.
    """
    if track.epoch_index:
        dphi = wrap_phase(phase_rad - track.phase_rad[-1])
        delta = dphi / (2 * np.pi) * track.wavelength_m
        cumulative = track.cumulative_m[-1] + delta
    else:
        delta = 0.0
        cumulative = 0.0
    track.epoch_index.append(epoch_index)
    track.toa_samples.append(float(toa_samples))
    track.phase_rad.append(float(phase_rad))
    track.delta_m.append(float(delta))
    track.cumulative_m.append(float(cumulative))
    track.lock.append(bool(lock_ok))
    return delta


def phase_smooth_toa(toa_samples: np.ndarray, delta_m: np.ndarray,
                     window: int = 100,
                     sample_rate_hz: float = 7.68e6) -> np.ndarray:
    """Hatch-style smoothing: noisy ToA blended with phase-derived deltas.

    The prediction advances the previous smoothed ToA by the phase range
    increment converted to samples; motion toward the transmitter shortens
    the ToA, hence the negative sign.
    """
    toa = np.asarray(toa_samples, dtype=float)
    delta = np.asarray(delta_m, dtype=float)
    if toa.shape != delta.shape:
        raise ValueError("toa and delta series must have equal length")
    if window < 1:
        raise ValueError("window must be >= 1")
    out = np.empty_like(toa)
    if len(toa) == 0:
        return out
    out[0] = toa[0]
    w = float(window)
    for i in range(1, len(toa)):
        predicted = out[i - 1] - delta[i] / SPEED_OF_LIGHT * sample_rate_hz
        out[i] = toa[i] / w + (w - 1.0) / w * predicted
    return out
