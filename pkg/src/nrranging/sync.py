"""Coarse synchronization: PSS/SSS search, CFO estimation, DM-RS extraction.

The PSS search is a full-rate exhaustive matched filter over every lag and
all three candidate sequences, normalized by the windowed capture energy so
thresholds are gain-independent (an optional decimated coarse search with
full-rate refinement trades a sample of accuracy for speed).  The SSS is
resolved in the frequency domain over the 336 candidates consistent with
the detected PSS, with an exhaustive 1008-candidate mode available.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import oaconvolve

from .errors import SsbNotFoundError
from .grid import (
    CellIdentity,
    N_SSB_SUBCARRIERS,
    Numerology,
    PilotSet,
    SYNC_SC_FIRST,
    SYNC_SC_LAST,
    cached_pbch_dmrs,
    generate_pss,
    generate_sss,
    ofdm_demodulate,
    subcarrier_bins,
)

DEFAULT_PSS_THRESHOLD = 3.0   # peak-to-mean ratio of the normalized metric
DEFAULT_SSS_THRESHOLD = 0.35  # normalized frequency-domain correlation

_pss_replica_cache: dict = {}
_sss_bank_cache: dict = {}


@dataclass
class PssDetection:
    """Outcome of the PSS search."""

    ssb_start: int
    m2: int
    peak_metric: float
    peak_lag: int
    threshold_ratio: float
    metric_trace: np.ndarray


@dataclass
class CoarseSyncResult:
    """Aggregated coarse synchronization state feeding the ranging stages."""

    ssb_start: int
    m2_hat: int
    m1_hat: int
    cell: CellIdentity
    peak_metric: float
    threshold_ratio: float
    cfo_hat_norm: float
    sss_metric: float
    pss_metric_trace: np.ndarray | None = None


def pss_time_replica(m2: int, num: Numerology) -> np.ndarray:
    """Time-domain PSS symbol (no CP): inverse transform of the placed sequence."""
    key = (m2, num.fft_size)
    if key not in _pss_replica_cache:
        spec = np.zeros(num.fft_size, dtype=np.complex128)
        bins = subcarrier_bins(N_SSB_SUBCARRIERS, num.fft_size)
        spec[bins[SYNC_SC_FIRST:SYNC_SC_LAST + 1]] = generate_pss(m2)
        _pss_replica_cache[key] = np.fft.ifft(spec) * np.sqrt(num.fft_size)
    return _pss_replica_cache[key]


def _sss_bank(m2: int) -> np.ndarray:
    """(336, 127) matrix of all SSS candidates for a given m2."""
    if m2 not in _sss_bank_cache:
        _sss_bank_cache[m2] = np.stack([generate_sss(m1, m2) for m1 in range(336)])
    return _sss_bank_cache[m2]


def detect_pss(samples: np.ndarray, num: Numerology = Numerology(),
               threshold: float = DEFAULT_PSS_THRESHOLD,
               search_decimation: int = 1) -> PssDetection:
    """Correlation search for the PSS over every lag and candidate sequence.

    The metric at lag k is |<replica, r[k:k+N]>| / (||replica|| ||r[k:k+N]||),
    so it lives in [0, 1] regardless of capture gain.  Detection requires the
    peak-to-mean ratio of the winning trace to clear ``threshold``; when
    several SSB repetitions tie (periodic bursts), the earliest wins.

    The default is the full-rate exhaustive search.  ``search_decimation=2``
    runs the search on a filtered half-rate stream (the PSS band fits) and
    refines the winning lag at full rate; the returned metric trace is then
    at the decimated rate.
    """
    if search_decimation > 1:
        return _detect_pss_coarse_refine(samples, num, threshold, search_decimation)
    r = np.asarray(samples, dtype=np.complex128)
    n = num.fft_size
    if len(r) < n:
        raise SsbNotFoundError(f"capture of {len(r)} samples is shorter than one symbol")
    n_valid = len(r) - n + 1

    power = np.abs(r) ** 2
    csum = np.concatenate([[0.0], np.cumsum(power)])
    window_energy = csum[n:n + n_valid] - csum[:n_valid]
    # windows far below the capture's typical power (resampler ramp-up,
    # leading silence) carry no information; their metric is forced to zero
    # rather than amplified out of the Cauchy-Schwarz bound by rounding noise
    energy_floor = 1e-9 * max(csum[-1] / len(r), 1e-300) * n
    valid = window_energy > energy_floor

    best = None
    for m2 in range(3):
        rep = pss_time_replica(m2, num)
        corr = oaconvolve(r, np.conj(rep[::-1]), mode="valid")
        denom = np.sqrt(np.sum(np.abs(rep) ** 2) * np.where(valid, window_energy, 1.0))
        metric = np.where(valid, np.abs(corr) / denom, 0.0)
        peak = float(metric.max())
        if best is None or peak > best[0]:
            best = (peak, m2, metric)

    peak_metric, m2_hat, trace = best
    candidates = np.flatnonzero(trace >= 0.95 * peak_metric)
    peak_lag = int(candidates[0])
    mean_metric = float(trace.mean())
    ratio = peak_metric / mean_metric if mean_metric > 0 else np.inf
    if ratio < threshold:
        raise SsbNotFoundError(
            f"no SSB detected: peak-to-mean {ratio:.2f} below threshold {threshold}",
            metric_trace=trace, threshold_ratio=ratio)
    return PssDetection(ssb_start=peak_lag - num.cp_len_normal, m2=m2_hat,
                        peak_metric=peak_metric, peak_lag=peak_lag,
                        threshold_ratio=ratio, metric_trace=trace)


def _normalized_pss_metric(r: np.ndarray, rep: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Direct normalized correlation at a handful of lags (refinement step)."""
    n = len(rep)
    e_rep = np.sum(np.abs(rep) ** 2)
    out = np.zeros(len(lags))
    for i, k in enumerate(lags):
        seg = r[k:k + n]
        e_win = np.sum(np.abs(seg) ** 2)
        if e_win > 0:
            out[i] = abs(np.vdot(rep, seg)) / np.sqrt(e_rep * e_win)
    return out


def _detect_pss_coarse_refine(samples, num: Numerology, threshold: float,
                              dec: int) -> PssDetection:
    """Half-rate (or coarser) search plus a local full-rate refinement."""
    from scipy.signal import resample_poly

    r = np.asarray(samples, dtype=np.complex128)
    n = num.fft_size
    if len(r) < n:
        raise SsbNotFoundError(f"capture of {len(r)} samples is shorter than one symbol")
    r_dec = resample_poly(r, 1, dec, window=("kaiser", 7.8562))
    n_dec = n // dec
    n_valid = len(r_dec) - n_dec + 1
    if n_valid < 1:
        raise SsbNotFoundError("capture too short for the decimated search")

    power = np.abs(r_dec) ** 2
    csum = np.concatenate([[0.0], np.cumsum(power)])
    window_energy = csum[n_dec:n_dec + n_valid] - csum[:n_valid]
    energy_floor = 1e-9 * max(csum[-1] / len(r_dec), 1e-300) * n_dec
    valid = window_energy > energy_floor

    best = None
    for m2 in range(3):
        rep = resample_poly(pss_time_replica(m2, num), 1, dec,
                            window=("kaiser", 7.8562))[:n_dec]
        corr = oaconvolve(r_dec, np.conj(rep[::-1]), mode="valid")
        denom = np.sqrt(np.sum(np.abs(rep) ** 2) * np.where(valid, window_energy, 1.0))
        metric = np.where(valid, np.abs(corr) / denom, 0.0)
        peak = float(metric.max())
        if best is None or peak > best[0]:
            best = (peak, m2, metric)

    coarse_peak, m2_hat, trace = best
    candidates = np.flatnonzero(trace >= 0.95 * coarse_peak)
    coarse_lag = int(candidates[0])
    mean_metric = float(trace.mean())
    ratio = coarse_peak / mean_metric if mean_metric > 0 else np.inf
    if ratio < threshold:
        raise SsbNotFoundError(
            f"no SSB detected: peak-to-mean {ratio:.2f} below threshold {threshold}",
            metric_trace=trace, threshold_ratio=ratio)

    rep_full = pss_time_replica(m2_hat, num)
    lo = max(dec * coarse_lag - 3 * dec, 0)
    hi = min(dec * coarse_lag + 3 * dec + 1, len(r) - n + 1)
    lags = np.arange(lo, hi)
    fine = _normalized_pss_metric(r, rep_full, lags)
    peak_lag = int(lags[np.argmax(fine)])
    return PssDetection(ssb_start=peak_lag - num.cp_len_normal, m2=m2_hat,
                        peak_metric=float(fine.max()), peak_lag=peak_lag,
                        threshold_ratio=ratio, metric_trace=trace)


def estimate_cfo(samples: np.ndarray, ssb_start: int,
                 num: Numerology = Numerology()) -> float:
    """Fractional CFO (in subcarrier spacings) from CP-to-tail correlation.

    Averages the cyclic-prefix correlation over the four SSB symbols; valid
    for |cfo| < 0.5 subcarrier.
    """
    r = np.asarray(samples)
    cp, n = num.cp_len_normal, num.fft_size
    if ssb_start < 0 or ssb_start + num.ssb_len > len(r):
        raise ValueError("SSB extent outside the capture")
    acc = 0.0 + 0.0j
    for m in range(4):
        c0 = ssb_start + m * (cp + n)
        acc += np.sum(r[c0:c0 + cp] * np.conj(r[c0 + n:c0 + n + cp]))
    # prefix-to-tail correlation carries exp(-2j pi cfo): negate the angle
    return float(-np.angle(acc) / (2 * np.pi))


def compensate_cfo(samples: np.ndarray, cfo_norm: float,
                   num: Numerology = Numerology()) -> np.ndarray:
    """Remove a CFO estimate; the phase ramp is referenced to the slice start.

    Using a local time base keeps every SSB window's compensation phase
    identical across epochs, so estimator noise cannot masquerade as
    carrier-phase motion between epochs.
    """
    if cfo_norm == 0.0:
        return np.asarray(samples, dtype=np.complex128)
    k = np.arange(len(samples))
    return samples * np.exp(-2j * np.pi * k * cfo_norm / num.fft_size)


def detect_sss(samples: np.ndarray, ssb_start: int, m2_hat: int,
               num: Numerology = Numerology(),
               threshold: float = DEFAULT_SSS_THRESHOLD) -> tuple[int, float]:
    """Resolve m1 by correlating the SSS symbol against its 336 candidates.

    ``samples`` should already be CFO-compensated.  Returns (m1, normalized
    correlation metric in [0, 1]).
    """
    r = np.asarray(samples)
    cp, n = num.cp_len_normal, num.fft_size
    w0 = ssb_start + 2 * (cp + n) + cp
    if w0 < 0 or w0 + n > len(r):
        raise ValueError("SSS symbol extends beyond the capture")
    spec = np.fft.fft(r[w0:w0 + n]) / np.sqrt(n)
    bins = subcarrier_bins(N_SSB_SUBCARRIERS, n)
    y = spec[bins[SYNC_SC_FIRST:SYNC_SC_LAST + 1]]
    bank = _sss_bank(m2_hat)
    metrics = np.abs(bank @ np.conj(y)) / (np.linalg.norm(y) * np.sqrt(127.0))
    m1_hat = int(np.argmax(metrics))
    peak = float(metrics[m1_hat])
    if peak < threshold:
        raise SsbNotFoundError(f"SSS not detected: best metric {peak:.3f} "
                               f"below threshold {threshold}")
    return m1_hat, peak


def detect_sss_exhaustive(samples: np.ndarray, ssb_start: int,
                          num: Numerology = Numerology(),
                          threshold: float = DEFAULT_SSS_THRESHOLD
                          ) -> tuple[int, int, float]:
    """Search all 1008 SSS candidates, ignoring the PSS decision.

    The structured search (336 candidates for the detected m2) is the
    default; this mode re-decides (m1, m2) jointly from the SSS symbol
    alone, which can rescue a misdetected PSS at triple the cost.
    """
    best = None
    for m2 in range(3):
        try:
            m1, metric = detect_sss(samples, ssb_start, m2, num, threshold=0.0)
        except SsbNotFoundError:
            continue
        if best is None or metric > best[2]:
            best = (m1, m2, metric)
    if best is None or best[2] < threshold:
        got = 0.0 if best is None else best[2]
        raise SsbNotFoundError(f"SSS not detected: best metric {got:.3f} "
                               f"below threshold {threshold}")
    return best


def compute_cell_id(m1: int, m2: int) -> CellIdentity:
    """Cell identity from the detected sequence numbers (cid = 3 m1 + m2)."""
    return CellIdentity(m1=m1, m2=m2)


def extract_dmrs(samples: np.ndarray, sync: CoarseSyncResult,
                 num: Numerology = Numerology(),
                 start_index: int | None = None) -> tuple[np.ndarray, PilotSet]:
    """CFO-compensate, demodulate and gather the DM-RS of one SSB.

    Returns the 144 received pilot values (symbols 1..3, ascending subcarrier
    within each) paired with the local replica for the detected cell.
    ``start_index`` overrides the sync anchor, e.g. to back the FFT windows
    into the cyclic prefix.
    """
    start = sync.ssb_start if start_index is None else start_index
    d, replica = extract_pilots(samples, start, sync.cell, num,
                                cfo_norm=sync.cfo_hat_norm)
    return d, replica


def extract_pilots(samples: np.ndarray, start_index: int, cell: CellIdentity,
                   num: Numerology = Numerology(), cfo_norm: float = 0.0,
                   ssb_index: int = 0) -> tuple[np.ndarray, PilotSet]:
    """Per-epoch pilot extraction used by the tracking loop."""
    r = np.asarray(samples)
    if start_index < 0 or start_index + num.ssb_len > len(r):
        raise ValueError(
            f"SSB extent [{start_index}, {start_index + num.ssb_len}) outside capture "
            f"of {len(r)} samples")
    window = compensate_cfo(r[start_index:start_index + num.ssb_len], cfo_norm, num)
    grid = ofdm_demodulate(window, num, start_index=0)
    replica = cached_pbch_dmrs(cell, ssb_index)
    d = grid[replica.indices, replica.symbols]
    return d, replica


def coarse_synchronize(samples: np.ndarray, num: Numerology = Numerology(),
                       pss_threshold: float = DEFAULT_PSS_THRESHOLD,
                       sss_threshold: float = DEFAULT_SSS_THRESHOLD,
                       search_decimation: int = 1) -> CoarseSyncResult:
    """Full coarse stage: PSS search, CFO estimate, SSS search, cell identity."""
    pss = detect_pss(samples, num, threshold=pss_threshold,
                     search_decimation=search_decimation)
    if pss.ssb_start < 0 or pss.ssb_start + num.ssb_len > len(samples):
        raise SsbNotFoundError(
            f"detected SSB at {pss.ssb_start} is truncated by the capture",
            metric_trace=pss.metric_trace, threshold_ratio=pss.threshold_ratio)
    cfo = estimate_cfo(samples, pss.ssb_start, num)
    ssb = compensate_cfo(samples[pss.ssb_start:pss.ssb_start + num.ssb_len], cfo, num)
    m1_hat, sss_metric = detect_sss(ssb, 0, pss.m2, num, threshold=sss_threshold)
    cell = compute_cell_id(m1_hat, pss.m2)
    return CoarseSyncResult(ssb_start=pss.ssb_start, m2_hat=pss.m2, m1_hat=m1_hat,
                            cell=cell, peak_metric=pss.peak_metric,
                            threshold_ratio=pss.threshold_ratio,
                            cfo_hat_norm=cfo, sss_metric=sss_metric,
                            pss_metric_trace=pss.metric_trace)
