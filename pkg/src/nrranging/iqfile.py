"""IQ capture files: interleaved binary samples plus a JSON sidecar.

Two wire formats, both little-endian and interleaved I then Q per sample:

* ``cf32le`` - complex 32-bit float
* ``ci16le`` - complex 16-bit signed integer, scaled by 1/32768 on read

The sidecar lives next to the capture as ``<name>.json`` and must carry
``sample_rate_hz``, ``center_freq_hz`` and ``format``; ``capture_time``,
``gain_db`` and ``source`` are optional free-form metadata.
"""

import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import CaptureFormatError, MetadataError

FORMATS = ("cf32le", "ci16le")
INT16_SCALE = 32768.0

# kaiser beta for ~80 dB stopband in the polyphase resampler
_KAISER_BETA = 7.8562


@dataclass
class IqMeta:
    """Capture metadata mirrored in the JSON sidecar."""

    sample_rate_hz: float
    center_freq_hz: float
    fmt: str = "cf32le"
    capture_time: str | None = None
    gain_db: float | None = None
    source: str = "synthetic"

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise MetadataError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.fmt not in FORMATS:
            raise MetadataError(f"unknown format {self.fmt!r}; expected one of {FORMATS}")


@dataclass
class IqRecording:
    """Complex baseband samples plus their capture metadata."""

    samples: np.ndarray
    meta: IqMeta

    def __post_init__(self):
        if len(self.samples) == 0:
            raise CaptureFormatError("recording has no samples")


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def _meta_to_sidecar(meta: IqMeta) -> dict:
    d = asdict(meta)
    d["format"] = d.pop("fmt")
    return d


def _meta_from_sidecar(d: dict) -> IqMeta:
    try:
        return IqMeta(sample_rate_hz=float(d["sample_rate_hz"]),
                      center_freq_hz=float(d["center_freq_hz"]),
                      fmt=str(d["format"]),
                      capture_time=d.get("capture_time"),
                      gain_db=d.get("gain_db"),
                      source=d.get("source", "unknown"))
    except KeyError as missing:
        raise MetadataError(f"sidecar missing required key {missing}") from None


def write_iq(path, samples: np.ndarray, meta: IqMeta) -> None:
    """Write samples in the sidecar's format and the sidecar itself."""
    path = Path(path)
    x = np.asarray(samples)
    if meta.fmt == "cf32le":
        inter = np.empty(2 * len(x), dtype="<f4")
        inter[0::2] = x.real.astype(np.float32)
        inter[1::2] = x.imag.astype(np.float32)
    else:
        inter = np.empty(2 * len(x), dtype="<i2")
        re = np.clip(np.round(x.real * INT16_SCALE), -32768, 32767)
        im = np.clip(np.round(x.imag * INT16_SCALE), -32768, 32767)
        inter[0::2] = re.astype(np.int16)
        inter[1::2] = im.astype(np.int16)
    inter.tofile(path)
    with open(sidecar_path(path), "w") as f:
        json.dump(_meta_to_sidecar(meta), f, indent=2, sort_keys=True)
        f.write("\n")


def read_iq(path, format_spec: str | None = None) -> IqRecording:
    """Decode a capture file; metadata comes from the mandatory sidecar.

    ``format_spec`` may assert the expected wire format; a mismatch with the
    sidecar is a metadata error rather than a silent reinterpretation.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    side = sidecar_path(path)
    if not side.exists():
        raise MetadataError(f"missing sidecar {side}")
    with open(side) as f:
        try:
            meta = _meta_from_sidecar(json.load(f))
        except json.JSONDecodeError as err:
            raise MetadataError(f"sidecar {side} is not valid JSON: {err}") from None
    if format_spec is not None and format_spec != meta.fmt:
        raise MetadataError(
            f"requested format {format_spec!r} contradicts sidecar {meta.fmt!r}")

    n_bytes = path.stat().st_size
    if n_bytes == 0:
        raise CaptureFormatError(f"{path} is empty")
    item = 4 if meta.fmt == "cf32le" else 2
    if n_bytes % (2 * item) != 0:
        raise CaptureFormatError(
            f"{path}: {n_bytes} bytes is not a whole number of I/Q pairs")
    if meta.fmt == "cf32le":
        raw = np.fromfile(path, dtype="<f4")
        samples = raw[0::2].astype(np.complex128)
        samples += 1j * raw[1::2]
    else:
        raw = np.fromfile(path, dtype="<i2").astype(np.float64) / INT16_SCALE
        samples = raw[0::2] + 1j * raw[1::2]
    return IqRecording(samples=samples, meta=meta)


def resample_recording(rec: IqRecording, target_rate_hz: float) -> IqRecording:
    """Polyphase-resample a capture to the processing rate.

    The rate ratio must be rational with small terms (true for the usual
    SDR rates); the kaiser-windowed filter gives ~80 dB stopband, which
    bounds the timing error the resampler itself can introduce.
    """
    ratio = Fraction(target_rate_hz / rec.meta.sample_rate_hz).limit_denominator(10_000)
    if abs(float(ratio) - target_rate_hz / rec.meta.sample_rate_hz) > 1e-12:
        raise MetadataError(
            f"cannot resample {rec.meta.sample_rate_hz} Hz to {target_rate_hz} Hz: "
            "ratio is not a small rational")
    if ratio == 1:
        return rec
    out = resample_poly(rec.samples, ratio.numerator, ratio.denominator,
                        window=("kaiser", _KAISER_BETA))
    meta = IqMeta(sample_rate_hz=target_rate_hz, center_freq_hz=rec.meta.center_freq_hz,
                  fmt=rec.meta.fmt, capture_time=rec.meta.capture_time,
                  gain_db=rec.meta.gain_db, source=rec.meta.source + "+resampled")
    return IqRecording(samples=np.asarray(out, dtype=np.complex128), meta=meta)
