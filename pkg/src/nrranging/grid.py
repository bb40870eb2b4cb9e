"""SSB synchronization sequences, resource grid and OFDM modulation.

Conventions used throughout the package:

* An SSB resource grid is a (240, 4) complex array indexed [subcarrier, symbol].
* SSB subcarrier ``p`` (0..239) maps to FFT bin ``(p - 120) mod n_fft``, i.e.
  the grid is centered on DC.  The signed bin index ``nu(p) = p - 120`` is what
  enters every frequency-domain delay formula: a path delayed by ``tau``
  samples multiplies subcarrier ``p`` by ``exp(-2j*pi*nu(p)*tau/n_fft)``.
* Time-domain symbols are ``s(k) = (1/sqrt(N)) * sum_b C(b) exp(2j*pi*k*b/N)``
  with the cyclic prefix prepended, so modulation/demodulation are unitary.
* Within one SSB all four symbols carry the normal-length cyclic prefix.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

N_SSB_SUBCARRIERS = 240
N_SSB_SYMBOLS = 4
PSS_SYMBOL = 0
SSS_SYMBOL = 2
SYNC_SC_FIRST = 56          # PSS/SSS occupy subcarriers 56..182
SYNC_SC_LAST = 182
N_DMRS_PER_SSB = 144

_SUPPORTED_SCS = (15e3, 30e3)


@dataclass(frozen=True)
class Numerology:
    """OFDM parameter set for the SSB processing path.

    The SSB path runs at a fixed 256-point FFT; 30 kHz subcarrier spacing
    gives the 7.68 Msps rate all delay/ToA quantities refer to.
    """

    scs_hz: float = 30e3
    fft_size: int = 256
    cp_len_normal: int = 18
    cp_len_first: int = 20

    def __post_init__(self):
        if self.scs_hz not in _SUPPORTED_SCS:
            raise ValueError(f"unsupported subcarrier spacing {self.scs_hz} Hz")
        if not 0 < self.cp_len_normal <= self.cp_len_first < self.fft_size:
            raise ValueError("require 0 < cp_len_normal <= cp_len_first < fft_size")

    @property
    def sample_rate_hz(self) -> float:
        return self.scs_hz * self.fft_size

    @property
    def symbol_len(self) -> int:
        """Samples per OFDM symbol including the normal CP."""
        return self.fft_size + self.cp_len_normal

    @property
    def ssb_len(self) -> int:
        """Samples spanned by one 4-symbol SSB."""
        return N_SSB_SYMBOLS * self.symbol_len


@dataclass(frozen=True)
class CellIdentity:
    """Physical cell identity split into its SSS/PSS sequence numbers."""

    m1: int
    m2: int

    def __post_init__(self):
        if not 0 <= self.m1 <= 335:
            raise ValueError(f"m1 out of range: {self.m1}")
        if not 0 <= self.m2 <= 2:
            raise ValueError(f"m2 out of range: {self.m2}")

    @property
    def cell_id(self) -> int:
        return 3 * self.m1 + self.m2

    @property
    def dmrs_offset_v(self) -> int:
        return self.cell_id % 4

    @classmethod
    def from_cell_id(cls, cell_id: int) -> "CellIdentity":
        if not 0 <= cell_id <= 1007:
            raise ValueError(f"cell_id out of range: {cell_id}")
        return cls(m1=cell_id // 3, m2=cell_id % 3)


@dataclass
class PilotSet:
    """DM-RS reference symbols with their grid coordinates.

    ``indices`` are SSB subcarrier numbers (0..239) and may repeat across
    symbols; ``symbols`` gives the SSB symbol (1..3) of each entry.  Order is
    ascending symbol, then ascending subcarrier.
    """

    indices: np.ndarray
    symbols: np.ndarray
    values: np.ndarray

    @property
    def count(self) -> int:
        return len(self.values)


@dataclass
class SsbGrid:
    """One SSB resource grid: (240 subcarriers, 4 symbols), plus its cell."""

    grid: np.ndarray
    cell: CellIdentity
    ssb_index: int = 0


def generate_pss(m2: int) -> np.ndarray:
    """Length-127 BPSK primary synchronization sequence for m2 in {0,1,2}."""
    if not 0 <= m2 <= 2:
        raise ValueError(f"m2 out of range: {m2}")
    x = np.empty(127, dtype=np.int64)
    x[:7] = [0, 1, 1, 0, 1, 1, 1]
    for i in range(120):
        x[i + 7] = (x[i + 4] + x[i]) % 2
    n = np.arange(127)
    return (1 - 2 * x[(n + 43 * m2) % 127]).astype(np.float64)


def generate_sss(m1: int, m2: int) -> np.ndarray:
    """Length-127 BPSK secondary synchronization sequence."""
    if not 0 <= m1 <= 335:
        raise ValueError(f"m1 out of range: {m1}")
    if not 0 <= m2 <= 2:
        raise ValueError(f"m2 out of range: {m2}")
    x0 = np.empty(127, dtype=np.int64)
    x1 = np.empty(127, dtype=np.int64)
    x0[:7] = [1, 0, 0, 0, 0, 0, 0]
    x1[:7] = [1, 0, 0, 0, 0, 0, 0]
    for i in range(120):
        x0[i + 7] = (x0[i + 4] + x0[i]) % 2
        x1[i + 7] = (x1[i + 1] + x1[i]) % 2
    m0 = 15 * (m1 // 112) + 5 * m2
    m1p = m1 % 112
    n = np.arange(127)
    seq = (1 - 2 * x0[(n + m0) % 127]) * (1 - 2 * x1[(n + m1p) % 127])
    return seq.astype(np.float64)


def gold_sequence(c_init: int, length: int) -> np.ndarray:
    """Length-31 Gold pseudo-random bit sequence with the standard 1600 offset."""
    if length < 1:
        raise ValueError("length must be positive")
    nc = 1600
    total = nc + length
    x1 = np.zeros(total + 31, dtype=np.int64)
    x2 = np.zeros(total + 31, dtype=np.int64)
    x1[0] = 1
    for i in range(31):
        x2[i] = (c_init >> i) & 1
    for i in range(total):
        x1[i + 31] = (x1[i + 3] + x1[i]) % 2
        x2[i + 31] = (x2[i + 3] + x2[i + 2] + x2[i + 1] + x2[i]) % 2
    return (x1[nc:nc + length] + x2[nc:nc + length]) % 2


def dmrs_subcarriers(v: int, symbol: int) -> np.ndarray:
    """DM-RS subcarrier indices on one SSB symbol for frequency offset v."""
    if not 0 <= v <= 3:
        raise ValueError(f"v out of range: {v}")
    if symbol in (1, 3):
        return np.arange(0, 240, 4) + v
    if symbol == 2:
        return np.concatenate([np.arange(0, 48, 4), np.arange(192, 240, 4)]) + v
    raise ValueError(f"no DM-RS on SSB symbol {symbol}")


def pbch_data_subcarriers(v: int, symbol: int) -> np.ndarray:
    """PBCH data subcarrier indices (DM-RS positions excluded) on one symbol."""
    dmrs = dmrs_subcarriers(v, symbol)
    if symbol in (1, 3):
        region = np.arange(240)
    else:
        region = np.concatenate([np.arange(48), np.arange(192, 240)])
    return np.setdiff1d(region, dmrs)


def generate_pbch_dmrs(cell: CellIdentity, ssb_index: int = 0,
                       half_frame: int = 0, l_max: int = 8) -> PilotSet:
    """QPSK DM-RS pilots for one SSB, mapped to their grid coordinates.

    The scrambling seed follows the standard construction from the cell id
    and the SSB index LSBs (two LSBs plus the half-frame bit when l_max is 4,
    three LSBs otherwise).  144 pilots per SSB: 60 + 24 + 60 on symbols 1..3.
    """
    if ssb_index < 0 or ssb_index >= l_max:
        raise ValueError(f"ssb_index {ssb_index} outside burst set of size {l_max}")
    if l_max == 4:
        i_bar = ssb_index % 4 + 4 * int(bool(half_frame))
    else:
        i_bar = ssb_index % 8
    cid = cell.cell_id
    c_init = (2 ** 11 * (i_bar + 1) * (cid // 4 + 1)
              + 2 ** 6 * (i_bar + 1) + cid % 4)
    bits = gold_sequence(c_init, 2 * N_DMRS_PER_SSB)
    values = ((1 - 2 * bits[0::2]) + 1j * (1 - 2 * bits[1::2])) / np.sqrt(2.0)

    v = cell.dmrs_offset_v
    indices = []
    symbols = []
    for sym in (1, 2, 3):
        sc = dmrs_subcarriers(v, sym)
        indices.append(sc)
        symbols.append(np.full(len(sc), sym))
    return PilotSet(indices=np.concatenate(indices),
                    symbols=np.concatenate(symbols),
                    values=values.astype(np.complex128))


def _pbch_filler(cell: CellIdentity, ssb_index: int, count: int) -> np.ndarray:
    """Deterministic unit-power QPSK filler for the PBCH data REs.

    Payload content is irrelevant to ranging; seeding from (cell_id,
    ssb_index) keeps generated captures reproducible.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cell.cell_id, ssb_index]))
    bits = rng.integers(0, 2, size=(count, 2))
    return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / np.sqrt(2.0)


def map_ssb_grid(cell: CellIdentity, ssb_index: int = 0,
                 pbch_payload: np.ndarray | None = None,
                 l_max: int = 8, half_frame: int = 0) -> SsbGrid:
    """Assemble the (240, 4) SSB grid: PSS, SSS, PBCH data and DM-RS.

    ``pbch_payload`` may supply the 432 PBCH data symbols; by default they
    are filled with seeded unit-power QPSK.
    """
    grid = np.zeros((N_SSB_SUBCARRIERS, N_SSB_SYMBOLS), dtype=np.complex128)
    sync_slice = slice(SYNC_SC_FIRST, SYNC_SC_LAST + 1)
    grid[sync_slice, PSS_SYMBOL] = generate_pss(cell.m2)
    grid[sync_slice, SSS_SYMBOL] = generate_sss(cell.m1, cell.m2)

    dmrs = generate_pbch_dmrs(cell, ssb_index, half_frame=half_frame, l_max=l_max)
    for sym in (1, 2, 3):
        sel = dmrs.symbols == sym
        grid[dmrs.indices[sel], sym] = dmrs.values[sel]

    v = cell.dmrs_offset_v
    data_sc = {sym: pbch_data_subcarriers(v, sym) for sym in (1, 2, 3)}
    n_data = sum(len(sc) for sc in data_sc.values())
    if pbch_payload is None:
        payload = _pbch_filler(cell, ssb_index, n_data)
    else:
        payload = np.asarray(pbch_payload, dtype=np.complex128)
        if len(payload) != n_data:
            raise ValueError(f"PBCH payload must have {n_data} symbols")
    pos = 0
    for sym in (1, 2, 3):
        sc = data_sc[sym]
        grid[sc, sym] = payload[pos:pos + len(sc)]
        pos += len(sc)
    return SsbGrid(grid=grid, cell=cell, ssb_index=ssb_index)


@lru_cache(maxsize=128)
def _cached_ssb_grid(cell_id: int, ssb_index: int) -> "SsbGrid":
    ssb = map_ssb_grid(CellIdentity.from_cell_id(cell_id), ssb_index)
    ssb.grid.setflags(write=False)
    return ssb


def cached_ssb_grid(cell: CellIdentity, ssb_index: int = 0) -> SsbGrid:
    """Memoized SSB grid (read-only array); generation runs LFSRs in Python."""
    return _cached_ssb_grid(cell.cell_id, ssb_index)


@lru_cache(maxsize=128)
def _cached_pbch_dmrs(cell_id: int, ssb_index: int) -> PilotSet:
    pilots = generate_pbch_dmrs(CellIdentity.from_cell_id(cell_id), ssb_index)
    for arr in (pilots.indices, pilots.symbols, pilots.values):
        arr.setflags(write=False)
    return pilots


def cached_pbch_dmrs(cell: CellIdentity, ssb_index: int = 0) -> PilotSet:
    """Memoized DM-RS replica (read-only arrays) for per-epoch extraction."""
    return _cached_pbch_dmrs(cell.cell_id, ssb_index)


def subcarrier_bins(n_subcarriers: int, n_fft: int) -> np.ndarray:
    """FFT bin index of each grid subcarrier (grid centered on DC)."""
    nu = np.arange(n_subcarriers) - n_subcarriers // 2
    return nu % n_fft


def signed_bins(indices: np.ndarray, n_subcarriers: int = N_SSB_SUBCARRIERS) -> np.ndarray:
    """Signed bin index nu(p) = p - n_sc/2 used in delay phase ramps."""
    return np.asarray(indices) - n_subcarriers // 2


def ofdm_modulate(grid, num: Numerology) -> np.ndarray:
    """OFDM-modulate a resource grid to baseband samples with cyclic prefixes.

    Accepts an SsbGrid or a raw (n_subcarriers, n_symbols) array.  Each
    symbol is the unitary 256-point inverse transform of its subcarriers
    (centered mapping) with cp_len_normal samples prepended.
    """
    g = grid.grid if isinstance(grid, SsbGrid) else np.asarray(grid)
    n_sc, n_sym = g.shape
    if n_sc > num.fft_size:
        raise ValueError(f"grid of {n_sc} subcarriers exceeds FFT size {num.fft_size}")
    bins = subcarrier_bins(n_sc, num.fft_size)
    cp = num.cp_len_normal
    out = np.empty(n_sym * (num.fft_size + cp), dtype=np.complex128)
    pos = 0
    for m in range(n_sym):
        spec = np.zeros(num.fft_size, dtype=np.complex128)
        spec[bins] = g[:, m]
        sym = np.fft.ifft(spec) * np.sqrt(num.fft_size)
        out[pos:pos + cp] = sym[-cp:]
        out[pos + cp:pos + cp + num.fft_size] = sym
        pos += cp + num.fft_size
    return out


def ofdm_demodulate(samples: np.ndarray, num: Numerology, start_index: int,
                    n_symbols: int = N_SSB_SYMBOLS,
                    n_subcarriers: int = N_SSB_SUBCARRIERS) -> np.ndarray:
    """Recover the (n_subcarriers, n_symbols) grid from samples.

    ``start_index`` is the CP start of symbol 0 and places the FFT windows;
    shifting it by d rotates subcarrier p by exp(+2j*pi*nu(p)*d/N).
    """
    samples = np.asarray(samples)
    cp, n = num.cp_len_normal, num.fft_size
    need = start_index + n_symbols * (cp + n)
    if start_index < 0 or need > len(samples):
        raise ValueError(
            f"capture too short: need samples [{start_index}, {need}), have {len(samples)}")
    bins = subcarrier_bins(n_subcarriers, n)
    out = np.empty((n_subcarriers, n_symbols), dtype=np.complex128)
    for m in range(n_symbols):
        w0 = start_index + m * (cp + n) + cp
        spec = np.fft.fft(samples[w0:w0 + n]) / np.sqrt(n)
        out[:, m] = spec[bins]
    return out
