"""Software-defined 5G NR downlink ranging toolkit.

Generates standards-shaped SSB waveforms, simulates multipath/impairment
channels, and runs a full ranging receiver: coarse synchronization,
matching-pursuit multipath acquisition, DLL delay tracking and carrier-phase
range estimation, plus the closed-form ACF / S-curve analysis backing it.
"""

__version__ = "0.1.0"

from .channel import (
    Impairments,
    MultipathChannel,
    PathComponent,
    Trajectory,
    apply_channel,
    apply_channel_to_grid,
    trajectory_to_channel,
)
from .grid import (
    CellIdentity,
    Numerology,
    PilotSet,
    SsbGrid,
    generate_pbch_dmrs,
    generate_pss,
    generate_sss,
    map_ssb_grid,
    ofdm_demodulate,
    ofdm_modulate,
)
from .iqfile import IqMeta, IqRecording, read_iq, write_iq
from .ranging import (
    AcquiredPath,
    AcquisitionConfig,
    DllTrackState,
    RangeTrack,
    acquire_multipaths,
    carrier_phase_range,
    dll_step,
    emlp_discriminator,
    phase_smooth_toa,
    update_channel_coeff,
)
from .scenario import Scenario, load_scenario, save_scenario, synthesize_capture
from .sync import (
    CoarseSyncResult,
    coarse_synchronize,
    compute_cell_id,
    detect_pss,
    detect_sss,
    estimate_cfo,
    extract_dmrs,
)
from .pipeline import PipelineConfig, run_pipeline, run_scenario_windows, write_results
from .theory import (
    AcfParams,
    discriminator_gain,
    ideal_acf_approx,
    ideal_acf_exact,
    s_curve,
    s_curve_exact,
)
