"""Uplink massive MIMO detection with 1-bit ADCs and expected soft symbols."""

from .air_interface import Constellation, bpsk, constellation_by_label, qam16, qpsk
from .channel import ChannelScenario, build_scenario, one_ring_covariance
from .config import ExperimentConfig, load_config
from .estimator import blmmse_estimate, estimate_energy
from .expectations import ExpectationTable, build_expectation_table, perfect_csi_table
from .moments import QuantizedMoments, compute_moments
from .pilots import PilotBook, dft_pilots, zadoff_chu_pilots
from .receivers import conventional_receiver, lmmd_receiver
from .simulation import SerTable, emit_csv, run_sweep

__version__ = "0.1.0"
