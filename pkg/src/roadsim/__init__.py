"""Outdoor road-acoustics simulation and SRP-PHAT localization."""
from .errors import (ConfigurationError, DelayRangeError, InvalidGeometryError, InvalidInputError,
                     InvalidParameterError, OutOfRangeError, RoadSimError, WavFormatError)
from .geometry import PathGeometry, Point3, Trajectory, path_geometry, position_at
from .dsp import DelayLine, FirFilter, Interpolator, fir_apply, fir_design_freq_sampling
from .propagation import (AtmosphericConditions, ReflectionModel, alpha_air, build_air_bank,
                          default_asphalt_filter, spreading_gains)
from .renderer import RenderOutput, Scene, render, render_ground_truth
from .localization import (DoaGrid, Frame, estimate_doa, gcc_phat, localize, srp_map_direct,
                           srp_map_phat)
from .datagen import DatasetSpec, ManifestRecord, Region, generate_dataset, mix_at_snr
from .wavio import wav_read, wav_write
from .profiling import ProfileReport, profile_pipeline
from .config import load_config, load_scene

__version__ = "0.1.0"
