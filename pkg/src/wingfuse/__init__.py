"""Insect identification from an optoacoustic wingbeat sensor and a triggered camera."""

__version__ = "0.1.0"

from .dsp import TimeSeries, PowerSpectrum, Spectrogram, welch_psd, stft_spectrogram, extract_harmonics, analyze
from .acquisition import DetectionEvent, TransitScenario, simulate_transit, run_trigger, select_frames
from .taxonomy import TaxonLabel, TaxonomyTree, default_tree, rollup_taxonomy
from .svm import LinearSvmModel, SvmConfig, train_linear_svm
from .fusion import FusionModel, FusionConfig, predict_any, train_fusion
from .metrics import EvalReport, evaluate
from .kernels import BACKEND

__all__ = [
    "TimeSeries", "PowerSpectrum", "Spectrogram", "welch_psd", "stft_spectrogram", "extract_harmonics", "analyze",
    "DetectionEvent", "TransitScenario", "simulate_transit", "run_trigger", "select_frames",
    "TaxonLabel", "TaxonomyTree", "default_tree", "rollup_taxonomy",
    "LinearSvmModel", "SvmConfig", "train_linear_svm",
    "FusionModel", "FusionConfig", "predict_any", "train_fusion",
    "EvalReport", "evaluate", "BACKEND",
]
