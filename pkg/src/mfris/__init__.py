"""Simulator and optimizer for multi-functional-panel ISAC echo-SINR maximization."""

from .ao import AlternatingOptimizer, SolutionRecord, complexity_report
from .baselines import ExhaustiveBaseline, RandomBaseline, SdrBaseline
from .channel import ChannelSet, build_channels
from .config import ConfigError, ScenarioConfig, db_to_linear, dbm_to_watts, load_config
from .geometry import Geometry, sample_geometry
from .metrics import MetricsReport, SensingFilters, TransmitDesign, evaluate
from .ris import RisConfiguration, random_feasible

__all__ = [
    "AlternatingOptimizer", "SolutionRecord", "complexity_report",
    "ExhaustiveBaseline", "RandomBaseline", "SdrBaseline",
    "ChannelSet", "build_channels",
    "ConfigError", "ScenarioConfig", "db_to_linear", "dbm_to_watts", "load_config",
    "Geometry", "sample_geometry",
    "MetricsReport", "SensingFilters", "TransmitDesign", "evaluate",
    "RisConfiguration", "random_feasible",
]

__version__ = "0.1.0"
