# Config module
from .experiment_config import ExperimentConfig, load_config, validate_config
from .presets import PRESETS, get_preset, list_presets
