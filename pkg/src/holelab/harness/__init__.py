"""Configuration, study orchestration and reports."""

from .config import CRITERIA, STUDIES, STUDY_CRITERIA, ConfigError, ExperimentConfig, load_config, parse_config
from .runner import NUMERICAL_ERRORS, run
from .studies import RUNNERS, StudyResult
