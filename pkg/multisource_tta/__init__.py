#  Copyright (c) 2024. multisource-tta developers. See the LICENSE

__version__ = "0.1.0"

# Third party imports
from loguru import logger

# Application imports
from multisource_tta.config import config

_settings = config["SimulatorSettings"]

DEFAULT_SKILLS = tuple(float(s) for s in _settings["default_skills"].split())
SPARSE_SKILLS = tuple(float(s) for s in _settings["sparse_skills"].split())
STREAM_LENGTH = _settings.getint("stream_length")
BATCH_SIZE = _settings.getint("batch_size")
PROBE_SIZE = _settings.getint("probe_size")
PROBE_INTERVAL = _settings.getint("probe_interval")
PERTURB_WIDTH = _settings.getint("perturb_width")
LEARNING_GAIN = _settings.getfloat("learning_gain")
TOP2_DEGRADATION = _settings.getfloat("top2_degradation")
PASSAGE_LENGTH_RANGE = tuple(int(n) for n in _settings["passage_length_range"].split())
MAX_ANSWER_LENGTH = _settings.getint("max_answer_length")
PREFERENCE_SAMPLES = _settings.getint("preference_samples")
PREFERENCE_SEED_OFFSET = _settings.getint("preference_seed_offset")
LOG_LEVEL = _settings["log_level"]

logger.disable(__name__)
