#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
import configparser

# Create a ConfigParser object
config = configparser.ConfigParser()

# Add sections and options programmatically
config["SimulatorSettings"] = {
    "default_skills": "0.6 0.5 0.55 0.4 0.3",
    # Skills used for the feedback-sparse profile
    "sparse_skills": "0.05 0.04 0.03 0.02 0.01",
    "stream_length": "100000",
    "batch_size": "16",
    "probe_size": "1000",
    "probe_interval": "2000",
    "perturb_width": "3",
    "learning_gain": "0.01",
    "top2_degradation": "0.5",
    "passage_length_range": "30 120",
    "max_answer_length": "10",
    "preference_samples": "100000",
    "preference_seed_offset": "7919",
    "log_level": "INFO",
}
