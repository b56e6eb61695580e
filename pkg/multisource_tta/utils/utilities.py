""" Cross module utility functions."""
#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
import errno
import hashlib
import os
import sys
from collections import defaultdict
from pathlib import Path
from typing import Dict, Hashable

import yaml

SEED_MODULUS = 2**32
LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")


def resource_path(relative_path):
    """Get absolute path to resource, works for dev and for PyInstaller"""
    base_path = getattr(sys, "_MEIPASS", os.path.abspath("."))
    return os.path.join(base_path, relative_path)


def number_table_rows(table: dict, first_index: int = 0) -> Dict:
    """Utility function to add row numbers to the first column of a table stored as a dict.

    Args:
        table: The input table dict
        first_index: The first row index value. Default = 0

    Returns:
        a table (dict) with numbered rows in the first column

    """
    size = len(list(table.values())[0]) if table else 0
    tbl = defaultdict(list)
    for i in range(first_index, size + first_index):
        tbl["#"].append(i)
    tbl.update(table)  # Join the columns
    return tbl


def logging_level(loglevel: str) -> str:
    """Utility function to return a valid loguru level name.

    Args:
        loglevel: One of ``TRACE``, ``DEBUG``, ``INFO``, ``SUCCESS``, ``WARNING``, ``ERROR`` or ``CRITICAL``.
            Case insensitive. Unknown names fall back to ``INFO``.
    """
    level = loglevel.upper()
    if level not in LOG_LEVELS:
        level = "INFO"
    return level


def load_yaml_config(config: str) -> dict:
    """Safely read a yaml config file and return the content as a dict.

    Args:
        config: Path to yaml file
    Raises:
        Raise ``errno.ENOENT`` if yaml file does not exist
    """
    resource_file = resource_path(config)
    if Path(resource_file).exists():
        with open(resource_file) as f:
            app_config = yaml.safe_load(f)
        return app_config if app_config is not None else {}
    else:
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), resource_file)


def stable_hash(value: Hashable) -> int:
    """A process independent hash of ``value``.

    Python's builtin ``hash`` is salted per process for strings, so seeds derived from it would not replay.
    """
    digest = hashlib.sha256(repr(value).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % SEED_MODULUS


def derive_seed(base_seed: int, key: Hashable) -> int:
    """Child seed for a sweep point, independent of the other points in the sweep.

    Args:
        base_seed: The seed of the base experiment
        key: The sweep key the child seed is derived from
    """
    return (base_seed + stable_hash(key)) % SEED_MODULUS
