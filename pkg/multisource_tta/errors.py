#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
"""Exceptions raised by the multisource_tta module."""


class TtaSimulatorError(Exception):
    """Exception raised by this module when there is an error."""

    pass


class ContractViolationError(TtaSimulatorError, ValueError):
    """A precondition of a bandit, feedback or environment operation was violated."""

    pass


class ConfigError(TtaSimulatorError):
    """The experiment configuration is invalid."""

    pass


class OutputError(TtaSimulatorError):
    """Writing run outputs failed.

    Args:
        path: The file or folder that could not be written
        reason: The underlying error message
    """

    def __init__(self, path, reason: str):
        self.path = path
        super().__init__(f"Failed writing {path}: {reason}")
