"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 1,
data problems with 2, anything else with 3.
"""


class RecruitSynthError(Exception):
    """Base class for all package errors."""


class ConfigError(RecruitSynthError, ValueError):
    """A graph document, experiment config or parameter file is invalid."""


class GraphError(ConfigError):
    """A causal graph violates its structural invariants."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(RecruitSynthError, ValueError):
    """A dataset, record or corpus file does not match its schema."""


class DomainError(DataError):
    """A value lies outside the declared domain of its variable."""
