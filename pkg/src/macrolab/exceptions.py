"""Module with `macrolab` exceptions.

Contains the exceptions for `macrolab`. Every exception raised on purpose by
the library is a subclass of `MacroLabError`, so callers (like the command
line interface) can catch them in one place.
"""


class MacroLabError(Exception):
    """Base exception for MacroLab-exceptions."""


class PanelError(MacroLabError):
    """Base exception for problems with a market panel."""


class PanelParseError(PanelError):
    """Raised when a row of a panel-CSV file cannot be parsed.

    Attributes:
        line: the (1-based) line number in the file, header included.
    """

    def __init__(self, message: str, line: int | None = None) -> None:
        """Set the message and the line number.

        Args:
            message: the error message.
            line: the line number of the offending row.
        """
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
        self.line = line


class PanelValidationError(PanelError):
    """Raised when a parsed panel violates the panel invariants.

    Attributes:
        problems: list with `(stock id, date)` pairs that caused the error.
    """

    def __init__(
        self, message: str, problems: list[tuple[str, str]] | None = None
    ) -> None:
        """Set the message and the offending `(id, date)` pairs.

        Args:
            message: the error message.
            problems: the offending `(id, date)` pairs.
        """
        self.problems = problems or []
        if self.problems:
            listed = ', '.join(f'({i}, {d})' for i, d in self.problems[:10])
            more = len(self.problems) - 10
            if more > 0:
                listed += f' and {more} more'
            message = f'{message}: {listed}'
        super().__init__(message)


class DateOutOfRangeError(PanelError):
    """A date ordinal outside of the trading calendar was used."""


class EmptyUniverseError(PanelError):
    """An operation needs at least one stock but got none."""


class ParameterError(MacroLabError):
    """Invalid parameters for a computation."""


class ComputationError(MacroLabError):
    """Base exception for numerical problems."""


class TotalLossError(ComputationError):
    """A constituent with positive weight has a log-return of -infinity."""


class RankDeficiencyError(ComputationError):
    """The design matrix of a regression is not of full column rank.

    Attributes:
        columns: the names of the linearly dependent columns.
    """

    def __init__(self, message: str, columns: list[str]) -> None:
        """Set the message and the dependent columns.

        Args:
            message: the error message.
            columns: the names of the dependent columns.
        """
        super().__init__(f'{message}: {", ".join(columns)}')
        self.columns = columns


class BracketError(ComputationError):
    """The transaction cost fixed point is not inside its bracket."""


class UndefinedStatisticError(ComputationError):
    """A statistic is undefined for the given input."""


class BacktestError(MacroLabError):
    """Base exception for backtest problems."""


class EmptySupportError(BacktestError):
    """A rebalance was requested on an empty universe."""


class MissingBenchmarkError(BacktestError):
    """The (1, f) benchmark run is missing from the grid results."""


class MissingWindowError(BacktestError):
    """A window is missing from the grid results."""


class ResultStoreError(MacroLabError):
    """Base exception for the result store."""


class DatabaseNotConfiguredError(ResultStoreError):
    """Raised when the result database is not configured."""


class DatabaseConnectionError(ResultStoreError):
    """Error that happens when the database string is not correct."""
