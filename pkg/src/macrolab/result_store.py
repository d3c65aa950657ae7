"""Module with the `ResultStore` class.

The `ResultStore` persists backtest grid results in a database through
SQLModel, so the results of many experiments can be kept and compared.
"""

import logging
import math
from typing import Any

from sqlalchemy.exc import OperationalError
from sqlalchemy.future import Engine
from sqlmodel import Session, SQLModel, create_engine, select

from macrolab_model import GridRecord

from .backtest import GridResults
from .exceptions import DatabaseConnectionError, DatabaseNotConfiguredError


class ResultStore:
    """Database storage for backtest grid results.

    Attributes:
        database_engine: the SQLmodel Engine.
        _database_str: the database connection string.
        _database_args: the arguments for the SQLalchemy connection.
    """

    def __init__(self) -> None:
        """Set default values.

        The values can later be set with the `configure` method.
        """
        self._logger = logging.getLogger(f'ResultStore-{id(self)}')
        self._logger.info('ResultStore object created')
        self.database_engine: Engine | None = None
        self._database_str: str | None = None
        self._database_args: dict[str, Any] | None = None

    def configure(
        self,
        db_connection_str: str,
        database_args: dict[str, Any] | None = None,
    ) -> None:
        """Set the database configuration.

        Args:
            db_connection_str: the database connection string for the
                SQLmodel model.
            database_args: a dict with extra configuration for SQLmodel.
        """
        self._database_str = db_connection_str
        self._database_args = database_args
        self._logger.info('ResultStore object configured')

    def create_engine(self, force: bool = False) -> None:
        """Create the database connection.

        Args:
            force: if set to True, the database connection will be created even
                if the database connection is already created.

        Raises:
            DatabaseNotConfiguredError: database not configured.
            DatabaseConnectionError: error while connecting to the
                database.
        """
        if self.database_engine is not None and not force:
            self._logger.debug(
                'Database engine not created because it already exists and '
                + 'force is not set to True'
            )
            return

        if self._database_str is None:
            raise DatabaseNotConfiguredError('Database is not configured yet')

        database_args: dict[str, Any] = {'url': self._database_str}
        if self._database_args:
            database_args.update(self._database_args)

        try:
            self.database_engine = create_engine(**database_args)
            self._logger.info('Database engine created')
        except OperationalError as sa_error:  # pragma: no cover
            raise DatabaseConnectionError(
                "Couldn't connect to database"
            ) from sa_error

    def _engine(self) -> Engine:
        """Return the engine, creating it when needed.

        Raises:
            DatabaseNotConfiguredError: database not configured.

        Returns:
            The SQLAlchemy Engine.
        """
        self.create_engine()
        if not self.database_engine:  # pragma: no cover
            raise DatabaseNotConfiguredError('Database is not configured yet')
        return self.database_engine

    def create_tables(self, drop_tables: bool = False) -> None:
        """Create the result tables.

        Args:
            drop_tables: determines if tables should be dropped prior to
                creating them.
        """
        engine = self._engine()
        self._logger.info('Creating tables')
        if drop_tables:
            self._logger.warning('Dropping tables first!')
            SQLModel.metadata.drop_all(engine)
        SQLModel.metadata.create_all(engine)
        self._logger.info('Database tables created')

    def save_grid(self, results: GridResults, run_label: str) -> int:
        """Store the rows of a grid.

        Args:
            results: the grid results.
            run_label: the label grouping the rows.

        Raises:
            DatabaseConnectionError: when the rows cannot be written.

        Returns:
            The number of stored rows.
        """
        records = []
        for row in results.rows.itertuples(index=False):
            sharpe = row.sharpe
            records.append(GridRecord(
                run_label=run_label,
                window_start=int(row.window_start),
                window_end=int(row.window_end),
                p=float(row.p),
                f=None if _missing(row.f) else int(row.f),
                final_wealth=float(row.final_wealth),
                rel_log_return=float(row.rel_log_return),
                max_drawdown=float(row.max_drawdown),
                sharpe=None if _missing(sharpe) else float(sharpe),
                total_costs=float(row.total_costs),
                diversity_drawdown=float(row.diversity_drawdown),
            ))
        try:
            with Session(self._engine()) as session:
                session.add_all(records)
                session.commit()
        except OperationalError as sa_error:
            raise DatabaseConnectionError(
                f'Could not store the results of "{run_label}"'
            ) from sa_error
        self._logger.info(
            'Stored %d grid rows for "%s"', len(records), run_label
        )
        return len(records)

    def load_records(self, run_label: str | None = None) -> list[GridRecord]:
        """Load stored grid rows.

        Args:
            run_label: only load the rows with this label; all rows when
                None.

        Returns:
            The records, ordered by window, p and id.
        """
        with Session(self._engine()) as session:
            query = select(GridRecord)
            if run_label is not None:
                query = query.where(GridRecord.run_label == run_label)
            query = query.order_by(
                GridRecord.window_start, GridRecord.p, GridRecord.id
            )
            records = list(session.exec(query).all())
        self._logger.debug('Loaded %d grid rows', len(records))
        return records


def _missing(value: object) -> bool:
    """Tell if a statistic is undefined (None or NaN).

    Args:
        value: the statistic.

    Returns:
        True for None and NaN.
    """
    return value is None or (isinstance(value, float) and math.isnan(value))
