"""Module with fixtures to create a test result database."""
# pylint: disable=redefined-outer-name

from macrolab.result_store import ResultStore
from pydantic_settings import BaseSettings
from pytest import fixture


class ConfigurationForTests(BaseSettings):
    """Settings for testing."""

    db_string: str = 'sqlite:///:memory:'
    database_args: dict[str, str | bool | int] = {'echo': False}
    create_tables: bool = True


@fixture
def result_store() -> ResultStore:
    """Create a test database.

    Returns:
        The configured `ResultStore` with empty tables.
    """
    configuration = ConfigurationForTests()

    store = ResultStore()
    store.configure(
        db_connection_str=configuration.db_string,
        database_args=configuration.database_args,
    )
    store.create_engine()

    if configuration.create_tables:
        store.create_tables(drop_tables=True)

    return store
