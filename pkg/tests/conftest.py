"""Test configuration for PyTest.

Imports all fixtures that are used in the unittesting.
"""

# ruff: noqa
from fixtures_db_creation import result_store
from fixtures_panels import (
    fixed_universe_panel,
    flow_panel,
    lockstep_panel,
    small_atlas_panel,
    stylized_panel,
)
