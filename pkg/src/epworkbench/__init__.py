"""Workbench for EnergyPlus simulation data: parse, aggregate, store, explore."""

__version__ = "0.1.0"

from epworkbench.domain import (
    AggregationMethod,
    AggregationSpec,
    BuildingRecord,
    PrototypeKind,
    SampleTriple,
    SeriesDescriptor,
    SeriesKind,
    SimulationRecord,
    VariableTable,
    ZoneGeometry,
)

__all__ = [
    "AggregationMethod",
    "AggregationSpec",
    "BuildingRecord",
    "PrototypeKind",
    "SampleTriple",
    "SeriesDescriptor",
    "SeriesKind",
    "SimulationRecord",
    "VariableTable",
    "ZoneGeometry",
    "__version__",
]
