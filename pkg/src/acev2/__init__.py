"""Cost analysis for quantized neural-network graphs.

Computes exact bit-adder effort, estimated 45nm arithmetic energy, and
arithmetic intensity for a model IR, with gate-level constructions that
independently verify the closed-form costs and numeric implementations
of the quantization schemes the costs assume.
"""

from .analysis import CostReport, analyze, compare
from .census import OpTally, census_graph
from .cost import (
    AceCost,
    EnergyCost,
    ace_add,
    ace_mac,
    ace_multiply,
    ace_shift,
    energy_of_op,
    pearson_correlation,
)
from .formats import NumericFormat
from .ir import Graph, parse_graph, serialize_graph, validate
from .oracle import (
    barrel_mux_count,
    dadda_adder_count,
    fp_adder_breakdown,
    verify_multiply_formula,
)

__version__ = "0.1.0"

__all__ = [
    "AceCost",
    "CostReport",
    "EnergyCost",
    "Graph",
    "NumericFormat",
    "OpTally",
    "ace_add",
    "ace_mac",
    "ace_multiply",
    "ace_shift",
    "analyze",
    "barrel_mux_count",
    "census_graph",
    "compare",
    "dadda_adder_count",
    "energy_of_op",
    "fp_adder_breakdown",
    "parse_graph",
    "pearson_correlation",
    "serialize_graph",
    "validate",
    "verify_multiply_formula",
]
