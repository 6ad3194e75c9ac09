"""Closed-form bit-adder costs and the 45nm per-operation energy table.

The unit of cost is the *bit-adder*: a digital circuit that adds three
bits into a carry/sum pair. Costs are kept as exact rationals so that
fractional table values (12.8, 4.8, 1.6, 0.4) reproduce bit-exactly in
reports and regression diffs.

Cost model per operation class, for an i-bit and a j-bit operand:

  multiply (elementwise)   i*j - max(i, j)     multiplier tree plus the
                                               completion adder
  add, fixed-point         max(i, j)
  add, floating-point      6 * max(i, j)       exponent align, significand
                                               add, normalize (see oracle)
  shift                    i * ceil(log2(j)) / 5 over a j-position barrel
                                               (one full adder is worth
                                               five 2:1 multiplexers)
  multiply-accumulate      i * j               accumulation absorbed into
                                               the carry-save array

Measured 45nm energies exist for a subset of (class, width) pairs; the
rest extrapolate linearly in output width for adds and shifts and
linearly in the bit product (quadratic in width) for multiplies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import (
    DegenerateInputError,
    MixedKindError,
    UnsupportedExtrapolationError,
    UnsupportedOperandError,
)
from .formats import NumericFormat

MULTIPLY = "multiply"
ADD = "add"
SHIFT = "shift"
MAC = "mac"

OP_CLASSES = (MULTIPLY, ADD, SHIFT, MAC)

# Floating-point adds cost this multiple of a fixed-point add of the
# same width; derived and bounded gate-by-gate in the oracle module.
FLOAT_ADD_FACTOR = 6

# One full adder is as expensive as five 2:1 multiplexers.
MUX_PER_ADDER = 5


@dataclass(frozen=True)
class AceCost:
    """An exact bit-adder count. May be fractional for shifts."""

    bitadders: Fraction

    def __post_init__(self):
        if self.bitadders < 0:
            raise UnsupportedOperandError("negative bit-adder count")

    def __float__(self) -> float:
        return float(self.bitadders)


@dataclass(frozen=True)
class EnergyCost:
    """Per-operation energy in picojoules at the 45nm node.

    ``extrapolated`` is True when the value came from a scaling law
    rather than a measured table cell.
    """

    picojoules: float
    extrapolated: bool = False

    def __post_init__(self):
        if self.picojoules < 0:
            raise UnsupportedOperandError("negative energy")


def shift_stages(shift_range: int) -> int:
    """Number of 2:1 mux stages in a barrel shifter covering ``shift_range``
    positions. Exact log2 for powers of two; whole stages otherwise."""
    if shift_range < 2:
        raise UnsupportedOperandError("shift range must be at least 2")
    return (shift_range - 1).bit_length()


def ace_multiply(a: NumericFormat, b: NumericFormat) -> AceCost:
    """Bit-adders in a standalone elementwise multiply: i*j - max(i, j)."""
    i, j = a.total_bits, b.total_bits
    return AceCost(Fraction(i * j - max(i, j)))


def ace_add(a: NumericFormat, b: NumericFormat) -> AceCost:
    """Bit-adders in an elementwise add.

    Fixed-point (and binary) operands cost max(i, j); floating-point
    operands cost 6x that. Mixing the two families is rejected because
    the hardware would first have to convert one side.
    """
    if a.is_float != b.is_float:
        raise MixedKindError(
            f"cannot add {a} and {b}: mixed fixed/float operands")
    width = max(a.total_bits, b.total_bits)
    if a.is_float:
        return AceCost(Fraction(FLOAT_ADD_FACTOR * width))
    return AceCost(Fraction(width))


def ace_shift(value: NumericFormat, shift_range: int) -> AceCost:
    """Bit-adder equivalents of a barrel shift of ``value`` over
    ``shift_range`` positions: i * stages / 5."""
    if not value.is_fixed:
        raise UnsupportedOperandError(
            f"shift cost is defined for fixed-point values, got {value}")
    stages = shift_stages(shift_range)
    return AceCost(Fraction(value.total_bits * stages, MUX_PER_ADDER))


def ace_mac(weight: NumericFormat, act: NumericFormat) -> AceCost:
    """Bit-adders per multiply-accumulate: i*j, accumulation absorbed."""
    return AceCost(Fraction(weight.total_bits * act.total_bits))


# Measured energy cells, picojoules. Keys: (op class, "float"/"fixed",
# operand width) for multiply/add; (width, range) for shift.
_ENERGY_MULTIPLY = {
    ("float", 32): 3.7,
    ("float", 16): 1.1,
    ("fixed", 32): 3.1,
    ("fixed", 8): 0.2,
}
_ENERGY_ADD = {
    ("float", 32): 0.9,
    ("float", 16): 0.4,
    ("fixed", 32): 0.1,
    ("fixed", 8): 0.03,
}
_ENERGY_SHIFT = {
    (32, 32): 0.13,
    (16, 16): 0.057,
    (8, 8): 0.024,
}

# Extrapolation anchors: smallest measured integer entry of each class.
_MULTIPLY_ANCHOR = 0.2 / (8 * 8)      # pJ per unit of bit product
_ADD_ANCHOR = 0.1 / 32                # pJ per output bit
_SHIFT_ANCHOR = 0.024 / (8 * 3)       # pJ per (bit x stage)

# The tabulated ACE values alongside measured energies; the correlation
# between the two columns is the calibration check for the cost model.
TABLE_ACE_ENERGY_PAIRS = (
    (Fraction(992), 3.7),    # fp32 multiply
    (Fraction(240), 1.1),    # fp16 multiply
    (Fraction(992), 3.1),    # int32 multiply
    (Fraction(56), 0.2),     # int8 multiply
    (Fraction(192), 0.9),    # fp32 add
    (Fraction(96), 0.4),     # fp16 add
    (Fraction(32), 0.1),     # int32 add
    (Fraction(8), 0.03),     # int8 add
    (Fraction(32), 0.13),    # int32 shift
    (Fraction(64, 5), 0.057),  # int16 shift (12.8)
    (Fraction(24, 5), 0.024),  # int8 shift (4.8)
)


def _float_width(a: NumericFormat, b: Optional[NumericFormat]) -> int:
    widths = [f.total_bits for f in (a, b) if f is not None and f.is_float]
    return max(widths)


def energy_of_op(
    op_class: str,
    a: NumericFormat,
    b: Optional[NumericFormat] = None,
    shift_range: Optional[int] = None,
) -> EnergyCost:
    """Energy of one operation: measured where tabulated, extrapolated
    otherwise.

    Extrapolation laws: adds scale linearly in output width, multiplies
    (and MACs, priced as multiplies) linearly in the bit product, shifts
    linearly in bits x stages. An operation touching a float operand is
    priced at that float's width and must be FP16 or FP32; other float
    widths have no measured anchor and raise.
    """
    if op_class not in OP_CLASSES:
        raise UnsupportedOperandError(f"unknown op class {op_class!r}")

    if op_class == SHIFT:
        if not a.is_fixed:
            raise UnsupportedOperandError("shift energy needs a fixed operand")
        if shift_range is None:
            raise UnsupportedOperandError("shift energy needs a shift range")
        key = (a.total_bits, shift_range)
        if key in _ENERGY_SHIFT:
            return EnergyCost(_ENERGY_SHIFT[key])
        work = a.total_bits * shift_stages(shift_range)
        return EnergyCost(_SHIFT_ANCHOR * work, extrapolated=True)

    if b is None:
        raise UnsupportedOperandError(f"{op_class} energy needs two operands")

    table = _ENERGY_ADD if op_class == ADD else _ENERGY_MULTIPLY
    if a.is_float or b.is_float:
        width = _float_width(a, b)
        if ("float", width) not in table:
            raise UnsupportedExtrapolationError(
                f"no measured {op_class} energy for {width}-bit floats")
        return EnergyCost(table[("float", width)])

    if op_class == ADD:
        width = max(a.total_bits, b.total_bits)
        if ("fixed", width) in table:
            return EnergyCost(table[("fixed", width)])
        return EnergyCost(_ADD_ANCHOR * width, extrapolated=True)

    # multiply and mac
    i, j = a.total_bits, b.total_bits
    if i == j and ("fixed", i) in table:
        return EnergyCost(table[("fixed", i)])
    return EnergyCost(_MULTIPLY_ANCHOR * i * j, extrapolated=True)


def pearson_correlation(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson r between two equal-length sequences."""
    if len(xs) != len(ys):
        raise DegenerateInputError(
            f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise DegenerateInputError("need at least two points")
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise DegenerateInputError("zero variance input")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


def table_energy_correlation() -> float:
    """Correlation between the tabulated bit-adder counts and the
    independently measured energies."""
    xs = [float(ace) for ace, _ in TABLE_ACE_ENERGY_PAIRS]
    ys = [pj for _, pj in TABLE_ACE_ENERGY_PAIRS]
    return pearson_correlation(xs, ys)
