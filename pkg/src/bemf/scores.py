"""Discrete rating scales.

A ScoreSet is the ordered list of values a rating may take, e.g. the five
star levels 1..5 or the half-star scale 0.5..4.0. Every value is kept as an
exact decimal so that half-star scales survive text round trips losslessly.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation
from typing import Iterable, Sequence


def _to_decimal(value) -> Decimal:
    """Convert a score value to an exact Decimal.

    Floats go through repr() so that 0.5 means the decimal 0.5, not its
    binary expansion.
    """
    if isinstance(value, Decimal):
        dec = value
    elif isinstance(value, float):
        dec = Decimal(repr(value))
    elif isinstance(value, int):
        dec = Decimal(value)
    else:
        try:
            dec = Decimal(str(value).strip())
        except InvalidOperation:
            raise ValueError(f"not a decimal score value: {value!r}") from None
    if not dec.is_finite():
        raise ValueError(f"score values must be finite, got {value!r}")
    return dec


def _canonical(dec: Decimal) -> str:
    """Canonical text form: no exponent, no trailing zeros, '0.5' not '.5'."""
    text = format(dec.normalize(), "f")
    return text


class ScoreSet:
    """The ordered set of values a rating can take.

    Scores are addressed by index (0-based, ascending by value) everywhere
    inside the package; the decimal values only matter at the text boundary
    and when metrics need the numeric rating.
    """

    def __init__(self, values: Iterable):
        decs = [_to_decimal(v) for v in values]
        if len(decs) < 2:
            raise ValueError("a score set needs at least two values")
        for a, b in zip(decs, decs[1:]):
            if not a < b:
                raise ValueError("score values must be strictly increasing")
        self._decimals = tuple(decs)
        self._values = tuple(float(d) for d in decs)
        self._index = {_canonical(d): i for i, d in enumerate(decs)}

    @classmethod
    def from_spec(cls, spec) -> "ScoreSet":
        """Build from a config value.

        Accepts an explicit list of values or a compact "min,max,step"
        string such as "0.5,4.0,0.5".
        """
        if isinstance(spec, (list, tuple)):
            return cls(spec)
        if isinstance(spec, str):
            parts = [p.strip() for p in spec.split(",")]
            if len(parts) != 3:
                raise ValueError(
                    f"score set string must be 'min,max,step', got {spec!r}")
            lo, hi, step = (_to_decimal(p) for p in parts)
            if step <= 0:
                raise ValueError("score set step must be positive")
            values = []
            v = lo
            while v <= hi:
                values.append(v)
                v += step
            return cls(values)
        raise ValueError(f"cannot build a score set from {spec!r}")

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self):
        return iter(self._values)

    def __eq__(self, other) -> bool:
        return isinstance(other, ScoreSet) and self._decimals == other._decimals

    def __repr__(self) -> str:
        return f"ScoreSet([{', '.join(self.labels)}])"

    @property
    def values(self) -> tuple:
        """Score values as floats, ascending."""
        return self._values

    @property
    def labels(self) -> tuple:
        """Canonical text form of each value (lossless for half steps)."""
        return tuple(_canonical(d) for d in self._decimals)

    @property
    def min_value(self) -> float:
        return self._values[0]

    @property
    def max_value(self) -> float:
        return self._values[-1]

    def value(self, index: int) -> float:
        return self._values[index]

    def label(self, index: int) -> str:
        return _canonical(self._decimals[index])

    def index_of(self, value) -> int:
        """Index of an exact score value; raises KeyError if absent."""
        key = _canonical(_to_decimal(value))
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"rating {key} not in score set "
                           f"[{', '.join(self.labels)}]") from None

    def contains(self, value) -> bool:
        try:
            self.index_of(value)
        except (KeyError, ValueError):
            return False
        return True

    def to_spec(self) -> list:
        """JSON-friendly representation (list of canonical labels)."""
        return list(self.labels)
