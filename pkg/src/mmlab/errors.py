"""Exception types raised by mmlab.

Every error derives from :class:`MMLabError`, so callers (and the CLI) can
catch the whole family at once.
"""


class MMLabError(Exception):
    """Base class for all library errors."""


class AsymmetricMatrix(MMLabError):
    def __init__(self, i, j, amount):
        self.i, self.j, self.amount = i, j, amount
        super().__init__(f"dist[{i}][{j}] != dist[{j}][{i}] (difference {amount:.3g})")


class NonzeroDiagonal(MMLabError):
    def __init__(self, i, value):
        self.i, self.value = i, value
        super().__init__(f"dist[{i}][{i}] = {value!r}, expected 0")


class DegenerateDistance(MMLabError):
    """Two distinct points at distance <= 0 (or a negative entry)."""

    def __init__(self, i, j, value):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"dist[{i}][{j}] = {value!r} must be > 0 for distinct points")


class TriangleViolation(MMLabError):
    """d(i, j) > d(i, k) + d(k, j) by ``amount``; i, j, k are point labels."""

    def __init__(self, i, j, k, amount, indices=None):
        self.i, self.j, self.k, self.amount = i, j, k, amount
        self.indices = indices
        super().__init__(f"triangle inequality fails: d({i},{j}) exceeds d({i},{k}) + d({k},{j}) by {amount:.6g}")


class MassNotOne(MMLabError):
    def __init__(self, deficit):
        self.deficit = deficit
        super().__init__(f"weights do not sum to 1 (1 - sum = {deficit:.6g})")


class ZeroWeightPoint(MMLabError):
    def __init__(self, i, value=0.0):
        self.i, self.value = i, value
        super().__init__(f"weight[{i}] = {value!r} is not positive")


class NonFiniteValue(MMLabError):
    def __init__(self, where):
        self.where = where
        super().__init__(f"non-finite value in {where}")


class DimensionMismatch(MMLabError):
    pass


class NonpositiveScale(MMLabError):
    pass


class NonpositiveCap(MMLabError):
    pass


class ProductTooLarge(MMLabError):
    def __init__(self, size, limit):
        self.size, self.limit = size, limit
        super().__init__(f"product has {size} points, limit is {limit}")


class BaseHasZero(MMLabError):
    pass


class InstanceTooLarge(MMLabError):
    def __init__(self, what, size, limit):
        self.what, self.size, self.limit = what, size, limit
        super().__init__(f"{what}: size {size} exceeds the exact limit {limit}")


class PerimeterViolation(MMLabError):
    def __init__(self, triple, perimeter, limit):
        self.triple, self.perimeter, self.limit = triple, perimeter, limit
        super().__init__(f"triangle {triple} has perimeter {perimeter:.6g} > {limit:.6g}")


class BudgetExhausted(MMLabError):
    pass


class MissingAmbientCoordinates(MMLabError):
    pass


class OutOfRange(MMLabError):
    pass


class UnknownExperiment(MMLabError):
    def __init__(self, name, known=()):
        self.name = name
        msg = f"unknown experiment {name!r}"
        if known:
            msg += " (known: " + ", ".join(sorted(known)) + ")"
        super().__init__(msg)


class ParseError(MMLabError):
    def __init__(self, message, line=None, field=None):
        self.line, self.field = line, field
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field}")
        super().__init__(message + (f" ({', '.join(loc)})" if loc else ""))


class DisconnectedWarning(UserWarning):
    """Emitted when the energy graph has a (numerically) zero spectral gap."""


class IoError(MMLabError):
    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"{path}: {reason}")
