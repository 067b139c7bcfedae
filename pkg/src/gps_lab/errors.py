"""Exception hierarchy shared by every gps_lab module."""


class GpsLabError(Exception):
    """Base class for all errors raised by gps_lab."""


class NumericalBreakdown(GpsLabError):
    """Floating point precision is exhausted (ill-conditioned products,
    solver failure, rank-deficient frames)."""


class SingularMatrix(GpsLabError):
    pass


class InsufficientGap(GpsLabError):
    """A singular-value or eigenvalue gap required by a flag map is too small."""


class NotTransverse(GpsLabError):
    pass


class IndexMismatch(GpsLabError):
    pass


class UnsupportedPresentation(GpsLabError):
    pass


class InsufficientData(GpsLabError):
    pass


class NotParabolic(GpsLabError):
    pass


class EmptySpectrum(GpsLabError):
    pass


class DegenerateSample(GpsLabError):
    pass


class NoValidFlags(GpsLabError):
    pass


class EmptyBinSet(GpsLabError):
    pass


class ConfigInvalid(GpsLabError):
    """Raised on malformed run configurations.  ``field`` and ``line``
    locate the offending entry when known."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
