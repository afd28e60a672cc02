"""Exception types shared across the pipeline."""


class PhysioBiasError(Exception):
    """Base class for every error raised by this package."""


class ParseError(PhysioBiasError):
    """Malformed E4 CSV content (bad header or non-numeric row)."""


class EmptySignal(ParseError):
    """E4 file with a valid header but zero data rows."""


class LabelError(PhysioBiasError):
    """Unknown IAT category, or a participant without a label."""


class MissingChannel(PhysioBiasError):
    """Session directory lacks a required channel file."""


class InsufficientData(PhysioBiasError):
    """Too little signal to window, decompose, or evaluate."""


class ParamError(PhysioBiasError):
    """Invalid parameter combination."""


class DegenerateLabels(PhysioBiasError):
    """Training data contains a single class only."""


class ShapeError(PhysioBiasError):
    """Feature vector width does not match the model."""


class NoSessions(PhysioBiasError):
    """Data directory contains no session directories."""
