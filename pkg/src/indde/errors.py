"""Exception types shared across the package.

Each error carries a short machine-readable ``code``; the CLI prints it in
its single-line stderr messages and the HTTP service returns it in error
payloads.
"""


class InddeError(Exception):
    """Base class for every error raised by this package."""

    code = "error"


# -- windowing / feature layer ------------------------------------------------

class EmptyTrace(InddeError):
    """Trace is shorter than a single window."""

    code = "empty-trace"


class FrequencyMismatch(InddeError):
    """Trace and window sampling frequencies differ."""

    code = "frequency-mismatch"


class DegenerateWindow(InddeError):
    """Window has zero variance, so skewness and kurtosis are undefined."""

    code = "degenerate-window"


class ZeroSignal(InddeError):
    """Window has zero mean square, so the crest factor is undefined."""

    code = "zero-signal"


# -- Gaussian model layer -----------------------------------------------------

class InsufficientSamples(InddeError):
    """Too few rows for a full-rank covariance to be possible."""

    code = "insufficient-samples"


class SingularCovariance(InddeError):
    """Covariance factorization failed even after ridge regularization."""

    code = "singular-covariance"


class NonFiniteInput(InddeError):
    code = "non-finite-input"


class EmptyValidation(InddeError):
    code = "empty-validation"


class UncalibratedModel(InddeError):
    """Model has no threshold yet; calibrate before classifying."""

    code = "uncalibrated-model"


# -- pipeline layer -----------------------------------------------------------

class TooFewWindows(InddeError):
    code = "too-few-windows"


class NonFiniteSample(InddeError):
    code = "non-finite-sample"


class VersionMismatch(InddeError):
    """Model file declares a format version this code does not read."""

    code = "version-mismatch"


class CorruptModel(InddeError):
    """Model file is truncated, malformed, or fails its checksum."""

    code = "corrupt-model"


# -- evaluation layer ---------------------------------------------------------

class LengthMismatch(InddeError):
    code = "length-mismatch"


class EmptyMatrix(InddeError):
    code = "empty-matrix"


# -- simulator layer ----------------------------------------------------------

class InvalidParams(InddeError):
    code = "invalid-params"


class ScenarioError(InddeError):
    code = "scenario-error"


# -- trace file layer ---------------------------------------------------------

class ParseError(InddeError):
    """A trace file row could not be parsed; carries the 1-based line."""

    code = "parse-error"

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NonFiniteValue(InddeError):
    """A trace file row parsed to NaN or infinity."""

    code = "non-finite-value"

    def __init__(self, line: int):
        self.line = line
        super().__init__(f"line {line}: non-finite acceleration value")


class MissingFrequency(InddeError):
    """No sampling frequency in the file header and none given on the command line."""

    code = "missing-frequency"
