"""Exception hierarchy shared by all leanstack modules."""


class LeanstackError(Exception):
    """Base class for all errors raised by this package."""


class KeySpecError(LeanstackError):
    """Malformed or inconsistent key expression."""


class RecordError(LeanstackError):
    """A record violates the text-record data model (empty field, bad width, ...)."""


class NumericFieldError(RecordError):
    """A field required to be a decimal number is not one."""


class OrderViolationError(LeanstackError):
    """A stream that must be sorted is not; points at the offending record."""

    def __init__(self, message, stream=None, record_no=None):
        super().__init__(message)
        self.stream = stream
        self.record_no = record_no


class ScratchError(LeanstackError):
    """Scratch storage for spill runs could not be used."""


class ProtocolError(LeanstackError):
    """Malformed or unexpected frame on a cluster connection."""


class ClusterError(LeanstackError):
    """A distributed operation failed; carries the offending node name."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class PipelineError(LeanstackError):
    """A remote pipeline spec is invalid or a stage failed."""


class DataGenError(LeanstackError):
    """Invalid generator spec or generation failure."""


class BenchError(LeanstackError):
    """Benchmark harness misuse (unknown workload, bad report, ...)."""
