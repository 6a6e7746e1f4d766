"""leanstack: a lean distributed text-record processing toolkit with a
micro-benchmark harness."""

__version__ = "0.1.0"
