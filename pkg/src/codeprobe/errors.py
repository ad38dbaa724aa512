"""Exception types shared across the toolkit."""


class CodeProbeError(Exception):
    """Base class for all toolkit errors."""


class ParseError(CodeProbeError):
    """Source is malformed beyond error-node recovery."""


class ImportDocumentError(CodeProbeError):
    """An external parse-tree or graph document is ill-formed."""


class UnsupportedConstruct(CodeProbeError):
    """AST node kind outside the structured subset handled by the builders."""


class AlignmentError(CodeProbeError):
    """A byte range maps to no model tokens."""


class StoreError(CodeProbeError):
    """Representation store is missing, truncated, or fails validation."""


class EmptySpan(CodeProbeError):
    """Attention pooling was asked to pool zero token representations."""


class DivergenceError(CodeProbeError):
    """Training loss became non-finite."""


class InsufficientData(CodeProbeError):
    """Too few programs (or too skewed labels) to build a usable split."""


class InsufficientSamples(CodeProbeError):
    """A statistical test needs more paired samples than were provided."""
