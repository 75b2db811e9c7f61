"""Exception hierarchy shared by every module."""


class PageLinkError(Exception):
    """Base class for domain errors (the CLI maps these to exit code 1)."""


class ConstructionError(PageLinkError, ValueError):
    pass


class NodeNotFoundError(PageLinkError, LookupError):
    pass


class SchemaError(PageLinkError, ValueError):
    pass


class AlignmentError(PageLinkError, ValueError):
    pass


class ConfigError(PageLinkError, ValueError):
    pass


class NumericalError(PageLinkError, ArithmeticError):
    """Non-finite value during loss evaluation or root finding.

    ``edge_ids`` lists the parent-graph edges whose mask logits were
    non-finite, when that is the cause.
    """

    def __init__(self, message, edge_ids=()):
        super().__init__(message)
        self.edge_ids = tuple(edge_ids)


class DegreeError(PageLinkError, ValueError):
    pass


class NoPathError(PageLinkError):
    pass


class GenerationError(PageLinkError):
    pass


class ParseError(PageLinkError, ValueError):
    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class UndefinedMetric(PageLinkError, ValueError):
    pass


class SpecError(PageLinkError, ValueError):
    pass


class SizeError(PageLinkError, ValueError):
    pass
