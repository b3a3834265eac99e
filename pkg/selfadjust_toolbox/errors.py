"""Exceptions raised by the toolbox."""

__all__ = ['TraceError', 'StructuralError', 'TraceMismatchError',
           'WriteOnceError', 'UnwrittenReadError', 'ContractViolation',
           'InputError', 'CorrectnessFailure']


class TraceError(Exception):
    """Base class of every error raised while building or updating a trace."""


class StructuralError(TraceError):
    """A trace node was attached where the tree shape does not allow it."""


class TraceMismatchError(StructuralError):
    """Two traces that should be cognate differ in shape.

    Parameters
    ----------
    path : tuple of int
        Child-slot path from the root to the point of divergence.
    detail : str
        Human readable description of the difference.
    """

    def __init__(self, path, detail):
        super().__init__('traces diverge at path {}: {}'.format(path, detail))
        self.path = tuple(path)
        self.detail = detail


class WriteOnceError(TraceError):
    """A modifiable was written twice with different values in one epoch."""

    def __init__(self, modifiable, old, new):
        super().__init__('modifiable #{} already holds {!r} in this epoch; '
                         'refusing to overwrite with {!r}'
                         .format(modifiable.uid, old, new))
        self.modifiable = modifiable


class UnwrittenReadError(TraceError):
    """A modifiable was read before anything was written to it."""

    def __init__(self, modifiable):
        super().__init__('modifiable #{} is read before it is written'
                         .format(modifiable.uid))
        self.modifiable = modifiable


class ContractViolation(TraceError, AssertionError):
    """A caller broke the documented contract of a primitive."""


class InputError(ValueError):
    """A benchmark update would produce a malformed input structure."""


class CorrectnessFailure(TraceError):
    """Propagated outputs disagree with the from-scratch oracle."""
