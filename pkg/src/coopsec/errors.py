"""Exception types shared by every module."""


class ValidationError(ValueError):
    """Malformed input: bad ids, self-loops, duplicate arcs, negative costs."""


class GuardExceededError(RuntimeError):
    """An exponential routine was asked to run beyond its size guard."""


class NotReducedError(ValueError):
    """The routine needs a network where every player is secured in the optimum."""
