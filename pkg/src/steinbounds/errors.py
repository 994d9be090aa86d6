"""Exception hierarchy.

Validation-type errors map to CLI exit code 1, computation errors to 2.
"""


class SteinBoundsError(Exception):
    exit_code = 2


class ValidationError(SteinBoundsError, ValueError):
    """An input violates a documented invariant."""

    exit_code = 1


class ParseError(ValidationError):
    def __init__(self, message, line=None, column=None, field=None):
        self.line = line
        self.column = column
        self.field = field
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        if field is not None:
            loc.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)


class InvalidModel(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class InvalidInput(ValidationError):
    pass


class CapExceeded(SteinBoundsError):
    pass


class ExactUnavailable(SteinBoundsError):
    pass


class TooFewSamples(SteinBoundsError):
    pass


class DegenerateModel(SteinBoundsError):
    pass


class NumericalError(SteinBoundsError):
    pass


class ZeroCount(SteinBoundsError):
    """No evaluation sample fell into the acceptance region.

    ``upper_bound`` is the rule-of-three 95% upper confidence bound on beta.
    """

    def __init__(self, n_eval):
        self.n_eval = n_eval
        self.upper_bound = 3.0 / n_eval
        super().__init__(
            f"no Q-sample accepted out of {n_eval}; beta <= {self.upper_bound:.3g} (rule of three)"
        )
