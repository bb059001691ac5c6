"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end and an
optional ``stage`` label set by the pipeline when it re-raises.
"""


class GaugeCVTError(Exception):
    exit_code = 1

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage

    def with_stage(self, stage):
        """Return a copy of this error labelled with a pipeline stage."""
        err = type(self)(self.args[0], stage=stage)
        for key, value in vars(self).items():
            if key != "stage":
                setattr(err, key, value)
        return err

    def __str__(self):
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class ConfigurationError(GaugeCVTError, ValueError):
    exit_code = 2


class InputError(GaugeCVTError):
    exit_code = 3


class FormatError(InputError, ValueError):
    pass


class DimensionError(InputError, ValueError):
    pass


class ValidationError(InputError, ValueError):
    pass


class NumericalError(GaugeCVTError, ArithmeticError):
    exit_code = 4


class CapacityError(NumericalError):
    pass


class DegenerateSeriesError(NumericalError):
    pass


class DegenerateFieldError(NumericalError):
    pass


class DegenerateFitError(NumericalError):
    pass


class EmptyAnnulusError(NumericalError):
    pass
