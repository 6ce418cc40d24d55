class AquaError(Exception):
    """Base class for errors raised by aquasweep."""


class NumericalError(AquaError, ArithmeticError):
    """A value left its domain (degenerate divisor, log of non-positive, NaN...)."""


class ConfigError(AquaError, ValueError):
    """Invalid configuration or malformed input file."""


class DivergenceError(NumericalError):
    def __init__(self, step, loss):
        super().__init__(f"loss became non-finite ({loss!r}) at step {step}")
        self.step = step
        self.loss = loss
