"""Exception hierarchy. Each class maps to a CLI exit code."""


class DconeError(Exception):
    exit_code = 3


class ConfigError(DconeError, ValueError):
    exit_code = 2


class NumericalError(DconeError, ArithmeticError):
    exit_code = 3


class ConvergenceError(NumericalError):
    exit_code = 4
