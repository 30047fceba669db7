"""Exception hierarchy. Each class maps to one CLI exit code."""


class FastRPError(Exception):
    exit_code = 1


class ParseError(FastRPError, ValueError):
    exit_code = 3


class GraphError(FastRPError, ValueError):
    exit_code = 1


class ShapeError(FastRPError, ValueError):
    exit_code = 1


class NumericError(FastRPError, ArithmeticError):
    exit_code = 4


class QueryError(FastRPError, LookupError):
    exit_code = 5
