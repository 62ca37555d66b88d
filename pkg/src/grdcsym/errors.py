"""Exception hierarchy shared by every module of the package."""


class SymbolicError(Exception):
    """Base class for all errors raised by grdcsym."""


# expression core
class CyclicBinding(SymbolicError):
    pass


class NotPolynomialInVars(SymbolicError):
    pass


class UnsupportedSubstitution(SymbolicError):
    """An unknown-function argument was bound to something other than a symbol."""


class UnboundSymbol(SymbolicError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DomainError(SymbolicError, ArithmeticError):
    pass


class SamplingExhausted(SymbolicError):
    pass


# language
class ExprSyntaxError(SymbolicError):
    def __init__(self, message, line=1, column=1, hint=None):
        self.line = line
        self.column = column
        self.hint = hint
        text = f"{message} at line {line}, column {column}"
        if hint:
            text += f" ({hint})"
        super().__init__(text)


class UnknownIdentifier(ExprSyntaxError):
    def __init__(self, name, line=1, column=1):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", line, column)


class MalformedDocument(SymbolicError):
    pass


class SchemaError(SymbolicError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


# jets and determining equations
class OrderOverflow(SymbolicError):
    pass


class IllegalDependence(SymbolicError):
    pass


class ResidualOrderLeak(SymbolicError):
    pass


class AssumptionMissing(SymbolicError):
    pass


class RankDeficientSampling(SymbolicError):
    pass


# invariants and reduction
class UnsupportedFieldStructure(SymbolicError):
    pass


class NotSelfSimilar(SymbolicError):
    def __init__(self, message, witnesses=()):
        self.witnesses = list(witnesses)
        super().__init__(message)


class UnsupportedInvariantForm(SymbolicError):
    pass


class NotAutonomous(SymbolicError):
    pass


class NotSeparable(SymbolicError):
    pass
