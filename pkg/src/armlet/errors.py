"""Exception hierarchy shared across armlet."""


class ArmletError(Exception):
    """Base class for every error raised by armlet."""


class SchemaError(ArmletError):
    pass


class SchemaParseError(SchemaError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DataError(ArmletError):
    def __init__(self, message: str, row: int | None = None):
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(prefix + message)
        self.row = row


class ShapeError(ArmletError, ValueError):
    pass


class NumericError(ArmletError, ArithmeticError):
    pass


class OptimizerError(NumericError):
    def __init__(self, message: str, tensor: str):
        super().__init__(f"{tensor}: {message}")
        self.tensor = tensor


class OracleError(NumericError):
    pass


class ForwardError(NumericError):
    def __init__(self, message: str, layer: str):
        super().__init__(f"{layer}: {message}")
        self.layer = layer


class ContractError(ArmletError):
    pass


class MetricError(ArmletError, ValueError):
    pass


class TrainingError(NumericError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message} {diagnostics}")
        self.diagnostics = diagnostics
