try:
    from typing import override
except ImportError:  # Python < 3.12
    from typing_extensions import override


class EmberError(Exception):
    """Base class for every failure the pipeline reports on purpose."""
    kind: str = "ember"

    def __init__(self, message: str, **fields: object):
        super().__init__(message)
        self.message = message
        self.fields = fields

    def one_line(self) -> str:
        """Single-line, machine-parsable rendering used by the CLI."""
        parts = [f"error kind={self.kind}"]
        for key, value in self.fields.items():
            if value is None:
                continue
            parts.append(f"{key}={str(value).replace(' ', '_')}")
        msg = self.message.replace('"', "'").replace("\n", " ")
        parts.append(f'msg="{msg}"')
        return " ".join(parts)

    @override
    def __str__(self) -> str:
        return self.message


class DimensionError(EmberError, ValueError):
    kind = "dimension"


class EmptyInputError(EmberError, ValueError):
    kind = "empty_input"


class LabelError(EmberError, ValueError):
    kind = "label"


class FormatError(EmberError, ValueError):
    kind = "format"

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        super().__init__(message, path=path, line=line)
        self.path = path
        self.line = line

    @override
    def __str__(self) -> str:
        where = ""
        if self.path is not None:
            where += f"{self.path}"
        if self.line is not None:
            where += f":{self.line}"
        return f"{where}: {self.message}" if where else self.message


class ConfigError(EmberError, ValueError):
    kind = "config"


class NonFiniteError(EmberError, ArithmeticError):
    """NaN/Inf showed up. `where` is a parameter path or a pipeline stage."""
    kind = "non_finite"

    def __init__(self, message: str, where: str):
        super().__init__(message, where=where)
        self.where = where


class GradcheckError(EmberError, AssertionError):
    kind = "gradcheck"

    def __init__(self, message: str, path: str, rel_error: float):
        super().__init__(message, path=path, rel_error=f"{rel_error:.3e}")
        self.path = path
        self.rel_error = rel_error


class TrainingDiverged(EmberError, RuntimeError):
    """Raised when training hits a non-finite loss; `result` holds the last good state."""
    kind = "diverged"

    def __init__(self, message: str, result: object, where: str | None = None):
        super().__init__(message, where=where)
        self.result = result
