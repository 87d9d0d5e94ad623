"""Exception hierarchy. Every class carries the process exit code the CLI maps it to."""


class CfiwbError(Exception):
    exit_code = 70


class UsageError(CfiwbError, ValueError):
    exit_code = 64


class DataError(CfiwbError, ValueError):
    exit_code = 65


class InternalError(CfiwbError, RuntimeError):
    exit_code = 70


class ResourceError(CfiwbError, RuntimeError):
    exit_code = 71


class GenerationError(ResourceError):
    """Random generation ran out of its rejection budget."""


class PreconditionError(UsageError):
    pass


class SchemaError(UsageError):
    """Structures with different relation schemas were compared; reported as a data error."""

    exit_code = 65
