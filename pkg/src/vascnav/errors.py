"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments that break its contract."""


class UsageError(RuntimeError):
    """An operation was called in a state where it is not allowed."""


class DataFormatError(ValueError):
    """A serialized map or episode file failed validation."""


def require(cond, msg):
    if not cond:
        raise ContractViolation(msg)
