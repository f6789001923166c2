class ConfigError(ValueError):
    """Invalid configuration or parameter value."""


class ContractError(ValueError):
    """An operation was called outside its precondition."""


class InfeasibleError(ValueError):
    """The allocation problem has no feasible solution."""
