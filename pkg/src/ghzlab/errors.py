"""Error types that the command-line layer maps to distinct exit codes."""


class ConfigError(ValueError):
    """Invalid configuration file or parameter range."""


class SolverError(RuntimeError):
    """A numerical solver could not produce a valid solution."""


class FitError(RuntimeError):
    """A least-squares / likelihood fit failed or is degenerate."""
