class ConfigError(ValueError):
    """Invalid problem, grid or study configuration."""


class SolverError(RuntimeError):
    """A solve or time integration failed (non-finite values, blow-up)."""
