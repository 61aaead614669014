class ComicdetError(Exception):
    """Base class for errors raised by comicdet."""


class ConfigError(ComicdetError, ValueError):
    """Invalid network or pipeline configuration."""


class DataError(ComicdetError, ValueError):
    """Broken annotation files, missing images, malformed inputs."""


class DivergenceError(ComicdetError, RuntimeError):
    """Non-finite values encountered during training."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
