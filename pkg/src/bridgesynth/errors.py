class ConfigurationError(ValueError):
    """Raised when a configuration or parameter range is invalid."""


class CloudFormatError(ValueError):
    """Raised when a point-cloud text file cannot be parsed."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class ManifestError(ValueError):
    """Raised when a dataset manifest does not match the expected schema."""
