class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants.

    ``constraint`` names the violated rule so callers (and the CLI) can
    report it without parsing the message.
    """

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint
