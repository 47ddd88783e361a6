"""Exception type shared by every module."""


class EMFFError(Exception):
    """Raised on any contract violation; ``code`` is a stable machine-readable tag."""

    def __init__(self, code: str, message: str = "", **context):
        self.code = code
        self.context = context
        text = code if not message else f"{code}: {message}"
        super().__init__(text)
