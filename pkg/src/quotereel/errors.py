"""Exception types shared across the pipeline."""


class QuoteReelError(Exception):
    """Base class for all pipeline errors."""


class ParseError(QuoteReelError):
    """A text input (transcript, script, embedding file, EDL) violates its format.

    Carries enough location data to point at the offending line or character.
    """

    def __init__(self, message, *, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"offset {offset}")
        prefix = ":".join(loc)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ConfigError(QuoteReelError):
    """Pipeline configuration is missing, malformed, or inconsistent."""


class DataError(QuoteReelError):
    """Runtime data does not satisfy an operation's preconditions."""
