"""Exception hierarchy shared across the engine."""


class CtxnerError(Exception):
    """Base class for all engine errors."""


class CorpusError(CtxnerError):
    """Corpus loading or validation failure."""


class ContractViolation(CtxnerError):
    """A caller broke an operation precondition."""


class ProtocolError(CtxnerError):
    """A remote service answered outside its wire contract."""


class TransportError(CtxnerError):
    """A remote service could not be reached after retries."""


class ConfigError(CtxnerError):
    """Bad experiment or CLI configuration."""
