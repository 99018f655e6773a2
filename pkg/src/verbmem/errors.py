"""Exception hierarchy for the memory engine."""


class MemoryStoreError(Exception):
    """Base class for store failures."""


class CorruptStoreError(MemoryStoreError):
    pass


class SchemaVersionError(MemoryStoreError):
    pass


class EmbedderMismatchError(MemoryStoreError):
    pass


class UnknownEventError(MemoryStoreError, KeyError):
    pass


class EmptyTextError(MemoryStoreError, ValueError):
    pass
