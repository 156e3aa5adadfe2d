from __future__ import annotations


class LidarClusterError(Exception):
    pass


class InvalidInputError(LidarClusterError, ValueError):
    pass


class ContractViolation(LidarClusterError, ValueError):
    pass


class ConfigError(LidarClusterError, ValueError):
    def __init__(self, path: str, line: int | None, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {reason}")


class FormatError(LidarClusterError, ValueError):
    pass


class MisalignedFileError(FormatError):
    pass


class ShortFileError(FormatError):
    pass


class TextSceneError(FormatError):
    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class DataIOError(LidarClusterError, OSError):
    pass


class OracleGuardError(LidarClusterError, ValueError):
    pass


class UsageError(LidarClusterError):
    pass


class UnpairedFilesError(UsageError):
    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__("unpaired input files: " + ", ".join(missing))


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, UnpairedFilesError):
        return EXIT_DATA
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, (InvalidInputError, ConfigError, FormatError, DataIOError, FileNotFoundError)):
        return EXIT_DATA
    return EXIT_INTERNAL
