"""Exception hierarchy.

Every error carries the process exit code the CLI reports for it:
2 for bad input, 3 for a failing external tool.
"""


class CgvcError(Exception):
    exit_code = 2


class InputError(CgvcError):
    exit_code = 2


class TruncatedInput(InputError):
    pass


class MissingMeta(InputError):
    pass


class InvalidDimensions(InputError):
    pass


class MissingLabelMap(InputError):
    def __init__(self, index):
        super().__init__(f"missing label map for frame {index}")
        self.index = index


class LabelMapError(InputError):
    pass


class CorruptStream(InputError):
    pass


class CodecMismatch(InputError):
    pass


class TemplateError(InputError):
    pass


class BadMagic(InputError):
    pass


class UnsupportedVersion(InputError):
    pass


class CrcMismatch(InputError):
    def __init__(self, section):
        super().__init__(f"CRC mismatch in section {section}")
        self.section = section


class PlanOutOfRange(InputError):
    pass


class TruncatedSection(InputError):
    pass


class PlanStreamMismatch(InputError):
    pass


class DegenerateCurve(InputError):
    pass


class UnreachableRate(InputError):
    def __init__(self, message, low_kbps, high_kbps):
        super().__init__(f"{message} (achievable {low_kbps:.3f}..{high_kbps:.3f} kbps)")
        self.low_kbps = low_kbps
        self.high_kbps = high_kbps


class ExternalToolError(CgvcError):
    exit_code = 3


class ExternalCommandFailed(ExternalToolError):
    def __init__(self, command, returncode, stderr=""):
        super().__init__(f"command exited with {returncode}: {command}\n{stderr}".rstrip())
        self.returncode = returncode
        self.stderr = stderr


class GeneratorFailed(ExternalCommandFailed):
    pass


class GeneratorOutputMismatch(ExternalToolError):
    pass
