"""
Exception hierarchy for uwdecode
"""


class UwdError(Exception):
    """Base class for every error raised by the toolkit"""


class ConfigError(UwdError):
    """A configuration value violates its invariant"""


class InvalidSignal(UwdError):
    """Audio samples are not a finite mono sequence"""


class SignalTooShort(UwdError):
    """Audio shorter than one analysis frame"""


class AllSilent(UwdError):
    """Utterance (or clean signal) carries no energy at all"""


class InvalidNoiseWindow(UwdError):
    """Leading-frame count for noise estimation out of range"""


class DimMismatch(UwdError):
    """Vector or matrix dimensions do not agree"""


class EmptyDataset(UwdError):
    """Training data or alignments are empty"""


class MissingFeature(UwdError):
    """A component needed to assemble a DNN input is absent"""


class EmptyInput(UwdError):
    """Decode requested on zero frames"""


class TooLarge(UwdError):
    """Brute-force search space exceeds its guard"""


class EmptyReference(UwdError):
    """WER requested against an empty reference"""


class UnknownWord(UwdError):
    """Transcript word missing from the lexicon"""


class MissingDependency(UwdError):
    """A system needs a model or clean twin that does not exist"""


class IoError(UwdError):
    """File could not be read or written"""


class ModelFormatError(UwdError):
    """Model or archive file is malformed"""


class NoValidPath(UwdError):
    """No state path of the lexicon fits the frame count"""
