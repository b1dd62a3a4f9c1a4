"""msqkit: magic-square construction, QFT-based detection, shifted-oracle
recovery, and number-theoretic certification, with a service front end."""

from . import detect, errors, latin, markedset, numbertheory, presets, protocol, qsim, squares

__version__ = "0.1.0"

__all__ = [
    "detect",
    "errors",
    "latin",
    "markedset",
    "numbertheory",
    "presets",
    "protocol",
    "qsim",
    "squares",
    "__version__",
]
