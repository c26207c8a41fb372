"""Spectral theory of symmetric first-order systems with unequal deficiency indices."""

from .blockspace import BlockSignature, Inertia, build_J, inertia, nevanlinna_defect
from .errors import WeylkitError

__version__ = "0.1.0"

__all__ = [
    "BlockSignature",
    "Inertia",
    "WeylkitError",
    "build_J",
    "inertia",
    "nevanlinna_defect",
]
