"""Toolkit for decomposing, rewriting, and verifying long-form model output.

The pipeline breaks responses into atomic claims, rewrites them with four
revision strategies, audits the rewrites for minimality loss through a
controlled-evidence experiment, and evaluates verification accuracy
against multi-entity evidence sets.
"""

from .core import (
    AtomicClaim,
    DisambiguationCriteria,
    EvidenceDocument,
    Judgment,
    Label,
    ModelResponse,
    RevisedClaim,
    Strategy,
    normalize_text,
)

__version__ = "0.1.0"

__all__ = [
    "AtomicClaim",
    "DisambiguationCriteria",
    "EvidenceDocument",
    "Judgment",
    "Label",
    "ModelResponse",
    "RevisedClaim",
    "Strategy",
    "normalize_text",
    "__version__",
]
