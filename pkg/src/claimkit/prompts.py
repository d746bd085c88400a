"""Loading, rendering, and hashing of the versioned prompt template assets.

Templates live as plain-text ``.tmpl`` files next to this module and use
``str.format`` placeholders. Literal braces inside a template (for example
a JSON example) must be doubled.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from pathlib import Path

TEMPLATE_DIR = Path(__file__).parent / "templates"

TEMPLATE_NAMES = (
    "decompose",
    "ambiguity",
    "molecular",
    "simple_decontext",
    "safe_revision",
    "silver_ambiguity",
    "evidence_gen",
    "evidence_gen_retry",
    "llm_check",
)


@lru_cache(maxsize=32)
def load_template(name: str) -> str:
    """Load a template by name (without the .tmpl extension)."""
    path = TEMPLATE_DIR / f"{name}.tmpl"
    if not path.exists():
        raise FileNotFoundError(f"prompt template not found: {path}")
    return path.read_text(encoding="utf-8")


def render(name: str, **variables: str) -> str:
    """Render a template; raises KeyError if a placeholder is missing."""
    return load_template(name).format(**variables)


def template_hash(name: str) -> str:
    path = TEMPLATE_DIR / f"{name}.tmpl"
    return hashlib.sha256(path.read_bytes()).hexdigest()


def all_template_hashes() -> dict[str, str]:
    """Content hashes of every shipped template, for run manifests."""
    return {name: template_hash(name) for name in TEMPLATE_NAMES}
