"""Term-rewriting optimizer."""

from .engine import FAMILIES, Ctx, FixpointExceeded, RewriteRule, Rewriter, root_context
from .pipeline import Phase, Pipeline, default_pipeline, load_pipeline, normalize
from .rules import RULES, family

__all__ = [
    "FAMILIES", "Ctx", "FixpointExceeded", "RewriteRule", "Rewriter", "root_context",
    "Phase", "Pipeline", "default_pipeline", "load_pipeline", "normalize", "RULES", "family",
]
