"""Phase ordering and the top-level ``normalize`` entry point."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Union

from ..prelude import definitions
from ..syntax import Expr, Let, _uniq, all_names, uniquify
from .engine import FAMILIES, FixpointExceeded, Rewriter, root_context
from .rules import RULES


@dataclass
class Phase:
    """A set of rules (by family or by rule name) run to a fixpoint."""
    select: tuple
    max_passes: int = 50

    @property
    def name(self) -> str:
        return "+".join(self.select)

    def rules(self) -> list:
        out = []
        for s in self.select:
            if s in RULES:
                out.append(RULES[s])
            elif s in FAMILIES:
                out.extend(r for r in RULES.values() if r.family == s)
            else:
                raise ValueError(f"unknown rule or family {s!r}")
        return out


@dataclass
class Pipeline:
    phases: list = field(default_factory=list)
    max_rounds: int = 12

    def run(self, e: Expr, env: Optional[dict] = None, trace: Optional[list] = None) -> Expr:
        ctx = root_context(env)
        for _ in range(self.max_rounds):
            start = e
            for ph in self.phases:
                e = Rewriter(ph.rules(), ph.max_passes, ph.name, trace).run(e, ctx)
            if e == start:
                return e
        raise FixpointExceeded("pipeline")


DEFAULT_PHASES = (
    (("Lambda",), 50),
    (("TuplePE", "Ring"), 50),
    (("Fusion", "Lambda"), 50),
    (("Fission",), 50),
    (("TuplePE", "ifold-identity", "dead-let"), 50),
    (("Conditional", "Iteration"), 50),
    (("Ring", "LICM", "let-inline", "dead-let"), 50),
)


def default_pipeline(soa: bool = False) -> Pipeline:
    phases = [Phase(sel, n) for sel, n in DEFAULT_PHASES]
    if soa:
        phases.append(Phase(("SoA",), 50))
    return Pipeline(phases)


def load_pipeline(source: Union[str, os.PathLike]) -> Pipeline:
    """Read a phase list: one phase per line, ``Family,rule-name 50``.

    ``#`` starts a comment.  The pass bound is optional and defaults to 50.
    """
    text = str(source)
    if "\n" not in text and os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    phases = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) > 2:
            raise ValueError(f"line {lineno}: expected 'Rules [passes]'")
        select = tuple(s.strip() for s in parts[0].split(",") if s.strip())
        bound = int(parts[1]) if len(parts) == 2 else 50
        if bound <= 0:
            raise ValueError(f"line {lineno}: pass bound must be positive")
        ph = Phase(select, bound)
        ph.rules()  # validates names
        phases.append(ph)
    if not phases:
        raise ValueError("empty pipeline")
    return Pipeline(phases)


def _close_prelude(e: Expr, env: dict) -> Expr:
    defs = definitions()
    need = {n for n in e.fvs if n in defs and n not in env}
    if not need:
        return e
    from ..prelude import names
    for name in reversed(names()):
        if name in need:
            need |= {n for n in defs[name].fvs if n in defs}
    # prelude binders are renamed away from the user's names so that the
    # final uniquify pass leaves the user's binders alone
    used = all_names(e) | set(defs)
    for name in reversed([n for n in names() if n in need]):
        e = Let(name, _uniq(defs[name], used, {}), e)
    return e


def normalize(e: Expr, pipeline: Optional[Pipeline] = None, env: Optional[dict] = None,
              trace: Optional[list] = None) -> Expr:
    """Rewrite ``e`` with the phase list until no rule applies.

    Prelude names free in ``e`` are inlined first so that fusion can see
    through library calls.  ``env`` maps free variables to their types.
    """
    env = dict(env or {})
    pipeline = pipeline or default_pipeline()
    e = _close_prelude(uniquify(e), env)
    e = pipeline.run(e, env, trace)
    return uniquify(e)
