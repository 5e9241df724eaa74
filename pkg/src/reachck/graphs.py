"""Reachability graphs: DOT emission and optional figure rendering.

Nodes are the program's let-bindings in binding order; edges are one-step
reachability (the variable atoms of each binding's declared qualifier).
Nodes that reach the fresh marker are drawn filled.
"""

from __future__ import annotations

from .syntax import FreshAtom, QualifiedType, Term, VarAtom
from .typecheck import typecheck_program


def collect_bindings(term: Term) -> list[tuple[str, QualifiedType]]:
    """Let-bindings with their declared qualified types, in binding order."""
    seen: dict[str, QualifiedType] = {}
    order: list[str] = []

    def record(name: str, qt: QualifiedType):
        if name not in seen:
            order.append(name)
        seen[name] = qt

    typecheck_program(term, on_let=record)
    return [(name, seen[name]) for name in order]


def _edges(bindings):
    names = [n for n, _ in bindings]
    position = {n: i for i, n in enumerate(names)}
    out = []
    for name, qt in bindings:
        targets = sorted(
            (a.name for a in qt.qual.atoms
             if isinstance(a, VarAtom) and a.name in position),
            key=lambda n: position[n])
        for tgt in targets:
            out.append((name, tgt))
    return out


def _fresh_reaching(bindings) -> set:
    direct = {name for name, qt in bindings
              if any(isinstance(a, FreshAtom) for a in qt.qual.atoms)}
    quals = dict(bindings)
    changed = True
    while changed:
        changed = False
        for name, qt in bindings:
            if name in direct:
                continue
            for a in qt.qual.atoms:
                if isinstance(a, VarAtom) and a.name in direct:
                    direct.add(name)
                    changed = True
                    break
    return direct


def to_dot(bindings) -> str:
    lines = ["digraph reachability {", "  node [shape=ellipse];"]
    fresh = _fresh_reaching(bindings)
    for name, _qt in bindings:
        if name in fresh:
            lines.append(f'  "{name}" [style=filled, fillcolor=lightsteelblue];')
        else:
            lines.append(f'  "{name}";')
    for src, tgt in _edges(bindings):
        lines.append(f'  "{src}" -> "{tgt}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_program(term: Term) -> str:
    return to_dot(collect_bindings(term))


def render_figure(bindings, path: str) -> None:
    """Draw the reachability graph to an image file with matplotlib."""
    import math

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [n for n, _ in bindings]
    fresh = _fresh_reaching(bindings)
    n = max(1, len(names))
    pos = {}
    for i, name in enumerate(names):
        angle = 2 * math.pi * i / n
        pos[name] = (math.cos(angle), math.sin(angle))
    fig, ax = plt.subplots(figsize=(6, 6))
    for src, tgt in _edges(bindings):
        (x0, y0), (x1, y1) = pos[src], pos[tgt]
        ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                    arrowprops=dict(arrowstyle="->", color="gray",
                                    shrinkA=18, shrinkB=18))
    for name in names:
        x, y = pos[name]
        color = "lightsteelblue" if name in fresh else "white"
        ax.scatter([x], [y], s=900, c=color, edgecolors="black", zorder=2)
        ax.annotate(name, (x, y), ha="center", va="center", zorder=3)
    ax.set_axis_off()
    ax.set_xlim(-1.4, 1.4)
    ax.set_ylim(-1.4, 1.4)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
