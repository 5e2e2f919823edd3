"""Phase portraits and solution maps rendered to SVG with matplotlib.

Output is byte-stable: the SVG hash salt is fixed and the date metadata
is dropped.
"""
from __future__ import annotations

import math
from typing import List, Optional, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import CohomError  # noqa: E402
from .field import Box  # noqa: E402
from .flow import IntegratorConfig, Terminal, integrate  # noqa: E402
from .solver import SolutionGrid, Status, _frame, _leaf_field, reach_level  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "cohomfield"
matplotlib.rcParams["svg.fonttype"] = "none"

_CFG = IntegratorConfig(rtol=1e-8, atol=1e-8, wall_time=2.0)
LEAF_TIME = 50.0


class RenderError(CohomError):
    """A styled leaf (separatrix or transversal) could not be integrated."""


def _polyline(field, p0, box: Box, t: float = LEAF_TIME, required: bool = False) -> np.ndarray:
    parts = []
    for sign in (-1.0, 1.0):
        traj = integrate(field, None, p0, sign * t, box, config=_CFG)
        if required and traj.terminal_event is Terminal.StepFailure:
            raise RenderError(f"leaf through {p0} failed: {traj.message}")
        pts = [(s[1], s[2]) for s in traj.samples]
        parts.append(pts[::-1] if sign < 0 else pts[1:])
    return np.array(parts[0] + parts[1])


def _dedupe(points: List[Tuple[float, float]], tol: float = 1e-6):
    out = []
    for p in points:
        if all(math.dist(p, q) > tol for q in out):
            out.append(p)
    return out


def styled_leaves(scenario):
    """Plane points on the separatrices and on the transversal leaves."""
    seps, trans = [], []
    for pair in scenario.pairs:
        for level in (pair.b1, pair.b2):
            fr = _frame(scenario, pair, level)
            seps.append(fr.q)
            trans.append(fr.q)
        c = reach_level(scenario, pair.anchor, pair.b, _CFG)
        trans.append(c)
    return _dedupe(seps), _dedupe(trans)


def render_portrait(scenario, path, n_leaves: int = 9) -> None:
    view = scenario.view
    pad = Box(view.x0 - 0.05 * (view.x1 - view.x0), view.x1 + 0.05 * (view.x1 - view.x0),
              view.y0 - 0.05 * (view.y1 - view.y0), view.y1 + 0.05 * (view.y1 - view.y0))
    try:
        seps, trans = styled_leaves(scenario)
    except CohomError as exc:
        raise RenderError(str(exc)) from exc
    fig, ax = plt.subplots(figsize=(6, 6))
    for i, x in enumerate(np.linspace(view.x0, view.x1, n_leaves)):
        for j, y in enumerate(np.linspace(view.y0, view.y1, n_leaves)):
            line = _polyline(scenario.xi, (float(x), float(y)), pad, t=LEAF_TIME)
            ax.plot(line[:, 0], line[:, 1], color="0.65", lw=0.6, gid=f"leaf-{i}-{j}")
    lf = _leaf_field(scenario.G, 1.0)
    for k, q in enumerate(trans):
        line = _polyline(lf, q, pad, t=4 * (pad.x1 - pad.x0 + pad.y1 - pad.y0), required=True)
        ax.plot(line[:, 0], line[:, 1], color="tab:blue", lw=1.2, ls="--", gid=f"transversal-{k}")
    for k, q in enumerate(seps):
        line = _polyline(scenario.xi, q, pad, required=True)
        ax.plot(line[:, 0], line[:, 1], color="tab:red", lw=3.0, gid=f"separatrix-{k}")
    ax.set_xlim(view.x0, view.x1)
    ax.set_ylim(view.y0, view.y1)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(scenario.name)
    ax.set_aspect("auto")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_solution(grid: SolutionGrid, path, title: str = "f") -> None:
    vals = np.where(np.array([[s is Status.Unreachable for s in row] for row in grid.status]), np.nan, grid.values)
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(grid.xs, grid.ys, vals.T, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="f")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
