"""Every figure kind renders from the golden CSVs, and the low-temperature
occupation concentrates on a shortest start-to-goal path."""

import csv
import os
from collections import deque

import numpy as np
import pytest

from ldrl_plots import FigureSpec, SchemaError, render

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def golden(name: str) -> str:
    return os.path.join(GOLDEN, name)


def spec(kind, inputs, out, **kw):
    return FigureSpec(kind=kind, inputs=[golden(i) for i in inputs],
                      output=str(out), **kw)


CASES = [
    ("occupation", ["steady_state_beta200.csv"], {"maze": golden("maze_9x9.txt")}),
    ("policy", ["policy.csv"], {"maze": golden("red_7x7.txt")}),
    ("sweep", ["sweep.csv"], {}),
    ("kl_curve", ["kl_curve.csv"], {"log_y": True}),
    ("value_scatter", ["values.csv", "dp_values.csv"], {}),
    ("rmsd_curve", ["compare.csv"], {}),
    ("theta_convergence", ["learn_history.csv"], {"target": 0.93}),
]


@pytest.mark.parametrize("kind,inputs,extra", CASES,
                         ids=[c[0] for c in CASES])
def test_every_kind_renders(tmp_path, kind, inputs, extra):
    out = tmp_path / f"{kind}.png"
    render(spec(kind, inputs, out, **extra))
    assert out.exists() and out.stat().st_size > 1000


def test_render_is_deterministic(tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    render(spec("sweep", ["sweep.csv"], a))
    render(spec("sweep", ["sweep.csv"], b))
    assert a.read_bytes() == b.read_bytes()


def test_missing_column_named(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("state,row,col,action\n0,0,0,0\n")
    with pytest.raises(SchemaError, match="probability"):
        render(FigureSpec(kind="occupation", inputs=[str(bad)],
                          output=str(tmp_path / "x.png")))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(SchemaError, match="unknown figure kind"):
        render(FigureSpec(kind="pie", inputs=[golden("sweep.csv")],
                          output=str(tmp_path / "x.png")))


def load_maze(path):
    with open(path) as fh:
        return [line for line in fh.read().splitlines() if line.strip()]


def bfs_distances(grid, source):
    height, width = len(grid), len(grid[0])
    dist = {source: 0}
    queue = deque([source])
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < height and 0 <= nc < width \
                    and grid[nr][nc] != "#" and (nr, nc) not in dist:
                dist[(nr, nc)] = dist[(r, c)] + 1
                queue.append((nr, nc))
    return dist


def test_low_temperature_top_decile_on_shortest_path():
    grid = load_maze(golden("maze_9x9.txt"))
    start = next((r, c) for r, row in enumerate(grid)
                 for c, ch in enumerate(row) if ch == "S")
    goal = next((r, c) for r, row in enumerate(grid)
                for c, ch in enumerate(row) if ch == "G")
    from_start = bfs_distances(grid, start)
    from_goal = bfs_distances(grid, goal)
    shortest = from_start[goal]
    geodesic = {cell for cell in from_start
                if cell in from_goal
                and from_start[cell] + from_goal[cell] == shortest}

    with open(golden("steady_state_beta200.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    cells = {}
    for row in rows:
        key = (int(row["row"]), int(row["col"]))
        cells[key] = cells.get(key, 0.0) + float(row["probability"])
    n_states = len(cells)
    n_top = int(np.ceil(0.1 * n_states))
    top = sorted(cells, key=cells.get, reverse=True)[:n_top]
    off_path = [c for c in top if c not in geodesic]
    assert not off_path, f"top-decile cells off every shortest path: {off_path}"
    # the mass on the geodesic cells dominates overwhelmingly
    on_path_mass = sum(p for c, p in cells.items() if c in geodesic)
    assert on_path_mass > 0.999
