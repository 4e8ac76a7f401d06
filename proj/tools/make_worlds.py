#!/usr/bin/env python3
"""Regenerates the bundled world files under data/worlds/."""
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "worlds"


def write(name, w, h, cell, base, walls):
    rows = []
    for j in reversed(range(h)):
        rows.append("".join("#" if (i, j) in walls or i in (0, w - 1) or j in (0, h - 1) else "." for i in range(w)))
    text = f"{w} {h} {cell:g} {base[0]:g} {base[1]:g}\n" + "\n".join(rows) + "\n"
    (OUT / name).write_text(text)


def arena():
    walls = set()
    for j in range(8, 22):  # partition with a doorway
        if j not in (14, 15):
            walls.add((24, j))
    for i in range(28, 36):  # crate
        for j in range(20, 24):
            walls.add((i, j))
    for i in range(12, 20):  # low shelf along the north side
        walls.add((i, 25))
    write("arena.txt", 40, 30, 0.25, (2.0, 2.0), walls)


def field():
    write("field.txt", 500, 500, 0.25, (2.0, 62.5), set())


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    arena()
    field()
