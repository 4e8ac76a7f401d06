#!/usr/bin/env python3
"""Writes samples/beyond_range.script: full speed east, camera pan at 2 s,
MOV repeated at 10 Hz until well past the link's range."""

import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "samples" / "beyond_range.script"


def main() -> None:
    lines = ["# Drive east out of radio range. MOV is repeated at 10 Hz so the",
             "# watchdog only trips once commands stop getting through.",
             "AT 0.00 SPD 255"]
    for k in range(1300):
        t = 0.02 + 0.1 * k
        lines.append(f"AT {t:.2f} MOV F")
        if k == 20:
            lines.append("AT 2.05 PAN 45")
    OUT.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
