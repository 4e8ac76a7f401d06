#!/usr/bin/env python3
"""Writes tests/golden/protocol_vectors.json from a standalone encoder."""
import json
import pathlib
from functools import reduce

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "golden" / "protocol_vectors.json"


def seal(tag, body):
    x = reduce(lambda a, c: a ^ ord(c), body, 0)
    return f"{tag}{body}*{x:02X}\n"


def command(verb, arg, seq):
    return {"verb": verb, "arg": arg, "seq": seq, "line": seal("C", f" {verb} {arg} {seq}")}


def telemetry(seq, batt, duty, dl, dr, pan, tilt, leds, rssi, pose=None):
    body = f" {seq} {batt} {duty} {dl} {dr} {pan} {tilt} {leds:02X} {rssi}"
    if pose:
        body += " " + " ".join(str(v) for v in pose)
    rec = {"seq": seq, "battery_pct": batt, "duty": duty, "dir_left": dl, "dir_right": dr, "pan_deg": pan,
           "tilt_deg": tilt, "leds": leds, "rssi_dbm": rssi, "line": seal("T", body)}
    if pose:
        rec["pose"] = {"x_cm": pose[0], "y_cm": pose[1], "heading_cdeg": pose[2]}
    return rec


def rejects():
    good = seal("C", " MOV 0 7")
    bad_sum = good[:-3] + ("00" if good[-3:-1] != "00" else "01") + "\n"
    return [
        {"line": bad_sum, "error": "BadChecksum"},
        {"line": seal("C", " SPD 300 1"), "error": "ArgOutOfRange"},
        {"line": seal("C", " FLY 1 1"), "error": "UnknownVerb"},
        {"line": seal("C", " MOV 0"), "error": "Malformed"},
        {"line": seal("C", " MOV 00 1"), "error": "Malformed"},
        {"line": seal("C", " MOV +1 1"), "error": "Malformed"},
        {"line": seal("C", " PAN -0 1"), "error": "Malformed"},
        {"line": seal("C", " MOV 0 65536"), "error": "ArgOutOfRange"},
        {"line": seal("C", " PAN 181 2"), "error": "ArgOutOfRange"},
        {"line": seal("C", " STP 1 2"), "error": "ArgOutOfRange"},
        {"line": seal("C", " MOV  0 1"), "error": "Malformed"},
        {"line": good[:-1], "error": "Malformed"},
        {"line": "C MOV 0 7\n", "error": "Malformed"},
        {"line": "garbage\n", "error": "Malformed"},
    ]


def main():
    vectors = {
        "checksum_rule": "XOR of all bytes strictly between the tag letter and '*', two uppercase hex digits",
        "commands": [
            command("STP", 0, 0),
            command("MOV", 0, 7),
            command("MOV", 1, 8),
            command("MOV", 2, 9),
            command("MOV", 3, 10),
            command("SPD", 128, 11),
            command("SPD", 255, 65535),
            command("PAN", -45, 12),
            command("PAN", 180, 13),
            command("TLT", -180, 14),
            command("TLT", 30, 15),
            command("PNG", 0, 16),
        ],
        "telemetry": [
            telemetry(0, 100, 0, "B", "B", 0, 0, 0x01, -40),
            telemetry(7, 99, 128, "F", "F", 0, 0, 0x5D, -65),
            telemetry(65535, 0, 255, "R", "F", -90, 60, 0xC5, -90, (12345, -678, -17999)),
            telemetry(42, 50, 200, "F", "R", 90, -30, 0x9D, -127, (0, 0, 18000)),
        ],
        "errors": [{"code": c, "line": seal("E", f" {c}")} for c in
                   ("BadChecksum", "UnknownVerb", "ArgOutOfRange", "Malformed")],
        "rejects": rejects(),
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(vectors, indent=2) + "\n")


if __name__ == "__main__":
    main()
