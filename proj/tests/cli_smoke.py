# Copyright 2026 The lpplab Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""End-to-end checks of the lpplab command line: exit codes, output
determinism, resume and the manifest schema."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

LPPLAB = sys.argv[1]
SCHEMA = json.loads(pathlib.Path(sys.argv[2]).read_text())
failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(*args):
    return subprocess.run([LPPLAB, *map(str, args)], capture_output=True, text=True)


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def manifest_without_timing(path):
    m = json.loads(path.read_text())
    m.pop("wall_time_seconds")
    return m


with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    cfg = write(tmp / "two_time.json", {"N": 200, "ic": "flat", "tau": [0.25, 0.5, 0.75], "w_1": [0.0, 0.5],
                                        "replicas": 100, "seed": 3})

    r = run("two-time", "--config", cfg, "--out", tmp / "a")
    check(r.returncode == 0, "two-time smoke run exits 0")
    lines = (tmp / "a" / "two-time.csv").read_bytes().split(b"\n")
    check(len(lines) == 1 + 6 + 1 and lines[-1] == b"", "one csv row per (tau, w) cell, LF endings")
    try:
        jsonschema.validate(json.loads((tmp / "a" / "manifest.json").read_text()), SCHEMA)
        check(True, "manifest validates against the shipped schema")
    except jsonschema.ValidationError as e:
        check(False, "manifest validates against the shipped schema: " + e.message)

    run("two-time", "--config", cfg, "--out", tmp / "b")
    check((tmp / "a" / "two-time.csv").read_bytes() == (tmp / "b" / "two-time.csv").read_bytes(),
          "same config twice gives byte-identical csv")
    check(manifest_without_timing(tmp / "a" / "manifest.json") == manifest_without_timing(tmp / "b" / "manifest.json"),
          "same config twice gives the same manifest apart from wall time")

    run("two-time", "--config", cfg, "--out", tmp / "c", "--workers", 4)
    check((tmp / "a" / "two-time.csv").read_bytes() == (tmp / "c" / "two-time.csv").read_bytes(),
          "1 and 4 workers give identical csv")

    run("two-time", "--config", cfg, "--out", tmp / "d", "--replicas", 50)
    r = run("two-time", "--config", cfg, "--out", tmp / "d", "--replicas", 50, "--resume", tmp / "d" / "manifest.json")
    check(r.returncode == 0 and (tmp / "a" / "two-time.csv").read_bytes() == (tmp / "d" / "two-time.csv").read_bytes(),
          "run 50 then resume 50 equals a fresh 100-replica run")

    r = run("two-time", "--config", cfg, "--out", tmp / "d", "--seed", 4, "--resume", tmp / "d" / "manifest.json")
    old_hash = json.loads((tmp / "d" / "manifest.json").read_text())["config_hash"]
    run("two-time", "--config", cfg, "--out", tmp / "h", "--seed", 4, "--replicas", 0)
    new_hash = json.loads((tmp / "h" / "manifest.json").read_text())["config_hash"]
    check(r.returncode == 2 and old_hash in r.stderr and new_hash in r.stderr and old_hash != new_hash,
          "resume with a changed config is refused with both hashes")

    bad = write(tmp / "bad.json", {"N": 200, "tau": [1.5], "replicas": 10})
    r = run("two-time", "--config", bad, "--out", tmp / "e")
    check(r.returncode == 2 and "'tau'" in r.stderr, "invalid config exits 2 naming the field")
    check(run("four-time", "--config", cfg).returncode == 2, "unknown kind exits 2")
    check(run("two-time").returncode == 2, "missing --config exits 2")
    check(run("two-time", "--config", tmp / "nope.json").returncode == 4, "unreadable config exits 4")
    check(run("two-time", "--config", cfg, "--out", "/proc/lpplab_out").returncode == 4, "unwritable output exits 4")
    cal = write(tmp / "cal.json", {"N_ref": 2000, "replicas": 10})
    check(run("calibrate", "--config", cal).returncode == 2, "calibration with fewer than 1000 replicas exits 2")

    entries = [{"w": w / 4, "V": 100.0, "ci_lo": 99.9, "ci_hi": 100.1, "se": 0.01} for w in range(-12, 13)]
    table = write(tmp / "table.json", {"format": "lpplab-stat-var/1", "N_ref": 4000, "replicas": 20000, "seed": 1,
                                       "created": "2026-01-01", "confidence": 0.95, "method": "fixture",
                                       "entries": entries})
    stat = write(tmp / "stat.json", {"N": 100, "ic": "stationary-b", "tau": [0.5], "replicas": 50,
                                     "table": str(table)})
    r = run("two-time", "--config", stat, "--out", tmp / "f")
    check(r.returncode == 3 and "FAIL" in r.stdout, "failed statistical check exits 3")
    check(json.loads((tmp / "f" / "manifest.json").read_text())["passed"] is False, "manifest records the failed check")

    empty = write(tmp / "empty.json", {"N": 50, "tau": [0.5], "replicas": 0})
    r = run("two-time", "--config", empty, "--out", tmp / "g")
    check(r.returncode == 0 and (tmp / "g" / "two-time.csv").read_text().count("\n") == 1,
          "zero replicas give a header-only csv")

sys.exit(1 if failures else 0)
