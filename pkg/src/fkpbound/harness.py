"""Run external SMT solvers over a generated suite and collect statistics."""

from __future__ import annotations

import csv
import json
import os
import re
import shlex
import signal
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

CSV_HEADER = ["solver", "config", "encoding", "N", "conflicts", "elapsed_s", "mem_mb", "verdict"]

_FILE_RE = re.compile(r"fkp2013-(.+)-(E[23])-N(\d+)(-mutated)?\.smt2$")


class HarnessError(Exception):
    pass


@dataclass(frozen=True)
class SolverSpec:
    id: str
    cmd: str
    verdict: str
    conflicts: str | list[str] | None  # patterns tried in order
    memory_mb: str | None = None
    bv_bv_flags: str = ""


def load_solver_table(path: str | Path | None = None) -> dict[str, SolverSpec]:
    if path is None:
        text = resources.files("fkpbound").joinpath("data/solvers.json").read_text()
    else:
        text = Path(path).read_text()
    return {k: SolverSpec(id=k, **v) for k, v in json.loads(text).items()}


@dataclass(frozen=True)
class StatsRow:
    solver: str
    config: str
    encoding: str
    n: int
    conflicts: int | None
    elapsed_s: float | None
    mem_mb: float | None
    verdict: str  # unsat | sat | timeout | unknown

    def sort_key(self):
        return (self.solver, self.config, self.encoding, self.n)


def parse_suite_name(path: str | Path) -> tuple[str, str, int]:
    m = _FILE_RE.search(Path(path).name)
    if not m:
        return ("", "", 0)
    return m.group(1), m.group(2), int(m.group(3))


def _first(patterns: str | list[str] | None, text: str) -> str | None:
    if not patterns:
        return None
    for pattern in [patterns] if isinstance(patterns, str) else patterns:
        matches = re.findall(pattern, text, re.MULTILINE)
        if matches:
            return matches[-1]
    return None


def parse_output(spec: SolverSpec, text: str) -> tuple[str, int | None, float | None]:
    verdict = _first(spec.verdict, text) or "unknown"
    c = _first(spec.conflicts, text)
    m = _first(spec.memory_mb, text)
    return verdict, (int(c) if c is not None else None), (float(m) if m is not None else None)


def build_command(template: str, file: str | Path, flags: str = "") -> list[str]:
    if "{file}" not in template:
        raise HarnessError("solver command template needs a {file} placeholder")
    return shlex.split(template.format(file=shlex.quote(str(file)), flags=flags))


def _run_process(argv: list[str], timeout_s: float):
    """Run argv with output captured; returns (output, wall seconds, max rss MB, timed out)."""
    with tempfile.TemporaryFile() as out:
        t0 = time.perf_counter()
        try:
            proc = subprocess.Popen(argv, stdout=out, stderr=subprocess.STDOUT, start_new_session=True)
        except OSError as exc:
            raise HarnessError(f"cannot launch {argv[0]}: {exc}") from None
        timed_out = False
        while True:
            pid, status, usage = os.wait4(proc.pid, os.WNOHANG)
            if pid:
                break
            if time.perf_counter() - t0 > timeout_s:
                timed_out = True
                try:
                    os.killpg(proc.pid, signal.SIGKILL)
                except ProcessLookupError:
                    pass
                pid, status, usage = os.wait4(proc.pid, 0)
                break
            time.sleep(0.005)
        elapsed = time.perf_counter() - t0
        proc.returncode = os.waitstatus_to_exitcode(status)  # already reaped
        out.seek(0)
        text = out.read().decode(errors="replace")
    return text, elapsed, usage.ru_maxrss / 1024.0, timed_out


def run_external_solver(
    cmd_template: str,
    file: str | Path,
    timeout_s: float = 3600.0,
    spec: SolverSpec | None = None,
    archive_dir: str | Path | None = None,
) -> StatsRow:
    """Run one solver on one file.

    Unparsable statistics leave ``conflicts`` absent (never zero) and, when
    ``archive_dir`` is given, the raw output is kept there for inspection.
    """
    config, encoding, n = parse_suite_name(file)
    if spec is None:
        spec = SolverSpec(id=Path(shlex.split(cmd_template)[0]).name, cmd=cmd_template,
                          verdict=r"^(sat|unsat|unknown)\s*$", conflicts=None)
    flags = spec.bv_bv_flags if config == "bv-clocks-bv-val" else ""
    argv = build_command(cmd_template, file, flags)
    text, elapsed, rss_mb, timed_out = _run_process(argv, timeout_s)
    verdict, conflicts, mem = parse_output(spec, text)
    if timed_out:
        verdict = "timeout"
    if archive_dir is not None and (conflicts is None or verdict == "unknown"):
        Path(archive_dir).mkdir(parents=True, exist_ok=True)
        (Path(archive_dir) / f"{Path(file).stem}.{spec.id}.out").write_text(text)
    return StatsRow(spec.id, config, encoding, n, conflicts, round(elapsed, 3), round(mem if mem is not None else rss_mb, 2), verdict)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.3f}"
    return str(x)


def write_stats_csv(rows: Iterable[StatsRow], path: str | Path) -> None:
    rows = sorted(rows, key=StatsRow.sort_key)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.solver, r.config, r.encoding, r.n, _fmt(r.conflicts), _fmt(r.elapsed_s), _fmt(r.mem_mb), r.verdict])


def read_stats_csv(path: str | Path) -> list[StatsRow]:
    def num(s, f):
        return f(s) if s != "" else None

    with open(path, newline="") as fh:
        return [
            StatsRow(d["solver"], d["config"], d["encoding"], int(d["N"]), num(d["conflicts"], int),
                     num(d["elapsed_s"], float), num(d["mem_mb"], float), d["verdict"])
            for d in csv.DictReader(fh)
        ]


def run_suite(
    files: Sequence[str | Path],
    solvers: Sequence[SolverSpec],
    timeout_s: float = 3600.0,
    jobs: int = 1,
    archive_dir: str | Path | None = None,
) -> list[StatsRow]:
    tasks = [(s, f) for s in solvers for f in files]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(pool.map(lambda t: run_external_solver(t[0].cmd, t[1], timeout_s, t[0], archive_dir), tasks))
    return sorted(rows, key=StatsRow.sort_key)
