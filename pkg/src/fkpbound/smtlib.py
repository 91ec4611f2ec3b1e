"""SMT-LIB 2 emission of encoded instances and benchmark-suite generation."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .encoder import EncodedInstance, Encoding, encode
from .logic import Literal, Op, Sort, Var
from .program import build_fkp

CONFIG_NAMES = ("real-clocks-int-val", "real-clocks-bv-val", "bv-clocks-int-val", "bv-clocks-bv-val")


class EmitError(Exception):
    pass


def min_bitwidth(n: int) -> int:
    """Fewest bits that hold every value 0..n+1 and the clock ranks."""
    need = max(2 * n + 4, n + 2)
    return max(1, math.ceil(math.log2(need)))


def default_bitwidth(n: int) -> int:
    return max(8, min_bitwidth(n))


@dataclass(frozen=True)
class TheoryConfig:
    """Sorts for one benchmark configuration; selections share the clock sort."""

    name: str
    clock_sort: str  # "Real" or "BV"
    val_sort: str  # "Int" or "BV"
    bitwidth: int | None = None

    @classmethod
    def named(cls, name: str, bitwidth: int | None = None) -> "TheoryConfig":
        m = re.fullmatch(r"(real|bv)-clocks-(int|bv)-val", name)
        if not m:
            raise ValueError(f"unknown configuration {name!r}; expected one of {', '.join(CONFIG_NAMES)}")
        clock = "Real" if m.group(1) == "real" else "BV"
        val = "Int" if m.group(2) == "int" else "BV"
        uses_bv = "BV" in (clock, val)
        return cls(name, clock, val, bitwidth if uses_bv else None)

    @property
    def sel_sort(self) -> str:
        return self.clock_sort

    @property
    def logic(self) -> str | None:
        if self.clock_sort == "Real" and self.val_sort == "Int":
            return "QF_LIRA"
        if self.clock_sort == "BV" and self.val_sort == "BV":
            return "QF_BV"
        return None  # mixed bit-vector/arithmetic has no standard logic name


def _name(p, v: Var) -> str:
    return f"{v.kind}_{p.name(v.event)}"


class _Emitter:
    def __init__(self, inst: EncodedInstance, cfg: TheoryConfig, opt_wsel: bool):
        self.inst = inst
        self.p = inst.structure
        self.cfg = cfg
        self.opt_wsel = opt_wsel
        self.width = cfg.bitwidth
        if "BV" in (cfg.clock_sort, cfg.val_sort):
            need = min_bitwidth(inst.n)
            if self.width is None:
                self.width = default_bitwidth(inst.n)
            if self.width < need:
                raise EmitError(f"bit-width {self.width} is too small for N={inst.n}; need at least {need}")
        # numerals standing in for write selections when they are optimized out
        self.wsel_const = {w.id: k for k, w in enumerate(self.p.writes)}

    def sort_decl(self, sort: str) -> str:
        return f"(_ BitVec {self.width})" if sort == "BV" else sort

    def sort_of(self, v: Var) -> str:
        if v.sort is Sort.CLOCK:
            return self.cfg.clock_sort
        if v.sort is Sort.SEL:
            return self.cfg.sel_sort
        return self.cfg.val_sort

    def numeral(self, k: int, sort: str) -> str:
        if sort == "BV":
            return f"(_ bv{k} {self.width})"
        if sort == "Real":
            return f"{k}.0"
        return str(k)

    def term(self, v: Var) -> str:
        if self.opt_wsel and v.kind == "wsel":
            return self.numeral(self.wsel_const[v.event], self.cfg.sel_sort)
        return _name(self.p, v)

    def atom(self, lit: Literal) -> str:
        at = lit.atom
        a = [self.term(v) for v in at.args]
        if at.op is Op.LT:
            s = f"(bvult {a[0]} {a[1]})" if self.cfg.clock_sort == "BV" else f"(< {a[0]} {a[1]})"
        elif at.op in (Op.CEQ, Op.SEQ):
            s = f"(= {a[0]} {a[1]})"
        else:
            vs = self.cfg.val_sort
            if at.op is Op.VZERO:
                s = f"(= {a[0]} {self.numeral(0, vs)})"
            elif at.op is Op.VSUCC:
                add = "bvadd" if vs == "BV" else "+"
                s = f"(= ({add} {a[0]} {self.numeral(1, vs)}) {a[1]})"
            else:
                gt = "bvugt" if vs == "BV" else ">"
                s = f"({gt} {a[0]} {self.numeral(at.const, vs)})"
        return s if lit.positive else f"(not {s})"

    def variables(self) -> list[Var]:
        vs = {v for a in self.inst.amap.atoms for v in a.args}
        if self.opt_wsel:
            vs = {v for v in vs if v.kind != "wsel"}
        return sorted(vs, key=lambda v: v.key)

    def emit(self) -> str:
        inst, p = self.inst, self.p
        status = "sat" if p.bound < p.n else "unsat"
        out = [
            f"; fkp2013 N={inst.n} encoding={inst.encoding.value} config={self.cfg.name} "
            f"bound={p.bound} opt-wsel={int(self.opt_wsel)}"
            + (f" bitwidth={self.width}" if self.width else ""),
            "(set-info :smt-lib-version 2.6)",
            f"(set-info :status {status})",
        ]
        if self.cfg.logic:
            out.append(f"(set-logic {self.cfg.logic})")
        for v in self.variables():
            out.append(f"(declare-fun {_name(p, v)} () {self.sort_decl(self.sort_of(v))})")
        for clause, fam in zip(inst.clauses, inst.family_of):
            lits = sorted(clause, key=lambda l: l.key)
            body = [self.atom(l) for l in lits]
            expr = body[0] if len(body) == 1 else "(or " + " ".join(body) + ")"
            out.append(f"(assert {expr})")
        out += ["(check-sat)", "(exit)"]
        return "\n".join(out) + "\n"


def emit_smtlib(inst: EncodedInstance, cfg: TheoryConfig, opt_wsel: bool = False) -> str:
    return _Emitter(inst, cfg, opt_wsel).emit()


def suite_filename(config: str, encoding: Encoding, n: int, mutated: bool = False) -> str:
    return f"fkp2013-{config}-{encoding.value}-N{n}{'-mutated' if mutated else ''}.smt2"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def generate_suite(
    out_dir: str | Path,
    n_min: int = 3,
    n_max: int = 9,
    configs: Iterable[str] = CONFIG_NAMES,
    encodings: Iterable[Encoding | str] = (Encoding.CUBIC, Encoding.QUADRATIC),
    bitwidth: int | None = None,
    opt_wsel: bool = False,
    mutate_bound: bool = False,
) -> dict:
    """Write one file per (config, encoding, N) and a manifest.json with content hashes.

    With ``mutate_bound`` the assertion bound is N-1, which the program can
    violate, so every file is expected satisfiable.
    """
    if n_min < 1 or n_max < n_min:
        raise ValueError(f"bad N range [{n_min}, {n_max}]")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    configs = list(configs)
    encodings = [Encoding.parse(e) for e in encodings]
    entries = []
    errors = []
    for n in range(n_min, n_max + 1):
        p = build_fkp(n)
        if mutate_bound:
            p = p.with_bound(n - 1)
        for enc in encodings:
            inst = encode(p, enc)
            for name in configs:
                cfg = TheoryConfig.named(name, bitwidth)
                fname = suite_filename(name, enc, n, mutate_bound)
                text = emit_smtlib(inst, cfg, opt_wsel)
                try:
                    (out / fname).write_text(text)
                except OSError as exc:
                    errors.append(f"{fname}: {exc}")
                    continue
                entries.append({
                    "file": fname,
                    "config": name,
                    "encoding": enc.value,
                    "n": n,
                    "bound": p.bound,
                    "expected": "sat" if mutate_bound else "unsat",
                    "sha256": sha256_text(text),
                })
    entries.sort(key=lambda e: e["file"])
    manifest = {"files": entries, "opt_wsel": opt_wsel, "bitwidth": bitwidth}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if errors:
        raise OSError("; ".join(errors))
    return manifest


_HEADER = re.compile(
    r"^; fkp2013 N=(\d+) encoding=(E2|E3) config=(\S+) bound=(-?\d+) opt-wsel=([01])(?: bitwidth=(\d+))?$"
)


@dataclass(frozen=True)
class SuiteHeader:
    n: int
    encoding: Encoding
    config: TheoryConfig
    bound: int
    opt_wsel: bool


def read_header(text: str) -> SuiteHeader:
    first = text.split("\n", 1)[0]
    m = _HEADER.match(first)
    if not m:
        raise EmitError("not a file written by this tool (missing fkp2013 header)")
    n, enc, cfg, bound, opt, width = m.groups()
    return SuiteHeader(int(n), Encoding.parse(enc), TheoryConfig.named(cfg, int(width) if width else None), int(bound), opt == "1")


def read_internal(path: str | Path) -> EncodedInstance:
    """Rebuild the instance a suite file was emitted from.

    The file is re-emitted from its header and must match byte for byte, so
    a hand-edited file is rejected rather than silently reinterpreted.
    """
    text = Path(path).read_text()
    h = read_header(text)
    inst = encode(build_fkp(h.n).with_bound(h.bound), h.encoding)
    if emit_smtlib(inst, h.config, h.opt_wsel) != text:
        raise EmitError(f"{path}: contents differ from the encoding named in its header")
    return inst
