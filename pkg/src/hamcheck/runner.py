"""Task execution and deterministic report assembly.

Tasks run in declaration order; independent tasks inside a declaration
segment may execute concurrently (capped by HAMCHECK_THREADS), but the
report is always assembled in declaration order.  Reports are built from
canonical renderings only, so identical inputs produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import __version__
from .brackets import (
    NotABivector,
    bivector_residual,
    certify_bivector,
    is_zero_trivector,
    magri_defects,
    poisson,
    schouten,
)
from .deform import MagriPrecondition, check_conserved, deform, lift_hierarchy
from .equivalence import (
    EquivalenceData,
    equivalence_residuals,
    equivalent_as_bivectors,
    transport,
)
from .frame import Frame, Ranking
from .ops import CDiffOp
from .parser import Direction, NameRef, Program, TaskDecl
from .poly import DiffPoly, VectorFunction, as_vector
from .render import op_text, poly_text, vector_text
from .systems import HamcheckError, make_system

OK = "ok"
FAIL = "fail"
RESIDUAL = "residual"


@dataclass
class TaskResult:
    index: int
    kind: str
    status: str
    detail: dict
    seconds: float


class RunContext:
    def __init__(self, program: Program):
        self.program = program
        self.frame = program.frame
        self.systems = {}
        self.operators = dict(program.operators)
        self.vectors = dict(program.vectors)
        self.equivalences = {}
        self.deformed = {}
        self.bivector_cache = {}
        self._build_systems()
        self._build_equivalences()

    def _build_systems(self):
        for name, decl in self.program.systems.items():
            frame = self.frame
            if decl["deps"] is not None:
                deps = decl["deps"]
                if tuple(self.frame.dependents[: len(deps)]) != tuple(deps):
                    raise HamcheckError(
                        f"equation {name!r}: restricted dependents must be an "
                        "initial segment of the declared dependents"
                    )
                frame = Frame(self.frame.independents, tuple(deps))
            ranking = Ranking.of(frame, *decl["ranking"])
            solved = [(jet, rhs) for jet, rhs, _tok in decl["solves"]]
            for jet, rhs in solved:
                used = {jet[0]} | rhs.deps()
                if any(d >= frame.m for d in used):
                    raise HamcheckError(
                        f"equation {name!r} mentions dependents outside its "
                        "restricted frame"
                    )
            originals = [
                DiffPoly.jet(frame.n, jet[0], jet[1]) - rhs for jet, rhs in solved
            ]
            depth = decl["passivity"] if decl["passivity"] is not None else 4
            self.systems[name] = make_system(
                frame, originals, solved, ranking, depth
            )

    def _build_equivalences(self):
        for name, decl in self.program.equivalences.items():
            self.equivalences[name] = EquivalenceData(
                self.systems[decl.system1],
                self.systems[decl.system2],
                decl.ops["alpha"],
                decl.ops["alpha'"],
                decl.ops["beta"],
                decl.ops["beta'"],
                decl.ops["s1"],
                decl.ops["s2"],
            )

    # -- argument resolution ------------------------------------------------

    def resolve(self, arg):
        if isinstance(arg, NameRef):
            for table in (self.deformed, self.systems, self.equivalences,
                          self.operators, self.vectors):
                if arg.name in table:
                    return table[arg.name]
            raise HamcheckError(f"{arg.name!r} has not been produced yet")
        return arg

    def need_system(self, value, what="system"):
        from .deform import DeformedSystem
        from .systems import EquationSystem

        if isinstance(value, DeformedSystem):
            return value.system
        if isinstance(value, EquationSystem):
            return value
        raise HamcheckError(f"expected a {what}, got {type(value).__name__}")

    def need_op(self, value):
        if isinstance(value, CDiffOp):
            return value
        raise HamcheckError(f"expected an operator, got {type(value).__name__}")

    def need_vector(self, value, system):
        if isinstance(value, CDiffOp):
            if (value.rows, value.cols) == (1, 1) and value.order() == 0:
                terms = value.entry_terms(0, 0)
                value = VectorFunction(
                    [terms[0][1] if terms else DiffPoly.zero(value.n)]
                )
            else:
                raise HamcheckError("expected a vector of densities, got an operator")
        value = as_vector(value)
        bad = set()
        for p in value:
            bad |= {d for d in p.deps() if d >= system.frame.m}
        if bad:
            raise HamcheckError("vector mentions dependents outside the system frame")
        return value

    def certified(self, system, op: CDiffOp):
        key = (
            id(system),
            op.rows,
            op.cols,
            tuple(
                (r, c, sigma, tuple(sorted(a.terms.items())))
                for (r, c, sigma), a in sorted(op.entries.items())
            ),
        )
        got = self.bivector_cache.get(key)
        if got is None:
            try:
                got = certify_bivector(system, op)
            except NotABivector as exc:
                raise HamcheckError(
                    "operator fails the bivector condition; residual "
                    + op_text(system.frame, exc.residual)
                ) from exc
            self.bivector_cache[key] = got
        return got


def _verdict_detail(frame, verdict) -> dict:
    out = {"zero": verdict.zero, "exact": verdict.exact}
    if not verdict.zero:
        vf = verdict.frame or frame
        out["residual_wrt"] = vf.dependents[verdict.residual_dep]
        out["residual"] = poly_text(vf, verdict.residual)
    return out


def run_task(ctx: RunContext, task: TaskDecl) -> TaskResult:
    t0 = time.perf_counter()
    kind = task.kind
    try:
        status, detail = _dispatch(ctx, task)
    except (HamcheckError, ValueError) as exc:
        status, detail = FAIL, {"error": str(exc)}
    return TaskResult(0, kind, status, detail, time.perf_counter() - t0)


def _args(task, count_min, count_max=None):
    count_max = count_max if count_max is not None else count_min
    if not (count_min <= len(task.args) <= count_max):
        raise HamcheckError(
            f"{task.kind} expects {count_min}"
            + (f"..{count_max}" if count_max != count_min else "")
            + f" arguments, got {len(task.args)}"
        )
    return task.args


def _dispatch(ctx: RunContext, task: TaskDecl):
    kind = task.kind
    if kind == "reduce":
        args = _args(task, 2)
        system = ctx.need_system(ctx.resolve(args[0]))
        vec = ctx.need_vector(ctx.resolve(args[1]), system)
        out = system.reduce_vector(vec)
        return OK, {"normal_form": vector_text(system.frame, out)}

    if kind == "symmetry":
        args = _args(task, 2)
        system = ctx.need_system(ctx.resolve(args[0]))
        vec = ctx.need_vector(ctx.resolve(args[1]), system)
        residual = system.symmetry_residual(vec)
        if residual.is_zero():
            return OK, {"symmetry": True}
        return FAIL, {"symmetry": False,
                      "residual": vector_text(system.frame, residual)}

    if kind == "genfn":
        args = _args(task, 2)
        system = ctx.need_system(ctx.resolve(args[0]))
        vec = ctx.need_vector(ctx.resolve(args[1]), system)
        residual = system.genfn_residual(vec)
        if residual.is_zero():
            return OK, {"genfn": True}
        return FAIL, {"genfn": False,
                      "residual": vector_text(system.frame, residual)}

    if kind == "bivector":
        args = _args(task, 2)
        system = ctx.need_system(ctx.resolve(args[0]))
        op = ctx.need_op(ctx.resolve(args[1]))
        residual = bivector_residual(system, op)
        if residual.is_zero():
            ctx.certified(system, op)
            return OK, {"bivector": True}
        return FAIL, {"bivector": False, "residual": op_text(system.frame, residual)}

    if kind == "schouten":
        args = _args(task, 3)
        system = ctx.need_system(ctx.resolve(args[0]))
        b1 = ctx.certified(system, ctx.need_op(ctx.resolve(args[1])))
        b2 = ctx.certified(system, ctx.need_op(ctx.resolve(args[2])))
        verdict = is_zero_trivector(system, schouten(system, b1, b2))
        detail = _verdict_detail(system.frame, verdict)
        return (OK if verdict.zero else RESIDUAL), detail

    if kind == "hamiltonian":
        args = _args(task, 2)
        system = ctx.need_system(ctx.resolve(args[0]))
        op = ctx.need_op(ctx.resolve(args[1]))
        residual = bivector_residual(system, op)
        if not residual.is_zero():
            return FAIL, {"bivector": False,
                          "residual": op_text(system.frame, residual)}
        biv = ctx.certified(system, op)
        verdict = is_zero_trivector(system, schouten(system, biv, biv))
        detail = {"bivector": True}
        detail.update(_verdict_detail(system.frame, verdict))
        return (OK if verdict.zero else RESIDUAL), detail

    if kind == "poisson":
        args = _args(task, 4)
        system = ctx.need_system(ctx.resolve(args[0]))
        biv = ctx.certified(system, ctx.need_op(ctx.resolve(args[1])))
        psi1 = ctx.need_vector(ctx.resolve(args[2]), system)
        psi2 = ctx.need_vector(ctx.resolve(args[3]), system)
        out = poisson(system, biv, psi1, psi2)
        return OK, {"bracket": vector_text(system.frame, out)}

    if kind == "magri":
        args = _args(task, 4, 64)
        system = ctx.need_system(ctx.resolve(args[0]))
        b1 = ctx.certified(system, ctx.need_op(ctx.resolve(args[1])))
        b2 = ctx.certified(system, ctx.need_op(ctx.resolve(args[2])))
        chain = [ctx.need_vector(ctx.resolve(a), system) for a in args[3:]]
        defects = magri_defects(system, b1, b2, chain)
        bad = [
            (i, vector_text(system.frame, d))
            for i, d in enumerate(defects)
            if not d.is_zero()
        ]
        if bad:
            return FAIL, {"magri": False, "defects": dict(bad)}
        return OK, {"magri": True, "pairs_checked": len(defects)}

    if kind == "equivalence":
        args = _args(task, 1)
        data = ctx.resolve(args[0])
        if not isinstance(data, EquivalenceData):
            raise HamcheckError("equivalence task needs an equivalence block name")
        residuals = equivalence_residuals(data)
        failing = {
            name: op_text(data.e2.frame, op)
            for name, op in residuals.items()
            if not op.is_zero()
        }
        if failing:
            return FAIL, {"relations": failing}
        return OK, {"relations": sorted(residuals)}

    if kind == "transport":
        args = _args(task, 3, 4)
        data = ctx.resolve(args[0])
        if not isinstance(data, EquivalenceData):
            raise HamcheckError("transport needs an equivalence block name")
        op = ctx.need_op(ctx.resolve(args[1]))
        direction = args[2]
        if not isinstance(direction, Direction):
            raise HamcheckError("transport direction must be 1->2 or 2->1")
        target = data.e2 if direction.text == "1->2" else data.e1
        source = data.e1 if direction.text == "1->2" else data.e2
        ctx.certified(source, op)
        moved = transport(data, op, direction.text)
        residual = bivector_residual(target, moved)
        detail = {"transported": op_text(target.frame, moved),
                  "recertified": residual.is_zero()}
        if not residual.is_zero():
            detail["residual"] = op_text(target.frame, residual)
            return FAIL, detail
        if len(args) == 4:
            other = ctx.need_op(ctx.resolve(args[3]))
            verdict = equivalent_as_bivectors(
                target, ctx.certified(target, moved), ctx.certified(target, other)
            )
            detail["comparison"] = _verdict_detail(target.frame, verdict)
            return (OK if verdict.zero else RESIDUAL), detail
        return OK, detail

    if kind == "deform":
        args = _args(task, 3)
        system = ctx.need_system(ctx.resolve(args[0]))
        b1 = ctx.certified(system, ctx.need_op(ctx.resolve(args[1])))
        b2 = ctx.certified(system, ctx.need_op(ctx.resolve(args[2])))
        deformed = deform(system, b1, b2)
        frame = deformed.system.frame
        detail = {
            "equations": vector_text(frame, deformed.system.originals),
            "block_operators_certified": True,
        }
        if task.alias:
            ctx.deformed[task.alias] = deformed
            ctx.systems[task.alias] = deformed.system
            ctx.operators[f"{task.alias}_A1"] = deformed.a1_til.op
            ctx.operators[f"{task.alias}_A2"] = deformed.a2_til.op
            detail["registered"] = [task.alias, f"{task.alias}_A1", f"{task.alias}_A2"]
        return OK, detail

    if kind == "lift":
        args = _args(task, 3, 64)
        deformed = ctx.resolve(args[0])
        from .deform import DeformedSystem

        if not isinstance(deformed, DeformedSystem):
            raise HamcheckError("lift needs the name of a deform task result")
        base = deformed.base
        vecs = [ctx.need_vector(ctx.resolve(a), base) for a in args[1:]]
        from .brackets import make_chain

        chain = make_chain(base, deformed.a1, deformed.a2, vecs)
        lifted = lift_hierarchy(deformed, chain)
        frame = deformed.system.frame
        detail = {
            "entries": [
                vector_text(frame, g.psi if hasattr(g, "psi") else g)
                for g in lifted.chain.entries
            ],
            "genfn_certified": [r.is_zero() for r in lifted.genfn_residuals],
            "magri_certified": [d.is_zero() for d in lifted.magri_defects],
        }
        conserved = []
        for a, b in zip(vecs, vecs[1:]):
            try:
                conserved.append(check_conserved(deformed, a, b))
            except MagriPrecondition:
                conserved.append(False)
        detail["conserved"] = conserved
        if lifted.all_certified and all(conserved):
            return OK, detail
        return FAIL, detail

    raise HamcheckError(f"unhandled task kind {kind!r}")


def _segments(tasks):
    """Split the task list at deform boundaries: later tasks may use them."""
    out = []
    current = []
    for task in tasks:
        current.append(task)
        if task.kind == "deform":
            out.append(current)
            current = []
    if current:
        out.append(current)
    return out


def run_program(program: Program, threads: int = None) -> list:
    """Execute all tasks; never aborts mid-suite, results in declaration order."""
    if threads is None:
        threads = int(os.environ.get("HAMCHECK_THREADS", "1") or "1")
    ctx = RunContext(program)
    results = []
    for segment in _segments(program.tasks):
        parallel = segment[:-1] if segment[-1].kind == "deform" else segment
        serial = segment[len(parallel):]
        if threads > 1 and len(parallel) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results.extend(pool.map(lambda t: run_task(ctx, t), parallel))
        else:
            for task in parallel:
                results.append(run_task(ctx, task))
        for task in serial:
            results.append(run_task(ctx, task))
    for i, r in enumerate(results):
        r.index = i
    return results


def build_report(program: Program, results, source_bytes: bytes,
                 with_timings: bool = False) -> dict:
    """Structured report; byte-deterministic unless timings are requested."""
    tasks = []
    counts = {OK: 0, FAIL: 0, RESIDUAL: 0}
    for r in results:
        counts[r.status] += 1
        entry = {"index": r.index, "kind": r.kind, "status": r.status,
                 "detail": r.detail}
        if with_timings:
            entry["seconds"] = round(r.seconds, 3)
        tasks.append(entry)
    return {
        "tool": "hamcheck",
        "version": __version__,
        "input_digest": "sha256:" + hashlib.sha256(source_bytes).hexdigest(),
        "tasks": tasks,
        "summary": counts,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def report_text(report: dict) -> str:
    lines = []
    for entry in report["tasks"]:
        lines.append(f"[{entry['index']:03d}] {entry['kind']:<12} {entry['status']}")
        for key, value in entry["detail"].items():
            lines.append(f"      {key}: {value}")
    s = report["summary"]
    lines.append(
        f"summary: {s[OK]} ok, {s[FAIL]} failed, {s[RESIDUAL]} with residuals"
    )
    return "\n".join(lines) + "\n"


def exit_code(results) -> int:
    return 0 if all(r.status == OK for r in results) else 1
