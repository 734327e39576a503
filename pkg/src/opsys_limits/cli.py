"""Command-line front end.

Every command reads JSON, writes a JSON report (stdout or ``--out``) and a
one-line summary on stderr, and exits with

    0  pass / Yes / Positive
    1  fail / No / NotPositive
    2  Unknown (including sampled checks that found no violation)
    3  malformed input
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass, field

from . import serialization as ser
from .errors import (
    DependentBasis,
    IncompatibleFamily,
    InputError,
    MissingUnit,
    NecessaryConditionFailed,
    NotAdjointClosed,
    NotInjective,
    NotUnital,
    OperatorSystemError,
)
from .indlimit import (
    DEFAULT_HORIZON,
    LimitStatus,
    induced_map,
    limit_eq,
    limit_positive,
    universal_map,
)
from .linalg import DEFAULT_EPS
from .nuclearity import minmax_nuclearity_evidence, tensor_limit_consistency
from .opsys import DEFAULT_LADDER, check_ladder, new_concrete
from .tensor import SearchBudget, TensorElement, max_certificate_search, min_positive
from .ucp import CpStatus, LinearMap, is_complete_order_mono, is_ucp
from .uhf import GammaRule, connecting_choi_report, uhf_sequence, verify_order_mono_injection

EXIT_PASS, EXIT_FAIL, EXIT_UNKNOWN, EXIT_INPUT = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    eps: float = DEFAULT_EPS
    ladder: list = field(default_factory=lambda: list(DEFAULT_LADDER))
    seed: int = 0
    depth: int | None = None
    level: int = 2
    samples: int = 100
    horizon: int | None = None
    gamma: list | None = None
    restarts: int = 50
    inputs: str | None = None
    output: str | None = None


@dataclass
class _Done:
    code: int
    report: dict
    summary: str


def _need_input(cfg: RunConfig):
    if not cfg.inputs:
        raise InputError("--in", "this command needs an input file")
    return ser.load(cfg.inputs)


def _systems(doc) -> dict:
    return ser.systems_from_json(ser._field(doc, "systems", ""), "systems")


def _system(doc, key: str, systems: dict):
    return ser._system_ref(doc, key, "", systems)


def _limit_code(status: LimitStatus) -> int:
    return {LimitStatus.YES: EXIT_PASS, LimitStatus.NO: EXIT_FAIL}.get(status, EXIT_UNKNOWN)


def _cp_code(status: CpStatus) -> int:
    if status is CpStatus.UCP:
        return EXIT_PASS
    if status is CpStatus.UNKNOWN_UP_TO_LEVEL:
        return EXIT_UNKNOWN
    return EXIT_FAIL


def cmd_validate_system(cfg: RunConfig) -> _Done:
    doc = _need_input(cfg)
    items = doc["systems"] if isinstance(doc, dict) and "systems" in doc else doc
    items = items if isinstance(items, list) else [items]
    base = "systems" if isinstance(doc, dict) and "systems" in doc else ""
    out, ok = [], True
    for i, item in enumerate(items):
        path = f"{base}[{i}]" if base or len(items) > 1 else "system"
        d = ser._int(item, "ambient_dim", path, 1)
        basis = [ser.matrix_from_json(b, f"{path}.basis[{j}]") for j, b in enumerate(ser._list(item, "basis", path))]
        name = item.get("name", "")
        try:
            S = new_concrete(d, basis, name, cfg.eps)
            out.append({"name": name, "valid": True, "ambient_dim": d, "dim": S.dim, "full_algebra": S.is_full_algebra})
        except (MissingUnit, DependentBasis, NotAdjointClosed) as exc:
            ok = False
            out.append({"name": name, "valid": False, "error": type(exc).__name__, "detail": str(exc)})
        except OperatorSystemError as exc:
            raise InputError(f"{path}.basis", str(exc)) from exc
    report = {"systems": out, "valid": ok}
    return _Done(EXIT_PASS if ok else EXIT_FAIL, report, f"{sum(s['valid'] for s in out)}/{len(out)} systems valid")


def _map_bundle(cfg: RunConfig) -> LinearMap:
    doc = _need_input(cfg)
    return ser.map_from_json(ser._field(doc, "map", ""), _systems(doc), "map")


def cmd_check_ucp(cfg: RunConfig) -> _Done:
    f = _map_bundle(cfg)
    v = is_ucp(f, cfg.level, cfg.samples, cfg.seed, cfg.eps)
    return _Done(_cp_code(v.status), ser.cp_verdict_to_json(v), f"check-ucp: {v.status.value}")


def cmd_check_order_mono(cfg: RunConfig) -> _Done:
    f = _map_bundle(cfg)
    try:
        v = is_complete_order_mono(f, cfg.level, cfg.samples, cfg.seed, cfg.eps)
    except NotInjective as exc:
        return _Done(EXIT_FAIL, {"status": "NotInjective", "detail": str(exc)}, "check-order-mono: NotInjective")
    return _Done(_cp_code(v.status), ser.cp_verdict_to_json(v), f"check-order-mono: {v.status.value}")


def _tensor_element(cfg: RunConfig):
    doc = _need_input(cfg)
    systems = _systems(doc)
    S, T = _system(doc, "left", systems), _system(doc, "right", systems)
    m = ser.matrix_from_json(ser._field(doc, "element", ""), "element")
    n, r = divmod(m.shape[0], S.ambient_dim * T.ambient_dim)
    if r or n < 1 or m.shape[0] != m.shape[1]:
        raise InputError("element", f"shape {m.shape} is not a level of {S.name} (x) {T.name}")
    try:
        u = TensorElement(S, T, n, m)
    except OperatorSystemError as exc:
        raise InputError("element", str(exc)) from exc
    return doc, u


def cmd_tensor_min(cfg: RunConfig) -> _Done:
    _, u = _tensor_element(cfg)
    v = min_positive(u, cfg.eps)
    code = EXIT_PASS if v.positive else EXIT_FAIL
    return _Done(code, {"level": u.level, **v.to_json()}, f"tensor-min: {v.status.value}")


def cmd_tensor_max_cert(cfg: RunConfig) -> _Done:
    doc, u = _tensor_element(cfg)
    if "certificate" in doc:
        cert = ser.certificate_from_json(doc["certificate"], "certificate")
        ok = cert.verify(u, cfg.eps)
        report = {"mode": "verify", "valid": ok, "residual": cert.residual(u), "certificate": cert.to_json()}
        return _Done(EXIT_PASS if ok else EXIT_FAIL, report, f"tensor-max-cert: certificate {'valid' if ok else 'invalid'}")
    budget = SearchBudget(restarts=cfg.restarts, seed=cfg.seed)
    try:
        cert = max_certificate_search(u, cfg.ladder, budget, tol=cfg.eps)
    except NecessaryConditionFailed as exc:
        return _Done(EXIT_FAIL, {"mode": "search", "status": "NotMinPositive", "detail": str(exc)}, "tensor-max-cert: not min-positive")
    if cert is None:
        return _Done(EXIT_UNKNOWN, {"mode": "search", "status": "Unknown", "certificate": None}, "tensor-max-cert: Unknown")
    fine = cert.epsilon <= min(cfg.ladder)
    report = {"mode": "search", "status": "Positive" if fine else "Unknown", "method": cert.method, "certificate": cert.to_json()}
    return _Done(EXIT_PASS if fine else EXIT_UNKNOWN, report, f"tensor-max-cert: epsilon {cert.epsilon:g}")


def _sequence(cfg: RunConfig, doc, key: str = "sequence"):
    return ser.sequence_from_json(ser._field(doc, key, ""), key, cfg.depth)


def _materialize(seq) -> _Done | None:
    try:
        seq.materialize(seq.depth)
    except (NotUnital, ValueError, OperatorSystemError) as exc:
        return _Done(EXIT_FAIL, {"valid": False, "error": type(exc).__name__, "detail": str(exc)}, f"sequence rejected: {exc}")
    return None


def cmd_limit_build(cfg: RunConfig) -> _Done:
    doc = _need_input(cfg)
    seq = ser.sequence_from_json(doc["sequence"] if isinstance(doc, dict) and "sequence" in doc else doc, "sequence", cfg.depth)
    bad = _materialize(seq)
    if bad:
        return bad
    stages = []
    for k in range(1, seq.depth + 1):
        S = seq.system(k)
        row = {"stage": k, "name": S.name, "ambient_dim": S.ambient_dim, "dim": S.dim}
        if k < seq.depth:
            row["connect"] = ser.cp_verdict_to_json(seq.certificate(k))
        stages.append(row)
    report = {"valid": True, "depth": seq.depth, "inclusion": seq.inclusion, "stages": stages}
    return _Done(EXIT_PASS, report, f"limit-build: {seq.depth} stages")


def _horizon(cfg: RunConfig, e) -> int:
    return e.stage + DEFAULT_HORIZON if cfg.horizon is None else cfg.horizon


def cmd_limit_eq(cfg: RunConfig) -> _Done:
    doc = _need_input(cfg)
    seq = _sequence(cfg, doc)
    e1 = ser.element_from_json(ser._field(doc, "e1", ""), "e1", seq)
    e2 = ser.element_from_json(ser._field(doc, "e2", ""), "e2", seq)
    if e1.level != e2.level:
        raise InputError("e2.rep", f"level {e2.level} differs from e1 level {e1.level}")
    horizon = max(e1.stage, e2.stage) + DEFAULT_HORIZON if cfg.horizon is None else cfg.horizon
    v = limit_eq(seq, e1, e2, horizon, cfg.eps)
    return _Done(_limit_code(v.status), v.to_json(), f"limit-eq: {v.status.value} at stage {v.stage_used}")


def cmd_limit_pos(cfg: RunConfig) -> _Done:
    doc = _need_input(cfg)
    seq = _sequence(cfg, doc)
    e = ser.element_from_json(ser._field(doc, "element", ""), "element", seq)
    v = limit_positive(seq, e, _horizon(cfg, e), cfg.ladder, cfg.eps)
    return _Done(_limit_code(v.status), v.to_json(), f"limit-pos: {v.status.value} at stage {v.stage_used}")


def _stage_maps(doc, key: str, seq, target_of) -> list[LinearMap]:
    out = []
    for i, m in enumerate(ser._list(doc, key, "")):
        out.append(ser._map_between(m, seq.system(i + 1), target_of(i + 1), f"{key}[{i}]"))
    return out


def cmd_universal_map(cfg: RunConfig) -> _Done:
    doc = _need_input(cfg)
    seq = _sequence(cfg, doc)
    target = ser.system_from_json(ser._field(doc, "target", ""), "target")
    psi = _stage_maps(doc, "psi", seq, lambda k: target)
    try:
        Psi = universal_map(seq, target, psi, tol=cfg.eps)
    except IncompatibleFamily as exc:
        report = {"compatible": False, "stage": exc.stage, "basis_index": exc.basis_index, "detail": str(exc)}
        return _Done(EXIT_FAIL, report, f"universal-map: incompatible at k = {exc.stage}")
    report = {"compatible": True, "depth": Psi.depth, "target": target.name}
    if "element" in doc:
        e = ser.element_from_json(doc["element"], "element", seq)
        report["image"] = ser.matrix_to_json(Psi(e))
    return _Done(EXIT_PASS, report, "universal-map: compatible")


def cmd_induced_map(cfg: RunConfig) -> _Done:
    doc = _need_input(cfg)
    seq_s = _sequence(cfg, doc, "source")
    seq_t = _sequence(cfg, doc, "target")
    pi = _stage_maps(doc, "pi", seq_s, seq_t.system)
    try:
        P = induced_map(seq_s, seq_t, pi, tol=cfg.eps)
    except IncompatibleFamily as exc:
        report = {"commutes": False, "stage": exc.stage, "basis_index": exc.basis_index, "detail": str(exc)}
        return _Done(EXIT_FAIL, report, f"induced-map: square fails at k = {exc.stage}")
    report = {"commutes": True, "depth": P.depth}
    if "element" in doc:
        report["image"] = ser.element_to_json(P(ser.element_from_json(doc["element"], "element", seq_s)))
    return _Done(EXIT_PASS, report, "induced-map: squares commute")


def cmd_nuclearity_report(cfg: RunConfig) -> _Done:
    doc = _need_input(cfg)
    n = 1 if "level" not in doc else ser._int(doc, "level", "", 1)
    if "sequence" in doc:
        seq = _sequence(cfg, doc)
        T = ser.system_from_json(ser._field(doc, "right", ""), "right")
        try:
            r = tensor_limit_consistency(seq, T, n, cfg.samples, cfg.seed, cfg.eps)
        except OperatorSystemError as exc:
            raise InputError("sequence", str(exc)) from exc
    else:
        systems = _systems(doc)
        S, T = _system(doc, "left", systems), _system(doc, "right", systems)
        budget = SearchBudget(restarts=cfg.restarts, seed=cfg.seed)
        r = minmax_nuclearity_evidence(S, T, n, cfg.samples, budget, cfg.seed, cfg.ladder, cfg.eps)
    if r.forward_pass < r.samples:
        code = EXIT_FAIL
    else:
        code = EXIT_UNKNOWN if r.unknowns else EXIT_PASS
    summary = f"nuclearity: forward {r.forward_pass}/{r.samples}, certificates {r.backward_found}, unknown {r.unknowns}"
    return _Done(code, r.to_json(), summary)


def cmd_uhf_demo(cfg: RunConfig) -> _Done:
    gamma, depth = cfg.gamma, cfg.depth
    if cfg.inputs:
        doc = ser.load(cfg.inputs)
        gamma = gamma or ser._list(doc, "gamma", "")
        depth = depth or ser._int(doc, "depth", "", 1)
    if not gamma:
        raise InputError("--gamma", "give --gamma or an input file with a gamma field")
    try:
        rule = GammaRule(tuple(gamma))
    except (TypeError, ValueError) as exc:
        raise InputError("gamma", str(exc)) from exc
    depth = depth or len(rule.gamma)
    try:
        seq = uhf_sequence(rule, depth)
    except OperatorSystemError as exc:
        raise InputError("depth", str(exc)) from exc
    choi = connecting_choi_report(seq)
    mono = verify_order_mono_injection(rule, depth, cfg.level, cfg.samples, cfg.seed)
    ok = mono.discrepancies == 0 and all(c["psd"] for c in choi)
    report = {
        "sizes": [seq.system(k).ambient_dim for k in range(1, depth + 1)],
        "choi": choi,
        "order_mono": mono.to_json(),
    }
    return _Done(EXIT_PASS if ok else EXIT_FAIL, report, f"uhf-demo: {mono.discrepancies} discrepancies")


COMMANDS = {
    "validate-system": (cmd_validate_system, "check that a basis spans an operator system"),
    "check-ucp": (cmd_check_ucp, "unitality and complete positivity of a map"),
    "check-order-mono": (cmd_check_order_mono, "sampled complete order monomorphism check"),
    "tensor-min": (cmd_tensor_min, "min-cone membership of a tensor element"),
    "tensor-max-cert": (cmd_tensor_max_cert, "search for or verify a max-cone certificate"),
    "limit-build": (cmd_limit_build, "materialize and certify an inductive sequence"),
    "limit-eq": (cmd_limit_eq, "equality of two elements of the limit"),
    "limit-pos": (cmd_limit_pos, "positivity of an element of the limit"),
    "universal-map": (cmd_universal_map, "check a compatible family into a fixed system"),
    "induced-map": (cmd_induced_map, "check a family of maps between two sequences"),
    "nuclearity-report": (cmd_nuclearity_report, "(min, max) nuclearity evidence"),
    "uhf-demo": (cmd_uhf_demo, "UHF sequence order-monomorphism demo"),
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    # argparse would exit 2, which here means Unknown
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="inputs", metavar="PATH", help="input JSON file")
    common.add_argument("--out", dest="output", metavar="PATH", help="write the JSON report here (default stdout)")
    common.add_argument("--eps", type=float, default=DEFAULT_EPS, help="numerical tolerance")
    common.add_argument("--ladder", type=_float_list, default=list(DEFAULT_LADDER), help="descending epsilon ladder")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--depth", type=int, default=None, help="number of stages to build")
    common.add_argument("--level", type=int, default=2, help="matrix level for sampled checks")
    common.add_argument("--samples", type=int, default=100)
    common.add_argument("--horizon", type=int, default=None, help="last stage searched by limit queries")
    common.add_argument("--gamma", type=_int_list, default=None, help="UHF multiplicities, e.g. 2,2,2")
    common.add_argument("--restarts", type=int, default=50, help="max-certificate search restarts")

    parser = _Parser(prog="opsys-limits", description="Finite-stage operator system computations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(**{k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__})
    if not cfg.eps >= 0:
        raise InputError("--eps", "must be nonnegative")
    try:
        cfg.ladder = list(check_ladder(cfg.ladder))
    except (ValueError, OperatorSystemError) as exc:
        raise InputError("--ladder", str(exc)) from exc
    for key in ("level", "samples", "depth", "horizon"):
        v = getattr(cfg, key)
        if v is not None and v < (0 if key == "samples" else 1):
            raise InputError(f"--{key}", "out of range")
    return cfg


def run(argv: list[str] | None = None) -> tuple[int, str]:
    """Parse ``argv``, run the command and return ``(exit code, JSON text)``.

    The report is also written to ``--out`` when given.
    """
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        cfg = _config(args)
        done = COMMANDS[cfg.command][0](cfg)
    except InputError as exc:
        done = _Done(EXIT_INPUT, {"error": "InputError", "path": exc.path, "detail": str(exc)}, f"input error: {exc}")
    except (OperatorSystemError, ValueError) as exc:
        done = _Done(EXIT_INPUT, {"error": type(exc).__name__, "detail": str(exc)}, f"input error: {exc}")
    report = {"command": args.command, "exit_code": done.code, "report": done.report}
    if cfg is not None:
        report["config"] = {k: v for k, v in asdict(cfg).items() if k not in ("command", "output")}
    text = ser.dumps(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(done.summary, file=sys.stderr)
    return done.code, text if not args.output else ""


def main(argv: list[str] | None = None) -> int:
    code, text = run(argv)
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
