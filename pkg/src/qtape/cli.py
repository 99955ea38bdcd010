"""``qtape`` command line.

Exit status is 0 on success, 1 for usage errors and 2 when the circuit file
or a computation is rejected.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import fileformat
from .compile import Pipeline, default_pipeline, run_pipeline
from .errors import QTapeError
from .gradients import adaptive_fd_experiment, exact_excitation_cost, gradient, batch_jacobian
from .info import draw, specs
from .ir import GateKind
from .mitigation import (
    AFTER_EACH_GATE, InsertPolicy, NoisyDevice, learn_noise, noise_cost, noisy_provider,
    unitary_folding, zne,
)
from .sim import Device, equal_up_to_phase, statevector

USAGE_ERROR = 1
RUNTIME_ERROR = 2

_NOISE = {"depolarizing": GateKind.DepolarizingChannel, "amplitude": GateKind.AmplitudeDamping}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


# -- formatting ------------------------------------------------------------------

def fmt(v: float) -> str:
    """Eight significant digits, shortest form, always with a decimal point."""
    v = float(v)
    if v == 0:
        return "0.0"
    if abs(v) < 1e-4 or abs(v) >= 1e8:
        return np.format_float_scientific(v, precision=7, unique=True, trim="0")
    return np.format_float_positional(v, precision=8, unique=True, fractional=False, trim="0")


def fmt_vector(values) -> str:
    return "[" + ", ".join(fmt(v) for v in np.ravel(values)) + "]"


def fmt_matrix(rows) -> str:
    return "[" + ", ".join(fmt_vector(r) for r in np.atleast_2d(rows)) + "]"


# -- argument helpers ----------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _shot_batches(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected SHOTS,BATCHES")
    try:
        return [(int(parts[0]), int(parts[1]))]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shot batches {text!r}") from None


def _noise(text: str) -> InsertPolicy:
    name, _, value = text.partition(":")
    if name not in _NOISE or not value:
        raise argparse.ArgumentTypeError("expected depolarizing:P or amplitude:G")
    try:
        strength = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad noise strength {value!r}") from None
    return InsertPolicy(_NOISE[name], strength, AFTER_EACH_GATE)


def _inputs(args, tape) -> list[float]:
    values = list(args.inputs or [])
    if len(values) != tape.num_inputs:
        raise UsageError(f"circuit takes {tape.num_inputs} inputs, got {len(values)} (use --inputs)")
    return values


def _device(args, tape, backend=None) -> Device:
    shots = None
    if getattr(args, "shots", None) is not None:
        shots = args.shots
    if getattr(args, "shot_batches", None) is not None:
        shots = args.shot_batches
    return Device(tape.num_wires, backend or args.backend, shots=shots, seed=getattr(args, "seed", None))


def _add_inputs(p, required=False):
    p.add_argument("--inputs", type=_floats, default=[], required=required,
                   help="comma-separated input values")


def _add_device(p, backend="sv"):
    p.add_argument("--backend", choices=["sv", "dm", "statevector", "density_matrix"], default=backend)
    shots = p.add_mutually_exclusive_group()
    shots.add_argument("--shots", type=int, help="shots per execution (default exact)")
    shots.add_argument("--shot-batches", type=_shot_batches, metavar="S,B",
                       help="B batches of S shots each")
    p.add_argument("--seed", type=int, help="seed for shot sampling")


# -- commands --------------------------------------------------------------------------

def cmd_run(args, out):
    tape = fileformat.load_circuit(args.file)
    result = _device(args, tape).execute(tape, _inputs(args, tape))
    if np.ndim(result) == 2:
        for row in result:
            print(fmt_vector(row), file=out)
    else:
        print(fmt_vector(result), file=out)


def cmd_grad(args, out):
    tape = fileformat.load_circuit(args.file)
    if args.shot_batches is not None:
        raise UsageError("grad does not support --shot-batches")
    g = gradient(_device(args, tape), tape, _inputs(args, tape), args.method, args.h)
    print(f"value: {fmt_vector(g.value)}", file=out)
    print(f"jacobian: {fmt_matrix(g.jacobian)}", file=out)
    print(f"executions: {g.executions_used}", file=out)


def cmd_compile(args, out):
    tape = fileformat.load_circuit(args.file)
    pipeline = Pipeline.parse(args.pipeline) if args.pipeline else default_pipeline()
    compiled = run_pipeline(pipeline, tape)
    if args.verify:
        if tape.has_channels:
            raise UsageError("--verify needs a channel-free circuit")
        points = [args.inputs] if args.inputs else list(
            np.random.default_rng(0).uniform(-np.pi, np.pi, (3, tape.num_inputs))
        )
        if args.inputs:
            _inputs(args, tape)
        ok = all(equal_up_to_phase(statevector(tape, p), statevector(compiled, p)) for p in points)
        print(f"verify: {'ok' if ok else 'FAILED'}", file=sys.stderr)
        if not ok:
            raise QTapeError("compiled circuit is not equivalent to the original")
    text = fileformat.serialize_circuit(compiled)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)


def cmd_zne(args, out):
    tape = fileformat.load_circuit(args.file)
    inputs = _inputs(args, tape)
    base = _device(args, tape, backend="dm")
    device = NoisyDevice(base, args.noise) if args.noise else base
    batch = zne(tape, unitary_folding, args.scales)
    results = device.execute_batch(batch.tapes, inputs)
    for scale, r in zip(args.scales, results):
        print(f"scale {fmt(scale)}: {fmt_vector(r)}", file=out)
    print(f"mitigated: {fmt_vector(batch.postprocess(results))}", file=out)
    if args.grad:
        _, jac = batch_jacobian(device, batch, inputs)
        print(f"jacobian: {fmt_matrix(jac)}", file=out)


def cmd_learn_noise(args, out):
    tape = fileformat.load_circuit(args.file)
    inputs = _inputs(args, tape)
    for name in ("true", "init"):
        if len(getattr(args, name)) != tape.num_wires:
            raise UsageError(f"--{name} needs one value per wire ({tape.num_wires})")
    source = noisy_provider(tape, inputs, args.true, shots=args.shots or None, seed=args.seed)
    last = []

    def provider():
        last[:] = [source()]
        return last[0]

    learned = learn_noise(tape, inputs, provider, args.init, args.iters, args.stepsize)
    print(f"learned: {fmt_vector(learned)}", file=out)
    print(f"final cost: {fmt(noise_cost(tape, inputs, learned, last[0]) if last else 0.0)}", file=out)


def cmd_draw(args, out):
    tape = fileformat.load_circuit(args.file)
    print(draw(tape, _inputs(args, tape)), file=out)


def cmd_specs(args, out):
    tape = fileformat.load_circuit(args.file)
    for line in specs(tape, args.expand_rot).lines():
        print(line, file=out)


def cmd_adaptive_fd(args, out):
    trace = adaptive_fd_experiment(args.seed, args.iters, adapt_h=not args.fixed_h, h0=args.h0)
    print("iteration,h,cost,x", file=out)
    for i, (h, cost, x) in enumerate(zip(trace.h, trace.cost, trace.x)):
        print(f"{i},{fmt(h)},{fmt(cost)},{fmt(x)}", file=out)
    print(f"# final exact cost: {fmt(exact_excitation_cost(trace.final_x))}", file=out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qtape", description="Run, differentiate and compile circuit files.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="execute a circuit")
    p.add_argument("file")
    _add_inputs(p)
    _add_device(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grad", help="value and Jacobian")
    p.add_argument("file")
    _add_inputs(p)
    p.add_argument("--method", choices=["shift", "fd"], default="shift")
    p.add_argument("--h", type=float, default=1e-7, help="finite-difference step")
    _add_device(p)
    p.set_defaults(func=cmd_grad)

    p = sub.add_parser("compile", help="apply a pass pipeline and write the result")
    p.add_argument("file")
    p.add_argument("--pipeline", help="comma-separated passes, e.g. commute_controlled:left,single_qubit_fusion")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.add_argument("--verify", action="store_true", help="check statevectors agree up to global phase")
    _add_inputs(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("zne", help="zero-noise extrapolation by unitary folding")
    p.add_argument("file")
    _add_inputs(p)
    p.add_argument("--scales", type=_floats, default=[1.0, 3.0, 5.0])
    p.add_argument("--noise", type=_noise, help="depolarizing:P or amplitude:G after each gate")
    p.add_argument("--grad", action="store_true", help="also print the mitigated Jacobian")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_zne)

    p = sub.add_parser("learn-noise", help="fit per-wire depolarizing strengths")
    p.add_argument("file")
    _add_inputs(p)
    p.add_argument("--true", type=_floats, required=True, help="strengths of the simulated hardware")
    p.add_argument("--init", type=_floats, required=True, help="initial guess")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--stepsize", type=float, default=0.05)
    p.add_argument("--shots", type=int, default=10000, help="0 for exact observations")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_learn_noise)

    p = sub.add_parser("draw", help="text drawing")
    p.add_argument("file")
    _add_inputs(p)
    p.set_defaults(func=cmd_draw)

    p = sub.add_parser("specs", help="resource summary")
    p.add_argument("file")
    p.add_argument("--expand-rot", action="store_true", help="count Rot as three layers of depth")
    p.set_defaults(func=cmd_specs)

    p = sub.add_parser("adaptive-fd", help="trace of the adaptive finite-difference experiment")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--fixed-h", action="store_true", help="keep the step at --h0")
    p.add_argument("--h0", type=float, default=1e-7)
    p.set_defaults(func=cmd_adaptive_fd)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args, out)
    except UsageError as exc:
        print(f"qtape: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (QTapeError, ValueError, IndexError, OSError) as exc:
        print(f"qtape: error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
