"""Command-line frontend: train, predict, evaluate, bench.

Thin shell over the library: every number it prints is computed by the same
functions the API exposes. Exit codes: 0 success, 2 usage, 3 data problems,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .bench import run_sweep, write_csv
from .dataio import fmt, load_libsvm, load_model_file, save_model_file
from .errors import DataError, NumericError
from .evaluation import evaluate_model
from .objectives import predict
from .types import Algo, KernelSpec, Solver, Task, TrainConfig
from . import train


def _json_str(obj) -> str:
    """JSON with floats at 17 significant digits (exact round trip)."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        inner = ", ".join(f"{json.dumps(k)}: {_json_str(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_str(v) for v in obj) + "]"
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--task", choices=[t.value for t in Task], default="cls")
    p.add_argument("--solver", choices=[s.value for s in Solver], default="lin")
    p.add_argument("--algo", choices=[a.value for a in Algo], default="em")
    reg = p.add_mutually_exclusive_group()
    reg.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="regularizer weight (default 1.0)")
    reg.add_argument("--C", dest="c_value", type=float, default=None,
                     help="SVM-style cost; mapped to lambda = 2/C")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--kernel", choices=["gaussian"], default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=0.001)
    p.add_argument("--burn-in", type=int, default=10)
    p.add_argument("--gamma-floor", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-bias", action="store_true")
    p.add_argument("--mc-best-sample", action="store_true",
                   help="MC keeps the best-objective sample instead of averaging")


def _resolve_lambda(args) -> float:
    if args.lam is not None:
        return args.lam
    if args.c_value is not None:
        if args.c_value <= 0:
            raise ValueError("--C must be positive")
        return 2.0 / args.c_value
    return 1.0


def _build_config(args, parser) -> TrainConfig:
    solver = Solver(args.solver)
    kernel = None
    if solver is Solver.KRN:
        if args.sigma is None:
            parser.error("--solver krn needs --kernel gaussian --sigma F")
        kernel = KernelSpec(kind=args.kernel or "gaussian", sigma=args.sigma)
    return TrainConfig(
        task=Task(args.task), solver=solver, algo=Algo(args.algo),
        lam=_resolve_lambda(args), epsilon=args.epsilon, kernel=kernel,
        workers=args.workers, max_iters=args.max_iters, tol_scale=args.tol,
        burn_in=args.burn_in, gamma_floor=args.gamma_floor, seed=args.seed,
        add_bias=not args.no_bias, mc_best_sample=args.mc_best_sample)


def cmd_train(args, parser) -> int:
    config = _build_config(args, parser)
    data = load_libsvm(args.data, config.task, add_bias=config.add_bias,
                       dim=args.dim)
    t0 = time.perf_counter()
    model, trace = train(data, config, with_timing=args.timing is not None)
    seconds = time.perf_counter() - t0
    save_model_file(model, args.output)
    if args.timing:
        with open(args.timing, "w", encoding="utf-8") as fh:
            trace.timing.write_csv(fh)
    payload = {
        "objective": trace.objectives[-1],
        "iterations": trace.iterations,
        "stop_reason": trace.stop_reason,
        "train_seconds": seconds,
        "model_path": str(args.output),
    }
    if args.json:
        print(_json_str(payload))
    else:
        print(f"objective {fmt(trace.objectives[-1])}")
        print(f"iterations {trace.iterations}")
        print(f"stop_reason {trace.stop_reason}")
    return 0


def _load_for_model(model, path, task: Task, num_classes=None):
    raw_dim = model.dim - (1 if model.has_bias else 0)
    return load_libsvm(path, task, add_bias=model.has_bias, dim=raw_dim,
                       num_classes=num_classes)


def cmd_predict(args, _parser) -> int:
    model = load_model_file(args.model)
    # labels are ignored for prediction, so parse them as unrestricted reals
    data = _load_for_model(model, args.data, Task.SVR)
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for row in data.rows():
            value = predict(model, row)
            if model.task is Task.SVR:
                out.write(fmt(value) + "\n")
            elif model.task is Task.MLT:
                out.write(f"{int(value)}\n")
            else:
                out.write("+1\n" if value > 0 else "-1\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_evaluate(args, _parser) -> int:
    model = load_model_file(args.model)
    data = _load_for_model(model, args.data, model.task,
                           num_classes=model.num_classes)
    report = evaluate_model(model, data)
    if args.json:
        print(_json_str(report.to_dict()))
    else:
        for key, val in report.to_dict().items():
            if isinstance(val, float):
                val = fmt(val)
            print(f"{key} {val}")
    return 0


def cmd_bench(args, parser) -> int:
    try:
        values = [int(v) for v in args.values.split(",") if v]
    except ValueError:
        parser.error(f"--values must be comma-separated integers, got {args.values!r}")
    rows = run_sweep(
        args.sweep, values, task=Task(args.task), solver=Solver(args.solver),
        algo=Algo(args.algo), n=args.n, k=args.k, classes=args.classes,
        workers=args.workers, lam=_resolve_lambda(args), iters=args.iters,
        seed=args.seed, density=args.density,
        sigma=args.sigma if args.sigma is not None else 1.0,
        data_path=args.data)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="augsvm",
        description="SVM training by data augmentation (EM and Gibbs solvers)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a libsvm file")
    _add_config_flags(p_train)
    p_train.add_argument("--dim", type=int, default=None,
                         help="declared raw feature count (else max index)")
    p_train.add_argument("--timing", metavar="PATH", default=None,
                         help="write per-phase timing CSV here")
    p_train.add_argument("--json", action="store_true")
    p_train.add_argument("data", help="training data, libsvm format")
    p_train.add_argument("-o", "--output", required=True, help="model file path")

    p_pred = sub.add_parser("predict", help="predict labels for a feature file")
    p_pred.add_argument("model")
    p_pred.add_argument("data")
    p_pred.add_argument("-o", "--output", default=None,
                        help="write predictions here (default stdout)")

    p_eval = sub.add_parser("evaluate", help="metrics of a model on labeled data")
    p_eval.add_argument("model")
    p_eval.add_argument("data")
    p_eval.add_argument("--json", action="store_true")

    p_bench = sub.add_parser("bench", help="scaling sweeps on synthetic data")
    _add_config_flags(p_bench)
    p_bench.add_argument("--sweep", choices=["p", "n", "k"], required=True)
    p_bench.add_argument("--values", required=True,
                         help="comma-separated sweep values, e.g. 1,2,4,8")
    p_bench.add_argument("--n", type=int, default=2000)
    p_bench.add_argument("--k", type=int, default=32)
    p_bench.add_argument("--classes", type=int, default=3)
    p_bench.add_argument("--density", type=float, default=1.0)
    p_bench.add_argument("--iters", type=int, default=6)
    p_bench.add_argument("--data", default=None,
                         help="dataset path (p sweeps only; otherwise synthetic)")
    p_bench.add_argument("--out", default=None, help="CSV path (default stdout)")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"train": cmd_train, "predict": cmd_predict,
                "evaluate": cmd_evaluate, "bench": cmd_bench}
    try:
        return handlers[args.command](args, parser)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
