"""Command-line front end: ``funcband {simulate,forecast,study,evaluate}``.

Every command writes a JSON echo of its fully resolved configuration next to
its output.  Passing that file back through ``--config`` reproduces the run;
flags given explicitly on the command line override values from the file.
"""

import argparse
import json
import os
import sys
import traceback

from .bands import pointwise_band, simultaneous_band, write_band_csv
from .bootstrap import BootstrapConfig, default_threads, run
from .curves import read_csv, write_csv
from .errors import FuncbandError, ReplicateFailureError
from .evaluation import conditional_mse
from .predictors import KINDS, PredictorSpec
from .sim import CASES, L_MODES, DgpConfig, StudyConfig, case_config, expanding_window_eval, rolling_study, simulate_farma, stderr_progress

__all__ = ["main", "build_parser", "resolve_config"]

EXIT_ERROR = 1
EXIT_REPLICATES = 3


def _add_bootstrap_flags(cmd):
    group = cmd.add_argument_group("bootstrap")
    group.add_argument("--seed", type=int, help="master seed (default 0)")
    group.add_argument("--bootstrap-reps", type=int, dest="B", help="bootstrap replicates B (default 500)")
    group.add_argument("--m", type=int, help="number of principal components (default: variance-ratio rule)")
    group.add_argument("--q", type=float, dest="Q", help="variance-ratio threshold (default 0.85)")
    group.add_argument("--p", type=int, help="VAR order (default: AICC selection)")
    group.add_argument("--p-max", type=int, dest="p_max", help="largest VAR order tried by AICC")
    group.add_argument("--k", type=int, help="number of terminal curves held fixed (default: predictor depth)")
    group.add_argument("--interval", type=float, nargs=2, metavar=("START", "STOP"), dest="band_interval",
                   help="sub-interval of [0, 1] for the bands")
    group.add_argument("--var-method", choices=("ols", "yule-walker"), dest="var_method")
    group.add_argument("--predictor", choices=KINDS, help="predictor kind (default far1)")
    group.add_argument("--threads", type=int, help="worker threads (default: $FUNCBAND_THREADS or CPU count)")
    group.add_argument("--alpha", type=float, action="append", help="miss level; repeatable (default 0.2 and 0.05)")
    group.add_argument("--horizon", type=int, action="append", help="forecast horizon; repeatable (default 1)")


def _add_dgp_flags(cmd):
    group = cmd.add_argument_group("simulation")
    group.add_argument("--case", type=str.upper, choices=sorted(CASES), help="simulated case (default I)")
    group.add_argument("--n", type=int, help="sample size (default 200)")
    group.add_argument("--grid-points", type=int, dest="J", help="grid points per curve (default 21)")
    group.add_argument("--l-mode", choices=L_MODES, dest="l_mode",
                   help="Brownian increment variance 1/(L-1) with L=J (grid) or L=n+1 (sample)")
    group.add_argument("--burn-in", type=int, dest="burn_in", help="discarded initial curves (default 100)")


def build_parser():
    parser = argparse.ArgumentParser(prog="funcband", description="Bootstrap prediction bands for functional time series.")
    sub = parser.add_subparsers(dest="command", required=True)

    cmd = sub.add_parser("simulate", help="simulate a FAR/FARMA series to a curve CSV")
    _add_dgp_flags(cmd)
    cmd.add_argument("--seed", type=int, help="seed (default 0)")
    cmd.add_argument("--output", required=True, help="curve CSV to write")
    cmd.add_argument("--config", help="JSON config echo to start from")

    cmd = sub.add_parser("forecast", help="bootstrap prediction bands for the next curves of a series")
    cmd.add_argument("--input", help="curve CSV")
    cmd.add_argument("--output", required=True, help="directory for band files")
    cmd.add_argument("--bands", choices=("both", "simultaneous", "pointwise"), help="which bands to write (default both)")
    _add_bootstrap_flags(cmd)
    cmd.add_argument("--config", help="JSON config echo to start from")

    cmd = sub.add_parser("study", help="Monte Carlo coverage study on a simulated case")
    _add_dgp_flags(cmd)
    _add_bootstrap_flags(cmd)
    cmd.add_argument("--replications", type=int, dest="R", help="Monte Carlo replications (default 200)")
    cmd.add_argument("--train-fraction", type=float, dest="train_fraction", help="initial window fraction (default 0.8)")
    cmd.add_argument("--output", required=True, help="report CSV to write")
    cmd.add_argument("--quiet", action="store_true", help="no progress on standard error")
    cmd.add_argument("--config", help="JSON config echo to start from")

    cmd = sub.add_parser("evaluate", help="expanding-window evaluation of bands on a curve CSV")
    cmd.add_argument("--input", help="curve CSV")
    cmd.add_argument("--output", required=True, help="report CSV to write")
    cmd.add_argument("--train-fraction", type=float, dest="train_fraction", help="initial window fraction (default 0.8)")
    _add_bootstrap_flags(cmd)
    cmd.add_argument("--config", help="JSON config echo to start from")
    return parser


def _given(args, *names):
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


def _bootstrap_from(args, base):
    cfg = dict(base or {})
    cfg.update(_given(args, "seed", "B", "m", "Q", "p", "p_max", "k", "var_method", "threads"))
    if getattr(args, "band_interval", None) is not None:
        cfg["band_interval"] = list(args.band_interval)
    if cfg.get("threads") is None:
        cfg["threads"] = default_threads()
    return BootstrapConfig.from_dict(cfg)


def _predictor_from(args, base):
    spec = dict(base or {})
    if args.predictor is not None:
        if spec.get("kind") != args.predictor:
            spec = {}
        spec["kind"] = args.predictor
    if getattr(args, "Q", None) is not None:
        spec["Q"] = args.Q
    return PredictorSpec.from_dict(spec)


def _levels(args, base):
    alphas = args.alpha if args.alpha else base.get("alpha", [0.2, 0.05])
    horizons = args.horizon if args.horizon else base.get("horizons", [1])
    return [float(alpha) for alpha in alphas], [int(h) for h in horizons]


def _dgp_from(args, base):
    cfg = dict(base.get("dgp", {}))
    case = args.case or base.get("case") or "I"
    if args.case is not None or "dgp" not in base:
        b, c = CASES[case]
        cfg.update(b=b, c=c)
    cfg.update(_given(args, "n", "J", "l_mode", "burn_in", "seed"))
    return case, DgpConfig.from_dict(cfg)


def resolve_config(args):
    """Merge defaults, the ``--config`` file and explicit flags into one JSON-able dict."""
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
        if base.get("command", args.command) != args.command:
            raise FuncbandError(f"{args.config} echoes a {base['command']!r} run, not {args.command!r}")
    out = {"command": args.command}
    if args.command == "simulate":
        case, dgp = _dgp_from(args, base)
        out.update(case=case, dgp=dgp.to_dict())
    elif args.command in ("forecast", "evaluate"):
        out["input"] = args.input or base.get("input")
        if not out["input"]:
            raise FuncbandError("--input is required")
        boot = _bootstrap_from(args, base.get("bootstrap"))
        pred = _predictor_from(args, base.get("predictor"))
        alphas, horizons = _levels(args, base)
        out.update(bootstrap=boot.to_dict(), predictor=pred.to_dict(), alpha=alphas, horizons=horizons)
        if args.command == "forecast":
            out["bands"] = args.bands or base.get("bands", "both")
        else:
            out["train_fraction"] = args.train_fraction or base.get("train_fraction", 0.8)
    else:
        sbase = base.get("study", {})
        case, dgp = _dgp_from(args, {"dgp": sbase["dgp"], "case": sbase.get("case")} if sbase else {})
        boot = _bootstrap_from(args, sbase.get("bootstrap"))
        pred = _predictor_from(args, sbase.get("predictor"))
        alphas, horizons = _levels(args, {"alpha": [round(1 - lvl, 12) for lvl in sbase["nominal"]]} if sbase else {})
        if args.horizon is None and sbase:
            horizons = sbase["horizons"]
        study = StudyConfig(
            dgp=dgp,
            case=case,
            R=args.R or sbase.get("R", 200),
            bootstrap=boot,
            predictor=pred,
            nominal=tuple(round(1 - alpha, 12) for alpha in alphas),
            train_fraction=args.train_fraction or sbase.get("train_fraction", 0.8),
            horizons=tuple(horizons),
            seed=args.seed if args.seed is not None else sbase.get("seed", 0),
            threads=boot.threads,
        )
        out["study"] = study.to_dict()
    return out


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def cmd_simulate(cfg):
    dgp = DgpConfig.from_dict(cfg["dgp"])
    series = simulate_farma(dgp)
    write_csv(series, cfg["output"])
    _write_json(cfg, cfg["output"] + ".json")
    return 0


def _alpha_tag(alpha):
    return format(alpha, "g").replace(".", "p")


def cmd_forecast(cfg):
    series = read_csv(cfg["input"])
    pred = PredictorSpec.from_dict(cfg["predictor"])
    base = BootstrapConfig.from_dict(cfg["bootstrap"])
    out = cfg["output"]
    os.makedirs(out, exist_ok=True)
    summary = {}
    for h in cfg["horizons"]:
        boot = BootstrapConfig.from_dict({**base.to_dict(), "h": h})
        ens = run(series, pred, boot)
        ens.to_csv(os.path.join(out, f"ensemble_h{h}.csv"))
        mse = conditional_mse(ens)
        summary[f"h{h}"] = {
            "diagnostics": {key: (val.item() if hasattr(val, "item") else val) for key, val in ens.diagnostics.items()},
            "bootstrap_rmse": mse.rmse,
            "B": ens.B,
        }
        for alpha in cfg["alpha"]:
            tag = f"h{h}_a{_alpha_tag(alpha)}"
            if cfg["bands"] in ("both", "simultaneous"):
                write_band_csv(simultaneous_band(ens.center, ens, alpha), os.path.join(out, f"simultaneous_{tag}.csv"))
            if cfg["bands"] in ("both", "pointwise"):
                write_band_csv(pointwise_band(ens.center, ens, alpha), os.path.join(out, f"pointwise_{tag}.csv"))
    _write_json(summary, os.path.join(out, "summary.json"))
    _write_json(cfg, os.path.join(out, "config.json"))
    return 0


def cmd_study(cfg, quiet=False):
    study = StudyConfig.from_dict(cfg["study"])
    result = rolling_study(study, progress=None if quiet else stderr_progress(f"case {study.case}"))
    result.to_csv(cfg["output"], sidecar=False)
    _write_json(cfg, cfg["output"] + ".json")
    return 0


def cmd_evaluate(cfg):
    series = read_csv(cfg["input"])
    ev = expanding_window_eval(
        series,
        PredictorSpec.from_dict(cfg["predictor"]),
        BootstrapConfig.from_dict(cfg["bootstrap"]),
        horizons=cfg["horizons"],
        nominal=[round(1 - alpha, 12) for alpha in cfg["alpha"]],
        train_fraction=cfg["train_fraction"],
    )
    ev.to_csv(cfg["output"])
    _write_json(cfg, cfg["output"] + ".json")
    return 0


def _provenance(exc):
    """Name of the innermost package module in the traceback."""
    mod = None
    for frame in traceback.extract_tb(exc.__traceback__):
        parts = frame.filename.replace(os.sep, "/").split("/")
        if "funcband" in parts:
            mod = parts[-1].removesuffix(".py")
    return mod or "cli"


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        cfg["output"] = args.output
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "forecast":
            return cmd_forecast(cfg)
        if args.command == "study":
            return cmd_study(cfg, quiet=args.quiet)
        return cmd_evaluate(cfg)
    except ReplicateFailureError as exc:
        _log(f"funcband {args.command}: [{_provenance(exc)}] {exc}")
        return EXIT_REPLICATES
    except FuncbandError as exc:
        _log(f"funcband {args.command}: [{_provenance(exc)}] {type(exc).__name__}: {exc}")
        return EXIT_ERROR
    except OSError as exc:
        _log(f"funcband {args.command}: {exc.filename or ''}: {exc.strerror or exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
