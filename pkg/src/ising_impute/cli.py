"""Command-line interface.

Subcommands: ``simulate``, ``fit``, ``study``, ``pg-test``, ``recover`` and
``replay``.  Every run writes ``manifest.json`` next to its outputs; the
manifest records the argument vector, resolved configuration and SHA-256
digests, and ``replay`` re-executes it and compares digests.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 empty
complete-case set.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .datagen import MissingnessSpec, load_true_parameters, normalize_study_id, study_missingness
from .errors import EmptyCompleteCaseError, IsingImputeError, ValidationError
from .fit import ChainConfig, fit_methods
from .identifiability import recover_from_restricted
from .polyagamma import RngStream, pg_mean, pg_variance, sample_pg
from .studies import (
    LONG_HEADER,
    MSE_BIAS_HEADER,
    RECOVERY_HEADER,
    ROC_HEADER,
    data_stream,
    resolve_threads,
    run_study,
    simulate_dataset,
)

METHOD_ALIASES = {
    "proposed": ("proposed",),
    "single": ("single_imputation",),
    "complete": ("complete_case",),
    "all": ("proposed", "single_imputation", "complete_case"),
}
CHAIN_KEYS = ("total_iterations", "burn_in", "thinning", "slope_variance",
              "intercept_variance", "seed", "n_chains", "record_beta")


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_chain_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sampler")
    g.add_argument("--iterations", dest="total_iterations", type=int, help="sweeps T (default 5000)")
    g.add_argument("--burn-in", dest="burn_in", type=int, help="burn-in T0 (default 1000)")
    g.add_argument("--thinning", type=int, help="keep every t0-th sweep after burn-in (default 10)")
    g.add_argument("--slope-variance", type=float, help="prior variance of edges (default 1)")
    g.add_argument("--intercept-variance", type=float, help="prior variance of intercepts (default 100)")


def _add_common(p: argparse.ArgumentParser, seed=True) -> None:
    p.add_argument("--config", type=Path, help="JSON file with default option values")
    p.add_argument("--out-dir", type=Path, help="output directory (default: current directory)")
    if seed:
        p.add_argument("--seed", type=int, help="random seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ising-impute",
        description="Bayesian Ising network estimation with iterative imputation of missing responses.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a dataset and its true parameters")
    _add_common(p)
    p.add_argument("--study", help="I, II or III: true matrix and missingness of that study")
    p.add_argument("--j", type=int, help="number of items when no study is given")
    p.add_argument("--s", help="'zero', 'random', or a matrix JSON file (when no study is given)")
    p.add_argument("--n", type=int, help="number of rows")
    p.add_argument("--mcar-rate", type=float, help="replace the missingness mechanism by MCAR at this rate")
    p.add_argument("--sampler", choices=("auto", "exact", "gibbs"))

    p = sub.add_parser("fit", help="estimate the Ising matrix from a dataset CSV")
    _add_common(p)
    p.add_argument("data", type=Path, help="dataset CSV (item_1..item_J, cells 0/1/NA)")
    p.add_argument("--method", choices=tuple(METHOD_ALIASES))
    p.add_argument("--chains", dest="n_chains", type=int, help="number of chains (default 1)")
    p.add_argument("--record-beta", action="store_true", default=None,
                   help="also write the auxiliary coefficients at retained sweeps")
    p.add_argument("--viz-threshold", type=float, help="|s| cutoff for the DOT network (default 0.5)")
    p.add_argument("--no-dot", action="store_true", help="skip the DOT network file")
    p.add_argument("--drop-empty-rows", action="store_true",
                   help="drop rows with every item missing instead of rejecting the file")
    p.add_argument("--threads", type=int, help="worker processes for chains (fallback $ISING_IMPUTE_THREADS)")
    _add_chain_args(p)

    p = sub.add_parser("study", help="run a simulation study and write metric tables")
    _add_common(p)
    p.add_argument("study_id", help="I, II or III")
    p.add_argument("--reps", type=int, help="replications per sample size (default 10)")
    p.add_argument("--n", dest="n_values", type=_csv_ints, help="comma-separated sample sizes")
    p.add_argument("--methods", help="comma-separated subset of proposed,single,complete (default all)")
    p.add_argument("--jaccard-threshold", type=float, help="threshold for the Jaccard column (default 0.3)")
    p.add_argument("--sampler", choices=("auto", "exact", "gibbs"))
    p.add_argument("--threads", type=int, help="worker processes (fallback $ISING_IMPUTE_THREADS)")
    _add_chain_args(p)

    p = sub.add_parser("pg-test", help="compare Pólya-Gamma sample means with the exact mean")
    _add_common(p)
    p.add_argument("--c", dest="c_values", type=_csv_floats, help="tilting values (default 0,0.5,1,2,5,20)")
    p.add_argument("--draws", type=int, help="draws per value (default 100000)")

    p = sub.add_parser("recover", help="rebuild S from a screened probability table")
    _add_common(p, seed=False)
    p.add_argument("table", type=Path, help="CSV item_1..item_J,prob with one aggregate row 0,0,NA,...")
    p.add_argument("--tol", type=float, help="residual tolerance (default 1e-8)")

    p = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out-dir", type=Path, help="write the re-run here instead of the original directory")
    return parser


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    opts = dict(defaults)
    if getattr(args, "config", None) is not None:
        cfg = fio.read_json(args.config)
        if not isinstance(cfg, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = set(cfg) - set(defaults)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        opts.update(cfg)
    for key in defaults:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    return opts


def _chain_config(opts: dict) -> ChainConfig:
    return ChainConfig.from_dict({k: opts[k] for k in CHAIN_KEYS if k in opts and opts[k] is not None})


_CHAIN_DEFAULTS = {"total_iterations": 5000, "burn_in": 1000, "thinning": 10,
                   "slope_variance": 1.0, "intercept_variance": 100.0}


def _out_dir(opts) -> Path:
    out = Path(opts.get("out_dir") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _random_matrix(J: int, seed: int) -> np.ndarray:
    rng = RngStream(seed, (2,)).generator()
    A = np.tril(rng.uniform(-1.0, 1.0, size=(J, J)), k=-1)
    return A + A.T


def cmd_simulate(args) -> dict:
    opts = _resolve(args, {"study": None, "j": None, "s": None, "n": None, "seed": 0,
                           "mcar_rate": None, "missingness": None, "sampler": "auto", "out_dir": None})
    if opts["n"] is None or int(opts["n"]) < 1:
        raise ValidationError("--n must be a positive integer")
    n, seed = int(opts["n"]), int(opts["seed"])
    if opts["study"] is not None:
        sid = normalize_study_id(opts["study"])
        S = load_true_parameters(sid)
        spec = study_missingness(sid)
    else:
        sid = None
        choice = opts["s"] or "zero"
        if choice in ("zero", "random"):
            if opts["j"] is None or int(opts["j"]) < 1:
                raise ValidationError("--j is required with --s zero|random")
            J = int(opts["j"])
            S = np.zeros((J, J)) if choice == "zero" else _random_matrix(J, seed)
        else:
            S = fio.read_matrix_json(choice)
        spec = None
    if opts["missingness"] is not None:
        spec = MissingnessSpec.from_dict(opts["missingness"])
    if opts["mcar_rate"] is not None:
        spec = MissingnessSpec.mcar(opts["mcar_rate"])
    if spec is not None:
        spec.validate(S.shape[0])
    _, data = simulate_dataset(S, n, spec, data_stream(seed, n, 0).generator(), opts["sampler"])
    out = _out_dir(opts)
    fio.write_dataset(out / "data.csv", data)
    fio.write_matrix_json(
        out / "truth.json", S, study=sid, n=n, seed=seed, dropped_rows=data.dropped_rows,
        missingness=None if spec is None else spec.to_dict(),
    )
    print(f"wrote {data.n_rows} x {data.n_items} dataset ({data.n_missing} missing cells) to {out}")
    return {"config": opts, "inputs": [], "outputs": ["data.csv", "truth.json"], "out_dir": out}


def cmd_fit(args) -> dict:
    opts = _resolve(args, {**_CHAIN_DEFAULTS, "seed": 0, "n_chains": 1, "record_beta": False,
                           "method": "proposed", "viz_threshold": 0.5, "out_dir": None,
                           "threads": None})
    config = _chain_config(opts)
    data = fio.read_dataset(args.data, drop_empty_rows=args.drop_empty_rows)
    methods = METHOD_ALIASES[opts["method"]]
    workers = resolve_threads(opts["threads"])
    out = _out_dir(opts)
    outputs, empty_cc = [], None
    results = {}
    imputing = tuple(m for m in methods if m != "complete_case")
    if imputing:
        results.update(fit_methods(data, config, imputing, workers=workers))
    if "complete_case" in methods:
        try:
            results.update(fit_methods(data, config, ("complete_case",), workers=workers))
        except EmptyCompleteCaseError as exc:
            empty_cc = exc
    for tag, res in results.items():
        diag = {k: v for k, v in res.diagnostics.items() if k != "wall_clock_seconds"}
        if "psrf" in diag:
            diag["psrf"] = dict(zip(fio.vech_names(data.n_items), diag["psrf"]))
            diag["max_psrf"] = res.max_psrf
        diag["n_retained"] = config.n_retained
        diag["n_chains"] = config.n_chains
        fio.write_matrix_json(out / f"estimate_{tag}.json", res.estimate, method=tag,
                              config=config.to_dict())
        fio.write_draws(out / f"draws_{tag}.csv", res.per_parameter_chains)
        fio.write_json(out / f"diagnostics_{tag}.json", diag)
        outputs += [f"estimate_{tag}.json", f"draws_{tag}.csv", f"diagnostics_{tag}.json"]
        if res.beta_draws is not None:
            b = res.beta_draws
            rows = ([c, m, j + 1, *b[c, m, j]] for c in range(b.shape[0])
                    for m in range(b.shape[1]) for j in range(b.shape[2]))
            fio.write_csv(out / f"beta_{tag}.csv",
                          ["chain", "draw", "item", *fio.item_header(data.n_items)], rows)
            outputs.append(f"beta_{tag}.csv")
        if not args.no_dot:
            fio.write_dot(out / f"network_{tag}.dot", res.estimate, opts["viz_threshold"])
            outputs.append(f"network_{tag}.dot")
        psrf = "" if res.max_psrf is None else f", max PSRF {res.max_psrf:.4f}"
        print(f"{tag}: {res.draws.shape[0]} draws{psrf}")
    record = {"config": {**opts, "data": str(args.data)}, "inputs": [args.data],
              "outputs": outputs, "out_dir": out,
              "wall_clock": {t: r.diagnostics["wall_clock_seconds"] for t, r in results.items()}}
    if empty_cc is not None:
        record["error"] = empty_cc
    return record


def cmd_study(args) -> dict:
    opts = _resolve(args, {**_CHAIN_DEFAULTS, "seed": 0, "reps": 10, "n_values": None,
                           "methods": "all", "jaccard_threshold": 0.3, "sampler": "auto",
                           "threads": None, "out_dir": None, "study_id": None})
    sid = normalize_study_id(args.study_id)
    n_values = opts["n_values"] or [1000, 8000]
    if isinstance(n_values, str):
        n_values = _csv_ints(n_values)
    names = opts["methods"]
    names = names.split(",") if isinstance(names, str) else list(names)
    methods = []
    for name in names:
        if name not in METHOD_ALIASES:
            raise ValidationError(f"unknown method {name!r}")
        methods += [m for m in METHOD_ALIASES[name] if m not in methods]
    config = _chain_config({**opts, "seed": 0})
    res = run_study(sid, n_values, int(opts["reps"]), seed=int(opts["seed"]), config=config,
                    methods=methods, threads=opts["threads"], sampler=opts["sampler"])
    out = _out_dir(opts)
    fio.write_csv(out / "mse_bias.csv", MSE_BIAS_HEADER, res.mse_bias_rows())
    fio.write_csv(out / "estimates_long.csv", LONG_HEADER, res.long_rows())
    outputs = ["mse_bias.csv", "estimates_long.csv"]
    if res.has_recovery_metrics():
        fio.write_csv(out / "recovery.csv", RECOVERY_HEADER, res.recovery_rows(opts["jaccard_threshold"]))
        fio.write_csv(out / "roc.csv", ROC_HEADER, res.roc_rows())
        outputs += ["recovery.csv", "roc.csv"]
    print(f"study {sid}: {res.reps} replications at n = {list(res.n_values)}; tables in {out}")
    return {"config": {**opts, "n_values": list(n_values), "methods": methods},
            "inputs": [], "outputs": outputs, "out_dir": out}


def cmd_pg_test(args) -> dict:
    opts = _resolve(args, {"c_values": [0.0, 0.5, 1.0, 2.0, 5.0, 20.0], "draws": 100000,
                           "seed": 0, "out_dir": None})
    n = int(opts["draws"])
    if n < 2:
        raise ValidationError("--draws must be at least 2")
    rows = []
    for k, c in enumerate(opts["c_values"]):
        x = sample_pg(np.full(n, float(c)), RngStream(int(opts["seed"]), (k,)).generator())
        mean = float(pg_mean(c))
        z = (x.mean() - mean) / np.sqrt(float(pg_variance(c)) / n)
        rows.append((float(c), n, float(x.mean()), mean, float(z)))
    out = _out_dir(opts)
    fio.write_csv(out / "pg_test.csv", ["c", "n_draws", "empirical_mean", "pg_mean", "z_score"], rows)
    for r in rows:
        print(f"c={r[0]:g}: mean {r[2]:.6f} vs {r[3]:.6f} (z = {r[4]:+.2f})")
    return {"config": opts, "inputs": [], "outputs": ["pg_test.csv"], "out_dir": out}


def cmd_recover(args) -> dict:
    opts = _resolve(args, {"tol": 1e-8, "out_dir": None})
    r = fio.read_restricted_table(args.table)
    S = recover_from_restricted(r, tol=float(opts["tol"]))
    out = _out_dir(opts)
    fio.write_matrix_json(out / "recovered.json", S)
    print(f"recovered {S.shape[0]} x {S.shape[0]} matrix to {out / 'recovered.json'}")
    return {"config": {**opts, "table": str(args.table)}, "inputs": [args.table],
            "outputs": ["recovered.json"], "out_dir": out}


def _write_manifest(command: str, argv: list[str], record: dict, seconds: float) -> None:
    out = Path(record["out_dir"])
    manifest = {
        "command": command,
        "argv": argv,
        "cwd": os.getcwd(),
        "config": record["config"],
        "seed": record["config"].get("seed"),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_seconds": seconds,
        "inputs": fio.digests(record["inputs"]),
        "outputs": {name: fio.sha256_file(out / name) for name in record["outputs"]},
    }
    if "wall_clock" in record:
        manifest["fit_seconds"] = record["wall_clock"]
    cfg = manifest["config"]
    for k, v in list(cfg.items()):
        if isinstance(v, Path):
            cfg[k] = str(v)
    fio.write_json(out / "manifest.json", manifest)


def _with_out_dir(argv: list[str], out_dir: Path) -> list[str]:
    argv = list(argv)
    for k, a in enumerate(argv):
        if a == "--out-dir" and k + 1 < len(argv):
            argv[k + 1] = str(out_dir)
            return argv
        if a.startswith("--out-dir="):
            argv[k] = f"--out-dir={out_dir}"
            return argv
    return argv[:1] + ["--out-dir", str(out_dir)] + argv[1:]


def cmd_replay(args) -> int:
    manifest = fio.read_json(args.manifest)
    argv = list(manifest["argv"])
    if args.out_dir is not None:
        argv = _with_out_dir(argv, args.out_dir.resolve())
    here = os.getcwd()
    os.chdir(manifest.get("cwd", here))
    try:
        code = main(argv)
        new_dir = Path(args.out_dir.resolve() if args.out_dir else manifest["config"].get("out_dir") or ".")
        mismatched = [
            name for name, digest in manifest["outputs"].items()
            if not (new_dir / name).exists() or fio.sha256_file(new_dir / name) != digest
        ]
    finally:
        os.chdir(here)
    if code != 0:
        return code
    if mismatched:
        print("replay differs in: " + ", ".join(mismatched), file=sys.stderr)
        return 1
    print(f"replay identical: {len(manifest['outputs'])} output files match")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "study": cmd_study,
    "pg-test": cmd_pg_test,
    "recover": cmd_recover,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            return cmd_replay(args)
        start = time.perf_counter()
        record = COMMANDS[args.command](args)
        _write_manifest(args.command, argv, record, time.perf_counter() - start)
        if "error" in record:
            raise record["error"]
    except IsingImputeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
