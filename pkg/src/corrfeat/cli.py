"""Command line for building correlation features and boosting on them.

Exit codes: 0 success, 2 usage or invalid settings, 3 unreadable or
malformed input, 4 schema mismatch, 5 training aborted (no positive edge).
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .boosting import Ensemble, TrainConfig, autoassociative_select, evaluate, train
from .data import (DataFormatError, Dataset, SchemaError, load_cifar10, load_dataset,
                   load_delimited, load_mnist_idx, split_train_valid, subsample_indices)
from .features import (FeatureConfig, FeatureTransform, apply_transform, export_masks,
                       feature_masks, fit_transform_pipeline, mask_image, write_pgm)
from .haar import BANDS, HaarFilter
from .learners import HaarSource

log = logging.getLogger("corrfeat")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SCHEMA, EXIT_ABORT = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


# -- data arguments -------------------------------------------------------------

def _add_data_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--data", nargs="+", required=required, metavar="PATH",
                   help="training (or only) data: IDX image+label pair, CIFAR batch files, "
                        "one delimited text file, or one .npz interchange file")
    g.add_argument("--test", nargs="+", metavar="PATH", help="separate test data, same format")
    g.add_argument("--format", choices=("auto", "idx", "cifar", "delimited", "npz"),
                   default="auto")
    g.add_argument("--label-column", type=int, default=-1,
                   help="1-based label column of delimited files; negative counts from the end")
    g.add_argument("--delimiter", default=",")
    g.add_argument("--skip-header", action="store_true")
    g.add_argument("--split", type=float, metavar="FRACTION",
                   help="without --test: random train fraction of --data held for training")
    g.add_argument("--split-seed", type=int, default=0)
    g.add_argument("--train-rows", type=int, metavar="N",
                   help="keep a seeded random subset of N training rows")


def _guess_format(paths) -> str:
    first = Path(paths[0]).name.lower()
    if first.endswith(".npz"):
        return "npz"
    if first.endswith(".bin"):
        return "cifar"
    if "ubyte" in first or first.endswith(".idx"):
        return "idx"
    return "delimited"


def _load(paths, args, label_map=None) -> Dataset:
    fmt = args.format if args.format != "auto" else _guess_format(paths)
    if fmt == "idx":
        if len(paths) != 2:
            raise UsageError("IDX data needs exactly two paths: images then labels")
        return load_mnist_idx(*paths)
    if fmt == "cifar":
        return load_cifar10(paths)
    if len(paths) != 1:
        raise UsageError(f"{fmt} data takes a single path")
    if fmt == "npz":
        return load_dataset(paths[0])
    return load_delimited(paths[0], label_column=args.label_column, delimiter=args.delimiter,
                          skip_header=args.skip_header, label_map=label_map)


def _datasets(args) -> tuple[Dataset, Dataset | None]:
    train_ds = _load(args.data, args)
    test_ds = None
    if args.test:
        test_ds = _load(args.test, args, label_map=train_ds.label_map)
        if test_ds.d != train_ds.d or test_ds.K != train_ds.K:
            raise SchemaError(f"test data has d={test_ds.d} K={test_ds.K}, "
                              f"training data d={train_ds.d} K={train_ds.K}")
    elif args.split is not None:
        train_ds, test_ds = split_train_valid(train_ds, args.split, args.split_seed)
    if args.train_rows is not None and args.train_rows < train_ds.n:
        rows = np.sort(subsample_indices(train_ds.n, args.train_rows, args.split_seed))
        train_ds = train_ds.subset(rows)
    return train_ds, test_ds


# -- helpers ------------------------------------------------------------------------

def _resolved(args) -> dict:
    out = {"command": args.command, "version": __version__}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "command", "config"):
            continue
        out[k] = v
    return out


def _write_config(args, outdir: Path) -> None:
    (outdir / "run_config.json").write_text(json.dumps(_resolved(args), indent=1, sort_keys=True)
                                           + "\n")


def _geometry(text):
    if text is None:
        return None
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise UsageError("geometry must look like 28x28x1")
    return tuple(int(p) for p in parts)


def _schema_of(ens: Ensemble, d: int, T: FeatureTransform | None) -> None:
    mode = ens.schema.get("mode", ens.mode)
    if mode == "constructed":
        if T is None:
            raise SchemaError("model was trained on constructed features; pass --transform")
        if T.digest() != ens.schema.get("transform_digest"):
            raise SchemaError("transform does not match the one the model was trained with")
    expect = ens.schema.get("d")
    if expect is not None and expect != d:
        raise SchemaError(f"model expects d={expect} raw columns, data has d={d}")


def _model_inputs(ens: Ensemble, ds: Dataset, T: FeatureTransform | None) -> np.ndarray:
    _schema_of(ens, ds.d, T)
    mode = ens.schema.get("mode", ens.mode)
    if mode == "constructed":
        return apply_transform(T, ds.X)
    if mode == "haar":
        geometry = tuple(ens.schema["geometry"])
        return HaarSource(ds.X, geometry, filters=ens.haar_filters).matrix()
    return ds.X


# -- commands ---------------------------------------------------------------------------

def cmd_inspect(args) -> int:
    train_ds, test_ds = _datasets(args)
    print(train_ds.summary())
    if train_ds.label_map:
        print("labels " + " ".join(f"{k + 1}={v}" for k, v in enumerate(train_ds.label_map)))
    if test_ds is not None:
        print("test " + test_ds.summary().replace("\n", "\ntest "))
    return EXIT_OK


def cmd_build_features(args) -> int:
    ds, _ = _datasets(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    selected = None
    if args.select_iterations:
        m = min(args.subsample, ds.n)
        X_sub = ds.X[subsample_indices(ds.n, m, args.seed)]
        selected = autoassociative_select(X_sub, args.select_iterations,
                                          weight_init=args.weight_init)
        (outdir / "selected.txt").write_text("\n".join(map(str, selected)) + "\n")
        print(f"selected {len(selected)} of {ds.d} features in {args.select_iterations} "
              "autoassociative iterations")
    normalize = {"auto": None, "on": True, "off": False}[args.normalize]
    cfg = FeatureConfig(rho_n=tuple(args.rho_n), rho_e=args.rho_e, subsample=args.subsample,
                        seed=args.seed, normalize=normalize, selected=selected)
    T = fit_transform_pipeline(ds, cfg)
    meta = dict(T.meta)
    if ds.geometry:
        meta["geometry"] = list(ds.geometry)
    T = FeatureTransform(T.raw_dim, T.neighborhoods, T.edges, T.normalizer, meta)
    T.save(outdir / "transform.json")
    if args.export_masks:
        export_masks(T, outdir / "masks", geometry=ds.geometry)
    _write_config(args, outdir)
    print(f"{T.neighborhoods.q} neighborhood, {T.edges.L} edge features "
          f"({len(T.neighborhoods.selected)} input features, {T.n_outputs} outputs)")
    return EXIT_OK


def cmd_train(args) -> int:
    train_ds, test_ds = _datasets(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    T = None
    schema = {"mode": args.mode, "d": train_ds.d}
    if train_ds.geometry:
        schema["geometry"] = list(train_ds.geometry)
    if args.mode == "constructed":
        if not args.transform:
            raise UsageError("--mode constructed needs --transform")
        T = FeatureTransform.load(args.transform)
        if Path(args.transform).resolve() != (outdir / "transform.json").resolve():
            shutil.copyfile(args.transform, outdir / "transform.json")
        schema["transform_digest"] = T.digest()
        X = apply_transform(T, train_ds.X)
        E = apply_transform(T, test_ds.X) if test_ds is not None else None
    elif args.mode == "haar":
        geometry = _geometry(args.geometry) or train_ds.geometry
        if geometry is None:
            raise UsageError("Haar mode needs image geometry (--geometry HxWxC)")
        if args.d_prime is None:
            raise UsageError("Haar mode samples filters per split; pass --d-prime")
        schema["geometry"] = list(geometry)
        X = HaarSource(train_ds.X, geometry)
        E = HaarSource(test_ds.X, geometry) if test_ds is not None else None
    else:
        X = train_ds.X
        E = test_ds.X if test_ds is not None else None
    cfg = TrainConfig(T=args.iterations, N=args.leaves, d_prime=args.d_prime, seed=args.seed,
                      cadence=args.curve_cadence, weight_init=args.weight_init)
    eval_set = (E, test_ds.y) if test_ds is not None else None

    def progress(t, res):
        if t % args.log_every == 0:
            err = res.curve.test_error[-1]
            log.info("iteration %d  train %.4f  test %s", t, res.curve.train_error[-1],
                     "-" if np.isnan(err) else f"{err:.4f}")

    res = train(X, train_ds.y, train_ds.K, cfg, eval_set=eval_set, callback=progress)
    ens = res.ensemble
    ens.mode = args.mode
    ens.schema = schema
    ens.label_map = list(train_ds.label_map) if train_ds.label_map else None
    ens.save(outdir / "model.json")
    res.curve.save(outdir / "curve.csv", with_time=args.timing)
    _write_config(args, outdir)
    curve = res.curve
    if curve.iteration:
        final_test = curve.test_error[-1]
        parts = [f"stages={len(ens)}", f"train_error={curve.train_error[-1]:.4f}"]
        if test_ds is not None:
            parts += [f"test_error={final_test:.4f}",
                      f"mean_test_error_last_half={curve.mean_last_half():.4f}"]
        print(" ".join(parts))
    if res.aborted:
        print(f"aborted: {res.message}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def _load_model(args):
    ens = Ensemble.load(args.model)
    T = FeatureTransform.load(args.transform) if args.transform else None
    if T is None and ens.schema.get("mode") == "constructed":
        sibling = Path(args.model).with_name("transform.json")
        if sibling.exists():
            T = FeatureTransform.load(sibling)
    return ens, T


def cmd_evaluate(args) -> int:
    ens, T = _load_model(args)
    train_ds, test_ds = _datasets(args)
    ds = test_ds if (test_ds is not None and args.on == "test") else train_ds
    if ds.K != ens.K:
        raise SchemaError(f"model has K={ens.K}, data K={ds.K}")
    F = _model_inputs(ens, ds, T)
    final, curve = evaluate(ens, F, ds.y)
    print(f"n={ds.n} stages={len(ens)} error={final:.4f}")
    if args.curve:
        lines = ["iteration,error"] + [f"{t + 1},{e!r}" for t, e in enumerate(curve)]
        Path(args.curve).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def _haar_mask(geometry, row) -> np.ndarray:
    f = HaarFilter(*row)
    h, w, _ = geometry
    pos, neg = [], []
    bx, by = BANDS[f.type]
    bw, bh = f.width // bx, f.height // by
    for j in range(by):
        for i in range(bx):
            if f.type == 4:
                positive = i == j
            elif f.type in (2, 3):
                positive = (i + j) != 1
            else:
                positive = (i + j) == 0
            cells = [(f.y + j * bh + r) * w + f.x + i * bw + c
                     for r in range(bh) for c in range(bw)]
            (pos if positive else neg).extend(cells)
    return mask_image(geometry, pos, neg)


def cmd_importance(args) -> int:
    ens, T = _load_model(args)
    mode = ens.schema.get("mode", ens.mode)
    if mode == "constructed" and T is None:
        raise SchemaError("constructed-mode model needs --transform")
    ranked = sorted(ens.importance().items(), key=lambda kv: (-kv[1], kv[0]))
    top = ranked[:args.top]
    if args.top > len(ranked):
        print(f"note: only {len(ranked)} features are used by the model")
    geometry = _geometry(args.geometry) or (tuple(ens.schema["geometry"])
                                            if ens.schema.get("geometry") else None)
    outdir = Path(args.out) if args.out else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    kinds = {}
    lines = ["rank,feature,importance,kind,detail"]
    for rank, (f, imp) in enumerate(top):
        if mode == "constructed":
            kind, pos, neg = feature_masks(T, f)
            detail = f"+{len(pos)}/-{len(neg)} inputs"
            img = mask_image(geometry, pos, neg) if geometry else None
        elif mode == "haar":
            kind = "haar"
            detail = HaarFilter(*ens.haar_filters[f]).describe()
            img = _haar_mask(geometry, ens.haar_filters[f]) if geometry else None
        else:
            kind, detail = "raw", f"column {f}"
            img = mask_image(geometry, [f]) if geometry else None
        kinds[kind] = kinds.get(kind, 0) + 1
        lines.append(f"{rank + 1},{f},{imp!r},{kind},{detail}")
        if outdir and img is not None:
            write_pgm(outdir / f"{rank + 1:04d}_{kind}_{f}.pgm", img)
    print("\n".join(lines))
    print("counts " + " ".join(f"{k}={v}" for k, v in sorted(kinds.items())))
    if outdir:
        (outdir / "importance.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corrfeat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"corrfeat {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="JSON",
                        help="flat JSON object of option values; command-line flags win")
    common.add_argument("--workers", type=int, default=None,
                        help="cap on compute threads used by compiled kernels")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", parents=[common], help="summarize a dataset")
    _add_data_args(p)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("build-features", parents=[common],
                       help="fit neighborhood and edge features")
    _add_data_args(p)
    p.add_argument("--rho-n", type=float, nargs="+", default=[0.5])
    p.add_argument("--rho-e", type=float, default=0.7)
    p.add_argument("--subsample", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--select-iterations", type=int, default=0, metavar="T_AA",
                   help="run autoassociative selection first (0 keeps every feature)")
    p.add_argument("--weight-init", choices=("mh", "uniform"), default="mh")
    p.add_argument("--export-masks", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_features)

    p = sub.add_parser("train", parents=[common], help="boost Hamming trees")
    _add_data_args(p)
    p.add_argument("--mode", choices=("raw", "haar", "constructed"), default="raw")
    p.add_argument("--transform", help="feature transform for --mode constructed")
    p.add_argument("--geometry", help="HxWxC for Haar mode on data without geometry")
    p.add_argument("-T", "--iterations", type=int, default=100)
    p.add_argument("-N", "--leaves", type=int, default=8)
    p.add_argument("--d-prime", type=int, default=None,
                   help="candidate features per split (default: all; required for Haar)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-init", choices=("mh", "uniform"), default="mh")
    p.add_argument("--curve-cadence", type=int, default=None,
                   help="evaluate the test curve every k iterations")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock seconds in curve.csv (makes it run-dependent)")
    p.add_argument("--log-every", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="error of a saved model")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--transform")
    p.add_argument("--on", choices=("train", "test"), default="test",
                   help="which part to score when test data is available")
    p.add_argument("--curve", help="write the per-stage error replay here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("importance", parents=[common], help="rank features by summed alpha")
    p.add_argument("--model", required=True)
    p.add_argument("--transform")
    p.add_argument("--top", type=int, default=100)
    p.add_argument("--geometry")
    p.add_argument("--out", help="directory for mask images and importance.csv")
    p.set_defaults(func=cmd_importance)
    return parser


def _parse(parser, argv):
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in subparsers), None)
    if known.config and command:
        cfg = json.loads(Path(known.config).read_text())
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        subparser = subparsers[command]
        actions = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in actions or dest in ("help", "config"):
                raise UsageError(f"unknown config key {key!r} for {command}")
            defaults[dest] = value
            # a required flag may now come from the file
            actions[dest].required = False
        subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _set_workers(n):
    if n is None:
        return
    if n < 1:
        raise UsageError("--workers must be >= 1")
    if kernels.USE_NUMBA:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        _set_workers(args.workers)
        return args.func(args)
    except UsageError as e:
        print(f"corrfeat: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as e:
        print(f"corrfeat: schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except DataFormatError as e:
        print(f"corrfeat: bad input: {e}", file=sys.stderr)
        return EXIT_IO
    except (OSError, json.JSONDecodeError) as e:
        print(f"corrfeat: cannot read input: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"corrfeat: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
