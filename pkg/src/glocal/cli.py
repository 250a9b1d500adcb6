"""Command-line interface.

Subcommands: cluster, train, predict, eval, mask, split, synth.  Every
subcommand is deterministic given its flags; seeds are echoed into the
output files as '#' comment lines.  Paths are validated before any
work starts and errors exit with status 1 and a one-line diagnostic.

File formats owned here (all others live with their module):
  * scores/labels files: comments, a "l n" header line, then l rows of
    n whitespace-separated values;
  * hidden-entry sidecar: "label_idx instance_idx value" lines, 1-based;
  * report CSV: header rkl,auc,cvg,ap,skipped_instances,skipped_labels.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from .clustering import kmeans, read_partition, write_partition
from .data import (
    Dataset,
    FeatureMatrix,
    LabelMatrix,
    MaskSpec,
    apply_mask,
    parse_gml,
    split,
    take_instances,
    write_gml,
)
from .metrics import evaluate, ranking_loss
from .model import Hyperparams, load_model, predict, save_model, score
from .solver import fit


def make_synthetic(l, n, d, k_true, noise, seed):
    """Planted multi-label dataset: labels sign(U* W*' X + noise).

    X is standard gaussian, the planted factors are scaled so the clean
    scores are O(1), and `noise` is the std of gaussian score noise.
    With noise=0 the labels are exactly the sign of the planted scores.
    """
    if l < 2 or n < 1 or d < 1 or k_true < 1:
        raise ValueError("need l >= 2, n >= 1, d >= 1, k >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((d, n))
    W_true = rng.standard_normal((d, k_true)) / np.sqrt(d)
    U_true = rng.standard_normal((l, k_true)) / np.sqrt(k_true)
    scores = U_true @ (W_true.T @ X)
    if noise > 0:
        scores = scores + noise * rng.standard_normal((l, n))
    Y = np.where(scores > 0.0, 1, -1).astype(np.int8)
    return Dataset(FeatureMatrix(X), LabelMatrix(Y))


def write_hidden(hidden, comments=()):
    """Serialize hidden entries as 1-based 'label_idx instance_idx value' lines."""
    lines = [f"# {c}" for c in comments]
    for j, i, v in hidden:
        lines.append(f"{j + 1} {i + 1} {v}")
    return "\n".join(lines) + "\n"


def read_hidden(text):
    """Parse a hidden-entry sidecar back to 0-based (label, instance, value)."""
    out = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("#") or raw.strip() == "":
            continue
        parts = raw.split()
        if len(parts) != 3:
            raise ValueError(f"line {line_no}: expected 'label_idx instance_idx value'")
        try:
            j, i, v = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise ValueError(f"line {line_no}: expected three integers") from None
        if j < 1 or i < 1 or v not in (-1, 1):
            raise ValueError(f"line {line_no}: bad hidden entry {raw!r}")
        out.append((j - 1, i - 1, v))
    return out


def write_matrix(A, comments=()):
    """Serialize a matrix with a 'rows cols' header, full precision."""
    lines = [f"# {c}" for c in comments]
    lines.append(f"{A.shape[0]} {A.shape[1]}")
    for row in A:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def read_matrix(text):
    """Parse a matrix written by write_matrix."""
    tokens = []
    for raw in text.splitlines():
        if raw.startswith("#"):
            continue
        tokens.extend(raw.split())
    if len(tokens) < 2:
        raise ValueError("matrix file needs a 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    vals = [float(t) for t in tokens[2:]]
    if len(vals) != rows * cols:
        raise ValueError(f"expected {rows * cols} values, found {len(vals)}")
    return np.array(vals, dtype=np.float64).reshape(rows, cols)


def _require_file(path, what):
    if not Path(path).is_file():
        raise ValueError(f"{what} file not found: {path}")


def _require_parent(path, what):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise ValueError(f"directory for {what} does not exist: {parent}")


def _read(path):
    return Path(path).read_text(encoding="utf-8")


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def _with_bias(features):
    return FeatureMatrix(
        np.vstack([features.values, np.ones((1, features.n))])
    )


def _load_dataset(path, add_bias=False):
    data = parse_gml(_read(path))
    if add_bias:
        data = Dataset(_with_bias(data.features), data.labels)
    return data


_GRID_AXES = ("lambda", "lambda2", "lambda3", "lambda4", "k", "g")


def parse_grid(spec):
    """Parse a grid like 'lambda3=0.1,1;lambda4=0.1,1;k=3,5;g=2,4'."""
    axes = {}
    for part in spec.split(";"):
        name, eq, vals = part.partition("=")
        name = name.strip()
        if not eq or name not in _GRID_AXES:
            raise ValueError(
                f"bad grid axis {part!r}; axes are {', '.join(_GRID_AXES)}"
            )
        if name in axes:
            raise ValueError(f"duplicate grid axis {name!r}")
        try:
            if name in ("k", "g"):
                values = [int(v) for v in vals.split(",")]
            else:
                values = [float(v) for v in vals.split(",")]
        except ValueError:
            raise ValueError(f"bad grid values for axis {name!r}: {vals!r}") from None
        if not values:
            raise ValueError(f"empty grid axis {name!r}")
        axes[name] = values
    if not axes:
        raise ValueError("empty grid")
    return axes


def _hp_from_args(args, **overrides):
    fields = dict(
        k=args.latent_k,
        lambda_=args.lam,
        lambda2=args.lambda2,
        lambda3=args.lambda3,
        lambda4=args.lambda4,
        inner_steps=args.inner_steps,
        outer_iters=args.outer_iters,
        warm_iters=args.warm_iters,
        tol=args.tol,
        seed=args.seed,
    )
    fields.update(overrides)
    return Hyperparams(**fields)


def _cv_folds(n, seed, folds=5):
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, folds) if f.size]


def _grid_search(data, args, axes):
    """5-fold CV over the grid; selection criterion is mean ranking loss."""
    folds = _cv_folds(data.n, args.seed)
    if len(folds) < 2:
        raise ValueError("grid search needs at least 2 instances")
    combos = list(itertools.product(*axes.values()))
    names = list(axes.keys())
    best = None
    for combo in combos:
        chosen = dict(zip(names, combo))
        g = chosen.pop("g", args.groups)
        overrides = {
            {"lambda": "lambda_"}.get(k, k): v for k, v in chosen.items()
        }
        hp = _hp_from_args(args, **overrides)
        losses = []
        usable = True
        for f, val_idx in enumerate(folds):
            train_idx = np.sort(np.concatenate(folds[:f] + folds[f + 1 :]))
            sub = take_instances(data, train_idx)
            try:
                part = kmeans(sub.features, g, args.seed)
                model, _ = fit(sub, part, hp)
                val = take_instances(data, val_idx)
                losses.append(
                    ranking_loss(score(model, val.features), val.labels.values)
                )
            except (ValueError, np.linalg.LinAlgError):
                # degenerate fold for this combination; skip the combo
                usable = False
                break
        if not usable:
            continue
        mean_loss = float(np.mean(losses))
        if best is None or mean_loss < best[0]:
            best = (mean_loss, dict(zip(names, combo)), g, hp)
    if best is None:
        raise ValueError("no grid combination produced a usable CV score")
    return best


def _cmd_synth(args):
    for name in ("out_full", "out_masked", "out_hidden"):
        _require_parent(getattr(args, name), name.replace("_", "-"))
    data = make_synthetic(
        args.labels, args.instances, args.features, args.latent_k,
        args.noise, args.seed,
    )
    stamp = (
        f"glocal synth seed={args.seed} noise={args.noise} rho={args.rho}"
        f" l={args.labels} n={args.instances} d={args.features} k={args.latent_k}"
    )
    masked, hidden = apply_mask(data, MaskSpec(rho=args.rho, seed=args.seed))
    _write(args.out_full, write_gml(data, comments=[stamp]))
    _write(args.out_masked, write_gml(masked, comments=[stamp]))
    _write(args.out_hidden, write_hidden(hidden, comments=[stamp]))
    print(f"synth: wrote {args.out_full}, {args.out_masked}, {args.out_hidden}")
    return 0


def _cmd_mask(args):
    _require_file(args.input, "input")
    _require_parent(args.out, "out")
    _require_parent(args.hidden_out, "hidden-out")
    data = _load_dataset(args.input)
    masked, hidden = apply_mask(data, MaskSpec(rho=args.rho, seed=args.seed))
    stamp = f"glocal mask seed={args.seed} rho={args.rho} input={args.input}"
    _write(args.out, write_gml(masked, comments=[stamp]))
    _write(args.hidden_out, write_hidden(hidden, comments=[stamp]))
    observed = int(masked.labels.indicator.sum())
    print(f"mask: {observed} observed positions kept, {len(hidden)} entries hidden")
    return 0


def _cmd_split(args):
    _require_file(args.input, "input")
    _require_parent(args.train_out, "train-out")
    _require_parent(args.test_out, "test-out")
    data = _load_dataset(args.input)
    train, test = split(data, args.fraction, args.seed)
    stamp = f"glocal split seed={args.seed} fraction={args.fraction} input={args.input}"
    _write(args.train_out, write_gml(train, comments=[stamp + " side=train"]))
    _write(args.test_out, write_gml(test, comments=[stamp + " side=test"]))
    print(f"split: {train.n} train / {test.n} test instances")
    return 0


def _cmd_cluster(args):
    _require_file(args.input, "input")
    _require_parent(args.out, "out")
    data = _load_dataset(args.input)
    part = kmeans(data.features, args.groups, args.seed, max_iter=args.max_iter)
    stamp = f"glocal cluster seed={args.seed} groups={args.groups} input={args.input}"
    _write(args.out, write_partition(part, comments=[stamp]))
    sizes = " ".join(str(int(s)) for s in part.sizes)
    print(f"cluster: {part.g} groups with sizes {sizes}")
    return 0


def _cmd_train(args):
    _require_file(args.input, "input")
    _require_parent(args.model_out, "model-out")
    if args.trace:
        _require_parent(args.trace, "trace")
    if args.partition:
        _require_file(args.partition, "partition")
    data = _load_dataset(args.input, add_bias=args.add_bias)

    grid_note = None
    if args.grid:
        axes = parse_grid(args.grid)
        if args.partition and "g" in axes:
            raise ValueError("cannot vary g in --grid while --partition is fixed")
        loss, chosen, g, hp = _grid_search(data, args, axes)
        grid_note = ", ".join(f"{k}={v}" for k, v in chosen.items())
        print(f"grid: selected {grid_note} (cv ranking loss {loss:.4f})")
    else:
        hp = _hp_from_args(args)
        g = args.groups

    if args.partition:
        part = read_partition(_read(args.partition), data.features)
    else:
        part = kmeans(data.features, g, args.seed)

    model, trace = fit(data, part, hp)
    stamp = (
        f"glocal train seed={args.seed} k={hp.k} g={part.g}"
        f" lambda={hp.lambda_} lambda2={hp.lambda2}"
        f" lambda3={hp.lambda3} lambda4={hp.lambda4}"
    )
    comments = [stamp]
    if grid_note:
        comments.append(f"grid selection: {grid_note}")
    save_model(model, args.model_out, comments=comments)
    if args.trace:
        _write(args.trace, trace.to_csv(comments=[stamp]))
    final = trace.records[-1]
    print(
        f"train: objective {final.objective:.6g} after {final.iteration} iterations"
        f" (converged={trace.converged})"
    )
    return 0


def _cmd_predict(args):
    _require_file(args.model, "model")
    _require_file(args.input, "input")
    _require_parent(args.scores_out, "scores-out")
    if args.labels_out:
        _require_parent(args.labels_out, "labels-out")
    model = load_model(args.model)
    data = _load_dataset(args.input, add_bias=args.add_bias)
    S = score(model, data.features)
    stamp = f"glocal predict model={args.model} input={args.input}"
    _write(args.scores_out, write_matrix(S, comments=[stamp]))
    if args.labels_out:
        L = predict(model, data.features)
        _write(args.labels_out, write_matrix(L.astype(np.float64), comments=[stamp]))
    print(f"predict: scored {data.n} instances over {model.l} labels")
    return 0


def _cmd_eval(args):
    _require_file(args.scores, "scores")
    _require_parent(args.out, "out")
    if (args.truth is None) == (args.hidden is None):
        raise ValueError("pass exactly one of --truth or --hidden")
    S = read_matrix(_read(args.scores))
    if args.truth:
        _require_file(args.truth, "truth")
        truth = parse_gml(_read(args.truth)).labels.values
    else:
        _require_file(args.hidden, "hidden")
        truth = np.zeros(S.shape, dtype=np.int8)
        for j, i, v in read_hidden(_read(args.hidden)):
            if j >= S.shape[0] or i >= S.shape[1]:
                raise ValueError(
                    f"hidden entry ({j + 1}, {i + 1}) outside score matrix {S.shape}"
                )
            truth[j, i] = v
    report = evaluate(S, truth)
    _write(args.out, report.to_csv(comments=[f"glocal eval scores={args.scores}"]))
    print(
        f"eval: rkl={report.rkl:.4f} auc={report.auc:.4f}"
        f" cvg={report.cvg:.4f} ap={report.ap:.4f}"
    )
    return 0


def _add_train_flags(p):
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="latent-to-feature coupling weight")
    p.add_argument("--lambda2", type=float, default=0.01, help="ridge weight")
    p.add_argument("--lambda3", type=float, default=0.1,
                   help="global correlation weight")
    p.add_argument("--lambda4", type=float, default=0.1,
                   help="local correlation weight")
    p.add_argument("--latent-k", type=int, default=3, help="latent dimension")
    p.add_argument("--groups", type=int, default=1, help="instance groups")
    p.add_argument("--inner-steps", type=int, default=5)
    p.add_argument("--outer-iters", type=int, default=50)
    p.add_argument("--warm-iters", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="glocal",
        description="Multi-label learning with global and local label correlations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="k-means instance grouping")
    p.add_argument("--input", required=True)
    p.add_argument("--groups", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("train", help="fit a model")
    p.add_argument("--input", required=True)
    p.add_argument("--partition", help="partition file overriding k-means")
    p.add_argument("--model-out", required=True)
    p.add_argument("--trace", help="write iter,objective CSV here")
    p.add_argument("--grid", help="e.g. 'lambda3=0.1,1;lambda4=0.1,1;k=3,5;g=2,4'")
    p.add_argument("--add-bias", action="store_true",
                   help="append a constant feature before training")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="score instances with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--scores-out", required=True)
    p.add_argument("--labels-out")
    p.add_argument("--add-bias", action="store_true",
                   help="append a constant feature (match the train flag)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="ranking metrics for a score matrix")
    p.add_argument("--scores", required=True)
    p.add_argument("--truth", help="GML file with ground-truth labels")
    p.add_argument("--hidden", help="hidden-entry sidecar as ground truth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("mask", help="hide label entries")
    p.add_argument("--input", required=True)
    p.add_argument("--rho", type=float, required=True,
                   help="percentage of positions kept observed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden-out", required=True)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("split", help="train/test split over instances")
    p.add_argument("--input", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("synth", help="generate a planted dataset")
    p.add_argument("--labels", type=int, required=True)
    p.add_argument("--instances", type=int, required=True)
    p.add_argument("--features", type=int, required=True)
    p.add_argument("--latent-k", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-full", required=True)
    p.add_argument("--out-masked", required=True)
    p.add_argument("--out-hidden", required=True)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
