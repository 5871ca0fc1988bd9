"""Deterministic command-line front end.

Commands: estimate, simulate, fit, power, heatmap, rank, convert-logits.
Every output file starts with a ``# {...}`` manifest line echoing the
resolved configuration; CSV is the default format, JSON via --format.
Exit codes: 0 success, 1 input/config error, 2 numerical/precondition
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager

from . import __version__, _kernels
from .analysis import (
    SimulationConfig,
    bias_heatmap,
    estimate_bias,
    power_test,
    rank_recalibrators,
)
from .data import load_logits, load_scores, to_top1_scores
from .errors import CalbenchError, DataFormatError, PreconditionError
from .estimators import EstimatorSpec, Norm, evaluate, parse_spec
from .fitting import (
    beta_fit_to_dict,
    fit_beta_mle,
    glm_fit_to_dict,
    glm_model_from_dict,
    select_glm_by_aic,
)
from .synthetic import (
    BetaScores,
    GlmCurve,
    IdentityCurve,
    LogisticCurve,
    PowerCurve,
    SyntheticModel,
    UniformScores,
    tce,
)


class UsageError(Exception):
    """Bad command-line input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise UsageError(f"bad numeric list {text!r}") from None


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None


def _parse_dist(text: str):
    name, _, args = text.partition(":")
    if name == "uniform":
        return UniformScores()
    if name == "beta":
        vals = _parse_floats(args)
        if len(vals) != 2:
            raise UsageError("beta distribution takes two parameters, e.g. beta:1.1,0.1")
        try:
            return BetaScores(vals[0], vals[1])
        except PreconditionError as exc:
            raise UsageError(str(exc)) from None
    raise UsageError(f"unknown distribution {text!r} (use uniform or beta:a,b)")


def _parse_curve(text: str):
    name, _, args = text.partition(":")
    try:
        if name == "identity":
            return IdentityCurve()
        if name == "power":
            (d,) = _parse_floats(args) or (None,)
            return PowerCurve(d)
        if name == "logistic":
            vals = _parse_floats(args)
            if len(vals) != 2:
                raise UsageError("logistic curve takes two parameters, e.g. logistic:10,-5")
            return LogisticCurve(vals[0], vals[1])
        if name == "glm":
            model_name, _, params = args.partition(":")
            vals = _parse_floats(params)
            d = {"model_name": model_name}
            d["b0"] = vals.pop(0) if "b0" in model_name and vals else None
            d["b1"] = vals.pop(0) if "b1" in model_name and vals else None
            return GlmCurve(glm_model_from_dict(d))
    except (PreconditionError, TypeError, ValueError) as exc:
        raise UsageError(f"bad curve {text!r}: {exc}") from None
    raise UsageError(f"unknown curve {text!r} (identity, power:d, logistic:a,c0, glm:name:params)")


def _parse_metrics(texts, p: float) -> list[EstimatorSpec]:
    specs = []
    for text in texts:
        try:
            specs.append(parse_spec(text, p))
        except PreconditionError as exc:
            raise UsageError(str(exc)) from None
    return specs


def _manifest(command: str, **params) -> dict:
    out = {"command": command, "version": __version__, "kernel_backend": _kernels.BACKEND}
    out.update(params)
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


@contextmanager
def _out_stream(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _emit(args, manifest: dict, header: list[str], rows: list[tuple]) -> None:
    with _out_stream(args.output) as fh:
        if args.format == "json":
            payload = {
                "manifest": manifest,
                "rows": [dict(zip(header, map(_jsonable, row))) for row in rows],
            }
            fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        else:
            fh.write("# " + json.dumps(manifest, sort_keys=True) + "\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def _spec_cols(spec: EstimatorSpec) -> tuple:
    return (spec.name, spec.bins, spec.norm.p)


def _cmd_estimate(args) -> int:
    metrics = list(args.metric or [])
    if args.bins is not None:
        metrics = [m if ":" in m else f"{m}:{args.bins}" for m in metrics]
    specs = _parse_metrics(metrics or ["em-sweep"], args.p)
    dataset = load_scores(args.scores)
    lines = []
    for spec in specs:
        res = evaluate(spec, dataset)
        if res.bins_used is None:
            lines.append(f"{spec.name},{_fmt(res.value)}")
        else:
            lines.append(f"{spec.name},{_fmt(res.value)},{res.bins_used}")
    manifest = _manifest("estimate", scores=str(args.scores), metrics=metrics, p=args.p)
    with _out_stream(args.output) as fh:
        if args.output not in (None, "-"):
            fh.write("# " + json.dumps(manifest, sort_keys=True) + "\n")
        for line in lines:
            fh.write(line + "\n")
    return 0


def _model_from_args(args):
    if getattr(args, "from_fit", None):
        with open(args.from_fit, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        beta = payload.get("beta")
        glms = payload.get("glms")
        if beta is None:
            raise UsageError(f"{args.from_fit}: no beta fit in file")
        dist = BetaScores(float(beta["alpha"]), float(beta["beta"]))
        if glms:
            curve = GlmCurve(glm_model_from_dict(glms[0]))
        elif args.curve:
            curve = _parse_curve(args.curve)
        else:
            raise UsageError("no GLM fits in file and no --curve given")
        return SyntheticModel(dist, curve)
    return SyntheticModel(_parse_dist(args.dist), _parse_curve(args.curve))


_BIAS_HEADER = ["estimator", "bins", "p", "n", "m", "tce", "mean_ece", "bias",
                "std", "stderr", "mean_bins", "error"]


def _cmd_simulate(args) -> int:
    model = _model_from_args(args)
    if args.tce_only:
        value = tce(model, Norm(args.p))
        with _out_stream(args.output) as fh:
            fh.write(f"{value:.17g}\n")
        return 0
    specs = _parse_metrics(args.metric or ["ew-bin:15"], args.p)
    config = SimulationConfig(model, args.n, args.m, tuple(specs), args.seed)
    reports = estimate_bias(config, threads=args.threads)
    rows = [
        _spec_cols(r.estimator)
        + (r.n, r.m, r.tce, r.mean_ece, r.bias, r.std, r.stderr, r.mean_bins, r.error)
        for r in reports
    ]
    manifest = _manifest(
        "simulate", dist=args.dist, curve=args.curve, from_fit=args.from_fit,
        metrics=args.metric, p=args.p, n=args.n, m=args.m, seed=args.seed,
        threads=args.threads,
    )
    _emit(args, manifest, _BIAS_HEADER, rows)
    return 0


def _cmd_fit(args) -> int:
    if not args.beta and not args.glm:
        raise UsageError("fit requires --beta and/or --glm")
    dataset = load_scores(args.scores)
    payload = {"manifest": _manifest("fit", scores=str(args.scores),
                                     beta=args.beta, glm=args.glm)}
    if args.beta:
        payload["beta"] = beta_fit_to_dict(fit_beta_mle(dataset))
    if args.glm:
        payload["glms"] = [glm_fit_to_dict(f) for f in select_glm_by_aic(dataset)]
    with _out_stream(args.output) as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_power(args) -> int:
    dist = _parse_dist(args.dist)
    (spec,) = _parse_metrics([args.metric], args.p)
    targets = _parse_floats(args.tce)
    report = power_test(dist, spec, args.n, args.alpha, targets,
                        args.m_null, args.m_alt, args.seed, threads=args.threads)
    header = ["estimator", "bins", "p", "n", "alpha", "threshold", "target_tce", "d", "type2"]
    rows = [
        _spec_cols(spec) + (report.n, report.alpha, report.threshold, t, d, t2)
        for t, d, t2 in zip(report.tce_grid, report.d_grid, report.type2)
    ]
    manifest = _manifest(
        "power", dist=args.dist, metric=args.metric, p=args.p, n=args.n,
        alpha=args.alpha, tce=targets, m_null=args.m_null, m_alt=args.m_alt,
        seed=args.seed, threads=args.threads,
    )
    _emit(args, manifest, header, rows)
    return 0


def _cmd_heatmap(args) -> int:
    model = SyntheticModel(_parse_dist(args.dist), _parse_curve(args.curve))
    n_grid = _parse_ints(args.n)
    b_grid = _parse_ints(args.bins)
    kind, _, _ = args.metric.partition(":")
    if kind not in ("ew-bin", "em-bin", "em-debiased"):
        raise UsageError("heatmap metric must be ew-bin, em-bin, or em-debiased")
    cells = bias_heatmap(model, n_grid, b_grid, kind, args.m, args.seed,
                         p=args.p, threads=args.threads)
    header = ["estimator", "p", "n", "b", "tce", "mean_ece", "bias", "std", "stderr", "valid"]
    rows = [
        (kind.replace("-", "_"), args.p, c.n, c.b, c.tce, c.mean_ece, c.bias,
         c.std, c.stderr, c.valid)
        for c in cells
    ]
    manifest = _manifest(
        "heatmap", dist=args.dist, curve=args.curve, metric=args.metric, p=args.p,
        n=n_grid, bins=b_grid, m=args.m, seed=args.seed, threads=args.threads,
    )
    _emit(args, manifest, header, rows)
    return 0


def _cmd_rank(args) -> int:
    records = load_logits(args.logits)
    specs = _parse_metrics(args.metric or ["ew-bin:15", "em-sweep"], args.p)
    entries = rank_recalibrators(
        records, args.val, args.eval, specs, subsample_fraction=args.subsample,
        repeats=args.repeats, seed=args.seed, histogram_bins=args.histogram_bins,
    )
    header = ["phase", "repeat", "metric", "bins", "p", "method", "value",
              "bins_used", "preferred", "tie"]
    rows = [
        (e.phase, e.repeat) + _spec_cols(e.metric)
        + (e.method, e.value, e.bins_used, e.preferred, e.tie)
        for e in entries
    ]
    manifest = _manifest(
        "rank", logits=str(args.logits), val=args.val, eval=args.eval,
        metrics=args.metric, p=args.p, subsample=args.subsample,
        repeats=args.repeats, histogram_bins=args.histogram_bins, seed=args.seed,
    )
    _emit(args, manifest, header, rows)
    return 0


def _cmd_convert_logits(args) -> int:
    records = load_logits(args.logits)
    dataset = to_top1_scores(records, temperature=args.temperature)
    manifest = _manifest("convert-logits", logits=str(args.logits),
                         temperature=args.temperature)
    with _out_stream(args.output) as fh:
        fh.write("# " + json.dumps(manifest, sort_keys=True) + "\n")
        fh.write("score,label\n")
        for s, y in zip(dataset.scores, dataset.labels):
            fh.write(f"{s:.17g},{int(y)}\n")
    return 0


def _add_common(p: argparse.ArgumentParser, *, seed=True, threads=True) -> None:
    p.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--p", type=float, default=2.0, help="L^p norm exponent")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if threads:
        p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="calbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="run estimators on a scores CSV")
    p.add_argument("scores")
    p.add_argument("--metric", action="append", help="kind[:bins], repeatable")
    p.add_argument("--bins", type=int, default=None, help="bin count for fixed-bin metrics")
    _add_common(p, seed=False, threads=False)
    p.set_defaults(fn=_cmd_estimate)

    p = sub.add_parser("simulate", help="Monte-Carlo bias of estimators vs analytic TCE")
    p.add_argument("--dist", default="uniform")
    p.add_argument("--curve", default="identity")
    p.add_argument("--from-fit", default=None, help="build the model from fit JSON")
    p.add_argument("--metric", action="append")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--tce-only", action="store_true", help="print the analytic TCE and exit")
    _add_common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("fit", help="fit Beta score distribution / GLM calibration curves")
    p.add_argument("scores")
    p.add_argument("--beta", action="store_true")
    p.add_argument("--glm", action="store_true")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("power", help="type II error of a miscalibration test")
    p.add_argument("--dist", default="uniform")
    p.add_argument("--metric", default="em-sweep")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--tce", required=True, help="comma-separated target TCEs")
    p.add_argument("--m-null", type=int, default=2000)
    p.add_argument("--m-alt", type=int, default=2000)
    _add_common(p)
    p.set_defaults(fn=_cmd_power)

    p = sub.add_parser("heatmap", help="bias over an (n, bins) grid plus sweep row")
    p.add_argument("--dist", default="uniform")
    p.add_argument("--curve", default="identity")
    p.add_argument("--metric", default="em-bin")
    p.add_argument("--n", required=True, help="comma-separated sample sizes")
    p.add_argument("--bins", required=True, help="comma-separated bin counts")
    p.add_argument("--m", type=int, default=1000)
    _add_common(p)
    p.set_defaults(fn=_cmd_heatmap)

    p = sub.add_parser("rank", help="rank recalibration methods under each metric")
    p.add_argument("--logits", required=True)
    p.add_argument("--val", type=int, required=True)
    p.add_argument("--eval", type=int, required=True)
    p.add_argument("--metric", action="append")
    p.add_argument("--subsample", type=float, default=0.1)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--histogram-bins", type=int, default=15)
    _add_common(p, threads=False)
    p.set_defaults(fn=_cmd_rank)

    p = sub.add_parser("convert-logits", help="logits CSV -> scores CSV (softmax top-1)")
    p.add_argument("logits")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(fn=_cmd_convert_logits)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"calbench: error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"calbench: error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"calbench: error: {exc}", file=sys.stderr)
        return 1
    except CalbenchError as exc:
        print(f"calbench: error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
