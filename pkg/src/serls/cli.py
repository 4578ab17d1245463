"""Command-line front end: fit, marginal contributions, and scoring.

Three subcommands, each driven by one JSON config file::

    serls fit     --config cfg.json [--output STEM]
    serls mc      --config cfg.json [--model PATH] [--output STEM]
    serls predict --config cfg.json [--model PATH] [--data PATH] [--output PATH]

Exit codes: 0 success, 1 numerical failure, 2 config or data error.

Data files are comma-separated with a header row, ``.`` decimal point, and
no thousands separators; any non-numeric cell is a hard error.  Every
column other than the outcome and the optional weight column enters the
design, in header order.  The model file is deterministic JSON tagged
``serls-model/1`` that embeds the resolved config, so ``mc`` and
``predict`` can run from the model file alone.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from serls.basis import SplineSpec
from serls.engineered import EngineeredProblem, fit_engineered_ls, fit_objective, score
from serls.errors import (
    InvalidInputError,
    SerlsError,
    SolveError,
)
from serls.marginal import (
    development_report,
    evaluate_on_sample,
    step1_objective,
    uncentered_columns,
)
from serls.model_core import (
    CharacteristicLayout,
    Coefficients,
    ConstraintSet,
    ObservationSet,
    PenaltySpec,
    assemble_design,
)
from serls.robust import RobustConfig, RobustFitResult, fit_robust, winsorized_state

logger = logging.getLogger(__name__)

MODEL_SCHEMA = "serls-model/1"

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


# ---------------------------------------------------------------------------
# Config and data ingestion
# ---------------------------------------------------------------------------


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidInputError("config must be a JSON object")
    return resolve_config(raw)


def resolve_config(raw):
    """Apply defaults and validate the shape of a raw config mapping."""
    cfg = dict(raw)
    for key in ("data_path", "y_column", "output_path"):
        if not cfg.get(key):
            raise InvalidInputError(f"config is missing required key {key!r}")
    cfg.setdefault("weight_column", None)
    cfg.setdefault("characteristics", {})
    cfg.setdefault("constraints", {})
    cfg.setdefault("lambda", 0.0)
    robust = dict(cfg.get("robust") or {})
    robust.setdefault("enabled", False)
    robust.setdefault("m", 1.5)
    robust.setdefault("epsilon", None)
    robust.setdefault("max_iterations", 50)
    cfg["robust"] = robust
    cfg.setdefault("step2", [])
    cfg.setdefault("validation_path", None)
    if not isinstance(cfg["characteristics"], dict):
        raise InvalidInputError("config key 'characteristics' must map names to column lists")
    if not isinstance(cfg["step2"], list):
        raise InvalidInputError("config key 'step2' must be a list")
    return cfg


def read_csv_columns(path):
    """Read a delimited text file into (header, {name: float array}).

    Non-numeric cells are hard errors; silent imputation would corrupt
    the arithmetic downstream.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InvalidInputError(f"cannot read data file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"data file {path} is empty (no header row)") from None
        header = [name.strip() for name in header]
        if len(set(header)) != len(header):
            raise InvalidInputError(f"data file {path} has duplicate column names")
        values = [[] for _ in header]
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidInputError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}"
                )
            for j, cell in enumerate(row):
                try:
                    values[j].append(float(cell))
                except ValueError:
                    raise InvalidInputError(
                        f"{path}:{line_no}: non-numeric value {cell!r} in column "
                        f"{header[j]!r}"
                    ) from None
    columns = {name: np.asarray(vals, dtype=np.float64) for name, vals in zip(header, values)}
    return header, columns


def design_matrix_from_columns(columns, names):
    """Stack named columns (in the given order) behind an intercept column.

    Shared by fit and predict so scores are reproduced bit for bit.
    """
    n = columns[names[0]].shape[0] if names else 0
    x_raw = (
        np.column_stack([columns[name] for name in names])
        if names
        else np.zeros((n, 0))
    )
    return x_raw


def _resolve_column(name, design_columns, what):
    try:
        return design_columns.index(name) + 1
    except ValueError:
        raise InvalidInputError(
            f"{what} references column {name!r} which is not a design column"
        ) from None


def build_constraints(cfg_constraints, design_columns):
    p = len(design_columns)

    def resolve_triplets(block, what):
        triplets = []
        for item in block.get("triplets", []):
            row, col_name, value = item
            triplets.append(
                (int(row), _resolve_column(str(col_name), design_columns, what), float(value))
            )
        return triplets

    eq_block = cfg_constraints.get("equality") or {}
    zero_block = cfg_constraints.get("zero") or {}
    ineq_block = cfg_constraints.get("inequality") or {}
    return ConstraintSet.from_triplets(
        p=p,
        equality=resolve_triplets(eq_block, "equality constraint"),
        equality_targets=[float(t) for t in eq_block.get("targets", [])],
        zero=resolve_triplets(zero_block, "zero constraint"),
        inequality=resolve_triplets(ineq_block, "inequality constraint"),
        n_zero_rows=zero_block.get("rows"),
        n_inequality_rows=ineq_block.get("rows"),
    )


def build_layout(cfg_characteristics, design_columns):
    groups = []
    for name, cols in cfg_characteristics.items():
        indices = [
            _resolve_column(str(c), design_columns, f"characteristic {name!r}") for c in cols
        ]
        groups.append((name, indices))
    return CharacteristicLayout(groups)


def load_problem(cfg, data_path=None):
    """Read the data file and assemble the fitting problem."""
    path = data_path or cfg["data_path"]
    header, columns = read_csv_columns(path)
    y_col = cfg["y_column"]
    if y_col not in columns:
        raise InvalidInputError(f"y column {y_col!r} not found in {path}")
    w_col = cfg["weight_column"]
    if w_col is not None and w_col not in columns:
        raise InvalidInputError(f"weight column {w_col!r} not found in {path}")
    design_columns = [name for name in header if name != y_col and name != w_col]
    n = columns[y_col].shape[0]
    if n < 1:
        raise InvalidInputError(f"data file {path} has no rows")
    obs = ObservationSet(
        y=columns[y_col],
        x_raw=design_matrix_from_columns(columns, design_columns),
        w_raw=None if w_col is None else columns[w_col],
    )
    constraints = build_constraints(cfg["constraints"], design_columns)
    layout = build_layout(cfg["characteristics"], design_columns)
    prob = EngineeredProblem(
        obs=obs,
        design=assemble_design(obs),
        constraints=constraints,
        penalty=PenaltySpec(float(cfg["lambda"])),
    )
    return prob, layout, design_columns, columns


def build_step2_items(cfg, columns, dev_columns=None):
    """Resolve step2 specs against a data table.

    ``domain`` defaults to the development-sample range of the column so
    validation values clamp to the development envelope.
    """
    items = []
    for entry in cfg["step2"]:
        name = entry.get("name") or entry.get("column")
        col = entry.get("column")
        if col is None:
            raise InvalidInputError(f"step2 entry {name!r} is missing 'column'")
        if col not in columns:
            raise InvalidInputError(f"step2 column {col!r} not found in the data")
        domain = entry.get("domain")
        if domain is None:
            base = dev_columns[col] if dev_columns is not None else columns[col]
            lo, hi = float(np.min(base)), float(np.max(base))
            if not lo < hi:
                raise InvalidInputError(
                    f"step2 column {col!r} is constant; supply an explicit domain"
                )
            domain = (lo, hi)
        spec = SplineSpec(
            knots=entry.get("knots", []),
            degree=int(entry.get("degree", 3)),
            domain=tuple(domain),
        )
        items.append((str(name), columns[col], spec))
    return items


# ---------------------------------------------------------------------------
# Model file
# ---------------------------------------------------------------------------


def _json_float(x):
    if x is None or math.isinf(x):
        return None
    return float(x)


def model_payload(fit, cfg, design_columns):
    return {
        "schema": MODEL_SCHEMA,
        "design_columns": list(design_columns),
        "beta": [float(b) for b in fit.beta.beta],
        "lambda": float(cfg["lambda"]),
        "robust_enabled": bool(cfg["robust"]["enabled"]),
        "m": float(cfg["robust"]["m"]) if cfg["robust"]["enabled"] else None,
        "sigma": _json_float(fit.sigma),
        "k": _json_float(fit.k),
        "iterations": int(fit.iterations),
        "converged": bool(fit.converged),
        "degenerate_scale": bool(fit.degenerate_scale),
        "trace": [
            {
                "iteration": rec.iteration,
                "sigma": _json_float(rec.sigma),
                "k": _json_float(rec.k),
                "max_delta": _json_float(rec.max_delta),
            }
            for rec in fit.trace
        ],
        "config": cfg,
    }


def write_json(path, payload):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_model(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"model file {path} is not valid JSON: {exc}") from exc
    if payload.get("schema") != MODEL_SCHEMA:
        raise InvalidInputError(
            f"model file {path} has schema {payload.get('schema')!r}, expected {MODEL_SCHEMA!r}"
        )
    return payload


def fit_state_from_model(payload, obs, design):
    """Rebuild the winsorization byproducts from stored beta and k."""
    beta = Coefficients(np.asarray(payload["beta"], dtype=np.float64))
    if beta.beta.shape[0] != design.p + 1:
        raise InvalidInputError(
            f"model has {beta.beta.shape[0]} coefficients but the data produces "
            f"{design.p + 1} design columns"
        )
    k = payload.get("k")
    k = math.inf if k is None else float(k)
    sigma = payload.get("sigma")
    sigma = math.inf if sigma is None else float(sigma)
    e_star, y_star = winsorized_state(beta.beta, k, obs.y, design.xr)
    return RobustFitResult(
        beta=beta,
        iterations=int(payload.get("iterations", 1)),
        sigma=sigma,
        k=k,
        e_star=e_star,
        y_star=y_star,
        converged=bool(payload.get("converged", True)),
        degenerate_scale=bool(payload.get("degenerate_scale", False)),
        trace=(),
    )


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def constraint_residuals(constraints, beta_vec):
    out = {}
    if constraints.air.shape[0]:
        out["equality_max_abs"] = float(np.max(np.abs(constraints.air @ beta_vec - constraints.iw)))
    if constraints.acr.shape[0]:
        out["zero_max_abs"] = float(np.max(np.abs(constraints.acr @ beta_vec)))
    if constraints.apr.shape[0]:
        out["inequality_max"] = float(np.max(constraints.apr @ beta_vec))
    return out


def coefficient_blocks(beta_vec, layout, design_columns):
    grouped = {}
    used = set()
    for name, cols in layout.groups:
        grouped[name] = {design_columns[c - 1]: float(beta_vec[c]) for c in cols}
        used.update(cols)
    ungrouped = {
        design_columns[j - 1]: float(beta_vec[j])
        for j in range(1, len(design_columns) + 1)
        if j not in used
    }
    return grouped, ungrouped


def render_fit_text(report):
    lines = ["score-engineered fit report", "=" * 60]
    lines.append(f"objective OF            : {report['of']:.10g}")
    lines.append(f"winsorized SSE*         : {report['sse_star']:.10g}")
    lines.append(f"winsorized variance     : {report['rlsv_y']:.10g}")
    lines.append(f"weighted SSE + penalty  : {report['penalized_objective']:.10g}")
    lines.append(f"converged               : {report['converged']}")
    lines.append(f"iterations              : {report['iterations']}")
    lines.append("")
    lines.append(f"intercept               : {report['coefficients']['intercept']:.17g}")
    for name, cols in report["coefficients"]["per_characteristic"].items():
        lines.append(f"characteristic {name}:")
        for col, value in cols.items():
            lines.append(f"    {col:<24s} {value:.17g}")
    if report["coefficients"]["ungrouped"]:
        lines.append("ungrouped columns:")
        for col, value in report["coefficients"]["ungrouped"].items():
            lines.append(f"    {col:<24s} {value:.17g}")
    if report["constraint_residuals"]:
        lines.append("")
        lines.append("constraint satisfaction:")
        for key, value in report["constraint_residuals"].items():
            lines.append(f"    {key:<24s} {value:.3e}")
    if report["uncentered_columns"]:
        lines.append("")
        lines.append(
            "warning: columns with nonzero weighted mean (the intercept is "
            "not a robust outcome mean): " + ", ".join(report["uncentered_columns"])
        )
    if report["trace"]:
        lines.append("")
        lines.append("iteration trace (sigma, k, max |delta beta|):")
        for rec in report["trace"]:
            lines.append(
                f"    {rec['iteration']:>3d}  {rec['sigma']:.6g}  {rec['k']:.6g}  "
                f"{rec['max_delta']:.3e}"
            )
    return "\n".join(lines) + "\n"


def marginal_payload(report):
    return {
        "sample_label": report.sample_label,
        "of": report.of,
        "sse_star": report.sse_star,
        "rlsv_y": report.rlsv_y,
        "step1": [{"characteristic": name, "mci": value} for name, value in report.step1],
        "step2": [{"characteristic": name, "mcii": value} for name, value in report.step2],
    }


def render_mc_text(payloads):
    lines = ["marginal contribution report", "=" * 60]
    for payload in payloads:
        lines.append("")
        lines.append(f"sample: {payload['sample_label']}")
        lines.append(f"    OF     : {payload['of']:.10g}")
        lines.append(f"    SSE*   : {payload['sse_star']:.10g}")
        lines.append(f"    RLSV_y : {payload['rlsv_y']:.10g}")
        if payload["step1"]:
            lines.append("    step I (drop one characteristic):")
            for row in payload["step1"]:
                lines.append(f"        {row['characteristic']:<24s} MCI  = {row['mci']: .10g}")
        if payload["step2"]:
            lines.append("    step II (candidate characteristics):")
            for row in payload["step2"]:
                lines.append(f"        {row['characteristic']:<24s} MCII = {row['mcii']: .10g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_fit(args):
    cfg = load_config(args.config)
    if args.output:
        cfg["output_path"] = args.output
    prob, layout, design_columns, _ = load_problem(cfg)

    if cfg["robust"]["enabled"]:
        rcfg = RobustConfig(
            max_iterations=int(cfg["robust"]["max_iterations"]),
            epsilon=cfg["robust"]["epsilon"],
            m=float(cfg["robust"]["m"]),
        )
        fit = fit_robust(prob, rcfg)
    else:
        coef = fit_engineered_ls(prob)
        e = prob.obs.y - prob.design.xr @ coef.beta
        fit = RobustFitResult(
            beta=coef,
            iterations=1,
            sigma=math.inf,
            k=math.inf,
            e_star=e,
            y_star=prob.obs.y,
            converged=True,
            degenerate_scale=False,
            trace=(),
        )

    sse_star, rlsv, of = step1_objective(fit, prob.obs.w)
    grouped, ungrouped = coefficient_blocks(fit.beta.beta, layout, design_columns)
    flagged = [design_columns[j - 1] for j in uncentered_columns(prob.design, prob.obs.w)]
    stem = cfg["output_path"]
    payload = model_payload(fit, cfg, design_columns)
    fit_report = {
        "of": of,
        "sse_star": sse_star,
        "rlsv_y": rlsv,
        "penalized_objective": fit_objective(prob, fit.beta),
        "coefficients": {
            "intercept": fit.beta.intercept,
            "per_characteristic": grouped,
            "ungrouped": ungrouped,
        },
        "constraint_residuals": constraint_residuals(prob.constraints, fit.beta.beta),
        "uncentered_columns": flagged,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "degenerate_scale": fit.degenerate_scale,
        "trace": payload["trace"],
        "fitted_scores": [float(v) for v in score(prob.design, fit.beta)],
    }
    write_json(stem + ".model.json", payload)
    write_json(stem + ".fit.json", fit_report)
    write_text(stem + ".fit.txt", render_fit_text(fit_report))
    print(f"model written to {stem}.model.json")
    return EXIT_OK


def _locate_model(args, need_config=True):
    """Shared model/config resolution for mc and predict."""
    cfg = None
    if args.config:
        cfg = load_config(args.config)
    model_path = getattr(args, "model", None)
    if model_path is None:
        if cfg is None:
            raise InvalidInputError("either --config or --model is required")
        model_path = cfg["output_path"] + ".model.json"
    payload = load_model(model_path)
    if cfg is None:
        cfg = resolve_config(payload["config"])
    if need_config and args.output:
        cfg["output_path"] = args.output
    return cfg, payload


def cmd_mc(args):
    cfg, payload = _locate_model(args)
    prob, layout, design_columns, dev_columns = load_problem(cfg)
    if design_columns != payload["design_columns"]:
        raise InvalidInputError(
            "data design columns do not match the model "
            f"({design_columns} vs {payload['design_columns']})"
        )
    fit = fit_state_from_model(payload, prob.obs, prob.design)
    step2_items = build_step2_items(cfg, dev_columns, dev_columns)
    reports = [development_report(fit, prob, layout, step2_items)]

    if cfg["validation_path"]:
        header, val_columns = read_csv_columns(cfg["validation_path"])
        y_col = cfg["y_column"]
        w_col = cfg["weight_column"]
        missing = [c for c in design_columns + [y_col] if c not in val_columns]
        if missing:
            raise InvalidInputError(
                f"validation file is missing columns: {', '.join(missing)}"
            )
        val_obs = ObservationSet(
            y=val_columns[y_col],
            x_raw=design_matrix_from_columns(val_columns, design_columns),
            w_raw=None if w_col is None else val_columns[w_col],
        )
        val_design = assemble_design(val_obs)
        val_items = build_step2_items(cfg, val_columns, dev_columns)
        reports.append(evaluate_on_sample(fit, val_obs, val_design, layout, val_items))

    payloads = [marginal_payload(r) for r in reports]
    stem = cfg["output_path"]
    mc_json = {
        "development": payloads[0],
        "validation": payloads[1] if len(payloads) > 1 else None,
    }
    write_json(stem + ".mc.json", mc_json)
    write_text(stem + ".mc.txt", render_mc_text(payloads))
    print(f"marginal contributions written to {stem}.mc.json")
    return EXIT_OK


def cmd_predict(args):
    cfg, payload = _locate_model(args, need_config=False)
    data_path = args.data or cfg["data_path"]
    header, columns = read_csv_columns(data_path)
    design_columns = payload["design_columns"]
    missing = [c for c in design_columns if c not in columns]
    if missing:
        raise InvalidInputError(f"data file is missing model columns: {', '.join(missing)}")
    known = set(design_columns) | {cfg.get("y_column"), cfg.get("weight_column")}
    extra = [c for c in header if c not in known]
    if extra:
        logger.warning("ignoring columns not used by the model: %s", ", ".join(extra))

    n = columns[header[0]].shape[0] if header else 0
    out_path = args.output or (cfg["output_path"] + ".scored.csv")
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    if n == 0:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerow(header + ["score"])
        print(f"scored 0 rows to {out_path}")
        return EXIT_OK

    x_raw = design_matrix_from_columns(columns, design_columns)
    obs = ObservationSet(y=np.zeros(n), x_raw=x_raw)
    design = assemble_design(obs)
    beta = Coefficients(np.asarray(payload["beta"], dtype=np.float64))
    if beta.beta.shape[0] != design.p + 1:
        raise InvalidInputError(
            f"model has {beta.beta.shape[0]} coefficients but the data produces "
            f"{design.p + 1} design columns"
        )
    scores = score(design, beta)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header + ["score"])
        for i in range(n):
            writer.writerow([repr(float(columns[name][i])) for name in header] + [repr(float(scores[i]))])
    print(f"scored {n} rows to {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="serls",
        description="score-engineered least squares with a robust variant "
        "and marginal-contribution reporting",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed for fixture-generation tooling (the fitting pipeline itself "
        "is deterministic and never draws random numbers)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model and write model + report files")
    fit.add_argument("--config", required=True)
    fit.add_argument("--output", default=None, help="override config output_path")
    fit.set_defaults(func=cmd_fit)

    mc = sub.add_parser("mc", help="marginal contribution report for a fitted model")
    mc.add_argument("--config", default=None)
    mc.add_argument("--model", default=None, help="model file (default: <output_path>.model.json)")
    mc.add_argument("--output", default=None, help="override config output_path")
    mc.set_defaults(func=cmd_mc)

    predict = sub.add_parser("predict", help="append a score column to a data file")
    predict.add_argument("--config", default=None)
    predict.add_argument("--model", default=None)
    predict.add_argument("--data", default=None, help="override config data_path")
    predict.add_argument("--output", default=None, help="scored CSV path")
    predict.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolveError, SerlsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
