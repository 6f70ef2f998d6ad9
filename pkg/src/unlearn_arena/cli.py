"""Command-line front end: single games, the two sweeps, the perfect-
unlearning verifier, the DP utility-collapse demo, and result merging.

Exit codes: 0 success, 1 configuration error, 2 property failure.
All outputs are plain data files written deterministically: a fixed
config and seed produce byte-identical files on every run, at any
degree of trial parallelism.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import distinguishers as dist
from .datasets import DatasetSpec, make_blobs, make_regression, retain_ids, select_forget
from .errors import (
    ArenaError,
    ConfigError,
    MixedSchemaVersions,
    NotPositiveDefinite,
    SingularDowndate,
)
from .game import WHITE_BOX, GameConfig, GameReport, run_game
from .numerics import RngStream, jeffreys_interval
from .schemes import (
    SCHEME_KNN,
    SCHEME_LINREG,
    SCHEME_LOGREG,
    SCHEME_MLP,
    Architecture,
    SchemeConfig,
    init,
    learn,
    infer_batch,
    states_equal,
    utility,
)
from .unlearners import (
    NEWTON_REMOVAL,
    UnlearnerConfig,
    unlearn_knn_delete,
    unlearn_linreg_downdate,
    wrap_dp_oracle,
)

SEED_ENV_VAR = "UNLEARN_ARENA_SEED"

RESULT_SCHEMA = "1"
RESULT_HEADER = ("schema,experiment_id,method,distinguisher,mode,forget_size,"
                 "sigma,trials,wins,success_rate,ci_lo,ci_hi,significant,"
                 "mean_kld_unlearned,mean_kld_control,util_orig,util_control,"
                 "util_unlearned,cost_unlearn,cost_retrain,seed")

DP_DEMO_EPSILONS = (1e2, 1.0, 1e-2, math.log(1.0 + 2.0 ** -32))
DP_DEMO_QUERIES = 1000
DP_DEMO_REPEATS = 16


def f17(x: float) -> str:
    return format(float(x), ".17g")


# -- configuration -----------------------------------------------------------

_SCHEMA = {
    "scheme": {
        "scheme": str, "hidden": str, "epochs": int, "batch_size": int,
        "learning_rate": float, "weight_decay": float, "knn_k": int,
        "ridge": float, "sigma": float,
    },
    "unlearner": {
        "method": str, "ssd_alpha": float, "ssd_lambda": float,
        "bad_teacher_steps": int, "bad_teacher_lr": float,
        "newton_ridge": float, "dp_epsilon": float, "dp_delta": float,
    },
    "distinguisher": {
        "kind": str, "noise_variance": float, "shadow_count": int,
        "calibration_trials": int,
    },
    "game": {
        "mode": str, "trials": int, "security_parameter": int,
        "utility_gap": float, "query_budget": int, "dataset_kind": str,
        "num_classes": int, "dims": int, "spread": float, "train_size": int,
        "test_size": int, "population_size": int, "noise_sd": float,
        "regression_features": int, "forget_strategy": str,
        "forget_size": int, "forget_class": int,
    },
    "sweep": {
        "forget_sizes": str, "sigma_grid": str, "methods": str,
        "distinguishers": str,
    },
    "output": {"directory": str, "master_seed": int},
}


def _parse_value(section: str, key: str, raw: str, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def load_config(path: str) -> dict:
    """Parse and validate the experiment file; unknown keys are rejected."""
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    doc: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        doc[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"[{section}] {key}: unknown key")
            doc[section][key] = _parse_value(section, key, raw,
                                             _SCHEMA[section][key])
    return doc


def _parse_list(raw: str, kind, field: str):
    out = []
    for piece in raw.split(","):
        piece = piece.strip()
        if not piece:
            continue
        try:
            out.append(kind(piece))
        except ValueError as exc:
            raise ConfigError(f"{field}: {exc}") from None
    return out


def build_game_config(doc: dict, trials_override: int | None = None) -> GameConfig:
    scheme = doc.get("scheme", {})
    unl = doc.get("unlearner", {})
    dkind = doc.get("distinguisher", {})
    game = doc.get("game", {})
    out = doc.get("output", {})

    hidden = tuple(_parse_list(scheme.get("hidden", "32,32"), int,
                               "[scheme] hidden"))
    scheme_id = scheme.get("scheme", SCHEME_MLP)
    if scheme_id not in (SCHEME_KNN, SCHEME_LINREG, SCHEME_LOGREG, SCHEME_MLP):
        raise ConfigError(f"[scheme] scheme: unknown scheme {scheme_id!r}")
    if scheme_id != SCHEME_MLP:
        hidden = ()
    scheme_cfg = SchemeConfig(
        epochs=scheme.get("epochs", 30),
        batch_size=scheme.get("batch_size", 32),
        learning_rate=scheme.get("learning_rate", 0.05),
        weight_decay=scheme.get("weight_decay", 5e-4),
        k=scheme.get("knn_k", 1),
        ridge=scheme.get("ridge", 0.0),
        sigma=scheme.get("sigma", 0.0),
    )
    unl_cfg = UnlearnerConfig(
        method=unl.get("method", "amnesiac"),
        ssd_alpha=unl.get("ssd_alpha", 100.0),
        ssd_lambda=unl.get("ssd_lambda", 1.0),
        bad_teacher_steps=unl.get("bad_teacher_steps", 30),
        bad_teacher_lr=unl.get("bad_teacher_lr", 0.05),
        newton_ridge=unl.get("newton_ridge", 0.5),
        dp_epsilon=unl.get("dp_epsilon", 1.0),
        dp_delta=unl.get("dp_delta", 1e-9),
    )
    dataset = DatasetSpec(
        kind=game.get("dataset_kind", "blobs"),
        num_classes=game.get("num_classes", 4),
        dims=game.get("dims", 8),
        spread=game.get("spread", 1.0),
        train_size=game.get("train_size", 1000),
        test_size=game.get("test_size", 500),
        population_size=game.get("population_size", 512),
        noise_sd=game.get("noise_sd", 0.1),
        regression_features=game.get("regression_features", 5),
    )
    trials = trials_override if trials_override is not None else game.get("trials", 128)
    master_seed = out.get("master_seed", 0)
    if SEED_ENV_VAR in os.environ:
        try:
            master_seed = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR}: not an integer") from None
    cfg = GameConfig(
        scheme_id=scheme_id,
        hidden=hidden,
        scheme_cfg=scheme_cfg,
        unlearner_cfg=unl_cfg,
        distinguisher=dkind.get("kind", dist.KLD),
        dataset=dataset,
        forget_strategy=game.get("forget_strategy", "random-subset"),
        forget_size=game.get("forget_size", 30),
        forget_class=game.get("forget_class", 0),
        mode=game.get("mode", WHITE_BOX),
        trials=trials,
        security_parameter=game.get("security_parameter", 128),
        utility_gap=game.get("utility_gap", 0.05),
        query_budget=game.get("query_budget", 10_000),
        noise_variance=dkind.get("noise_variance", dist.DEFAULT_NOISE_VARIANCE),
        shadow_count=dkind.get("shadow_count", 8),
        calibration_trials=dkind.get("calibration_trials", 8),
        master_seed=master_seed,
    )
    try:
        return cfg.validate()
    except ConfigError:
        raise
    except ArenaError as exc:
        raise ConfigError(str(exc)) from None


def output_dir(doc: dict, cli_dir: str | None) -> Path:
    directory = cli_dir or doc.get("output", {}).get("directory", "out")
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- result rows --------------------------------------------------------------

def result_row(experiment_id: str, cfg: GameConfig, report: GameReport) -> str:
    cols = [
        RESULT_SCHEMA,
        experiment_id,
        cfg.unlearner_cfg.method,
        cfg.distinguisher,
        cfg.mode,
        str(cfg.forget_size),
        f17(cfg.scheme_cfg.sigma),
        str(report.completed),
        str(report.wins),
        f17(report.success_rate),
        f17(report.ci_lo),
        f17(report.ci_hi),
        str(report.significant).lower(),
        f17(report.mean_score_unlearned) if cfg.distinguisher == dist.KLD else "nan",
        f17(report.mean_score_control) if cfg.distinguisher == dist.KLD else "nan",
        f17(report.mean_util_orig),
        f17(report.mean_util_control),
        f17(report.mean_util_unlearned),
        f17(report.mean_cost_unlearn),
        f17(report.mean_cost_retrain),
        str(cfg.master_seed),
    ]
    return ",".join(cols)


def write_results(path: Path, rows: list[str]):
    path.write_text(RESULT_HEADER + "\n" + "".join(r + "\n" for r in rows))


def write_trials(path: Path, report: GameReport):
    lines = [json.dumps(asdict(rec), sort_keys=True, separators=(",", ":"))
             for rec in report.records]
    path.write_text("".join(line + "\n" for line in lines))


def write_summary(path: Path, report: GameReport, label: str):
    lines = [
        f"game: {label}",
        f"trials: {report.completed} completed, {report.aborted} aborted",
        f"wins: {report.wins}",
        f"success_rate: {f17(report.success_rate)}",
        f"jeffreys_95: [{f17(report.ci_lo)}, {f17(report.ci_hi)}]",
        f"significant: {str(report.significant).lower()}",
        f"invalid_game: {str(report.invalid_game).lower()}",
        f"flag_failure_rate: {f17(report.flag_failure_rate)}",
        f"mean_utility orig/control/unlearned: {f17(report.mean_util_orig)}"
        f"/{f17(report.mean_util_control)}/{f17(report.mean_util_unlearned)}",
        f"mean_cost unlearn/retrain: {f17(report.mean_cost_unlearn)}"
        f"/{f17(report.mean_cost_retrain)}",
    ]
    path.write_text("".join(line + "\n" for line in lines))


def _experiment_id(cfg: GameConfig) -> str:
    return (f"{cfg.unlearner_cfg.method}_{cfg.distinguisher}_{cfg.mode}"
            f"_f{cfg.forget_size}_sg{cfg.scheme_cfg.sigma:g}_seed{cfg.master_seed}")


# -- commands ------------------------------------------------------------------

def cmd_game(args) -> int:
    doc = load_config(args.config)
    cfg = build_game_config(doc, args.trials)
    report = run_game(cfg, workers=args.workers)
    out = output_dir(doc, args.output)
    label = _experiment_id(cfg)
    write_results(out / "results.csv", [result_row(label, cfg, report)])
    write_trials(out / "trials.jsonl", report)
    write_summary(out / "summary.txt", report, label)
    print(f"{label}: success_rate={f17(report.success_rate)} "
          f"ci=[{f17(report.ci_lo)}, {f17(report.ci_hi)}] "
          f"significant={str(report.significant).lower()} "
          f"invalid={str(report.invalid_game).lower()}")
    return 2 if report.invalid_game else 0


def cmd_sweep_forget(args) -> int:
    doc = load_config(args.config)
    sweep = doc.get("sweep", {})
    sizes = _parse_list(sweep.get("forget_sizes", "3,6,30,60,300"), int,
                        "[sweep] forget_sizes")
    if any(s <= 0 for s in sizes):
        raise ConfigError("[sweep] forget_sizes: sizes must be positive")
    base = build_game_config(doc, args.trials)
    methods = _parse_list(sweep.get("methods", base.unlearner_cfg.method), str,
                          "[sweep] methods")
    kinds = _parse_list(sweep.get("distinguishers", base.distinguisher), str,
                        "[sweep] distinguishers")
    rows, plot, invalid = [], ["method,distinguisher,forget_size,success_rate"], False
    for method in methods:
        for kind in kinds:
            for size in sizes:
                cfg = replace(base, forget_size=size, distinguisher=kind,
                              unlearner_cfg=replace(base.unlearner_cfg,
                                                    method=method)).validate()
                report = run_game(cfg, workers=args.workers)
                invalid = invalid or report.invalid_game
                rows.append(result_row(_experiment_id(cfg), cfg, report))
                plot.append(f"{method},{kind},{size},{f17(report.success_rate)}")
                print(f"{method}/{kind} forget={size}: "
                      f"rate={f17(report.success_rate)} "
                      f"significant={str(report.significant).lower()}")
    out = output_dir(doc, args.output)
    write_results(out / "results.csv", rows)
    (out / "plot_forget_sweep.csv").write_text("".join(r + "\n" for r in plot))
    return 2 if invalid else 0


def cmd_sweep_sigma(args) -> int:
    doc = load_config(args.config)
    sweep = doc.get("sweep", {})
    grid = _parse_list(sweep.get("sigma_grid", "1e-5,1e-4,1e-3,1e-2,1e-1"),
                       float, "[sweep] sigma_grid")
    base = build_game_config(doc, args.trials)
    if base.unlearner_cfg.method != NEWTON_REMOVAL:
        raise ConfigError("[unlearner] method: sigma sweep requires newton-removal")
    rows = []
    plot = ["series,sigma,mean_kld,median_kld"]
    invalid = False
    for sigma in grid:
        cfg = replace(base,
                      scheme_cfg=replace(base.scheme_cfg, sigma=sigma)).validate()
        report = run_game(cfg, workers=args.workers)
        invalid = invalid or report.invalid_game
        rows.append(result_row(_experiment_id(cfg), cfg, report))
        live = [r for r in report.records if r.aborted is None]
        med_u = float(np.median([r.score_unlearned for r in live]))
        med_c = float(np.median([r.score_control for r in live]))
        plot.append(f"unlearned,{f17(sigma)},{f17(report.mean_score_unlearned)},"
                    f"{f17(med_u)}")
        plot.append(f"control,{f17(sigma)},{f17(report.mean_score_control)},"
                    f"{f17(med_c)}")
        print(f"sigma={sigma:g}: median_kld unlearned={f17(med_u)} "
              f"control={f17(med_c)} rate={f17(report.success_rate)}")
    out = output_dir(doc, args.output)
    write_results(out / "results.csv", rows)
    (out / "plot_sigma_sweep.csv").write_text("".join(r + "\n" for r in plot))
    return 2 if invalid else 0


def _verify_case(name: str, ok: bool, detail: str = "") -> tuple[str, bool]:
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] {name}" + (f" ({detail})" if detail else "")
    print(line)
    return line, ok


def cmd_verify_perfect(args) -> int:
    """Perfect-unlearning identity suite: rank-one downdating against
    retraining, k-NN deletion against retraining, and the singular cases."""
    rng = RngStream(args.seed, 0)
    ridge = args.ridge
    fault = args.inject_fault
    all_ok = True

    max_rel = 0.0
    for t in range(100):
        r = rng.child(("reg", t))
        data = make_regression(200, 5, 0.1, r.child("d"))
        arch = Architecture(5, 0)
        st0 = init(SCHEME_LINREG, arch, 128, r.child("i"))
        cfg = SchemeConfig(ridge=ridge)
        st, _, _ = learn(st0, data.view(data.example_ids), cfg, r.child("l"))
        sel = select_forget(data, data.example_ids, "random-subset", 10,
                            r.child("f"))
        down = unlearn_linreg_downdate(st, data, sel.forget_ids)
        if fault == "skip-xty":
            # Faulty variant: downdates the Gram inverse but forgets to
            # remove the targets' contribution.
            from .numerics import sherman_morrison_downdate
            gram_inv = st.gram_inv
            for row in data.rows_for(sel.forget_ids):
                gram_inv = sherman_morrison_downdate(gram_inv, data.features[row])
            down = replace_params(st, gram_inv @ st.xty)
        keep = retain_ids(data.example_ids, sel.forget_ids)
        ret, _, _ = learn(st0, data.view(keep), cfg, r.child("rl"))
        rel = float(np.max(np.abs(down.params - ret.params))
                    / max(1.0, float(np.max(np.abs(ret.params)))))
        max_rel = max(max_rel, rel)
    _, ok = _verify_case("linreg downdate equals retrain on 100 instances",
                         max_rel <= 1e-8, f"max relative error {max_rel:.3e}")
    all_ok &= ok

    bitwise = True
    for t in range(100):
        r = rng.child(("knn", t))
        data = make_blobs(4, 50, 4, 1.0, r.child("d"))
        arch = Architecture(4, 4)
        st0 = init(SCHEME_KNN, arch, 128, r.child("i"))
        st, _, _ = learn(st0, data.view(data.example_ids), SchemeConfig(k=1),
                         r.child("l"))
        sel = select_forget(data, data.example_ids, "random-subset", 20,
                            r.child("f"))
        deleted = unlearn_knn_delete(st, sel.forget_ids)
        keep = retain_ids(data.example_ids, sel.forget_ids)
        ret, _, _ = learn(st0, data.view(keep), SchemeConfig(k=1), r.child("rl"))
        bitwise &= states_equal(deleted, ret)
    _, ok = _verify_case("knn deletion equals retrain bitwise on 100 instances",
                         bitwise)
    all_ok &= ok

    # Singular fixture: forgetting the sole support of a coordinate.
    from .datasets import REGRESSION, Dataset
    sing = Dataset(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                   np.array([1.0, 1.0, 1.0]), REGRESSION, 0, np.arange(3))
    st0 = init(SCHEME_LINREG, Architecture(2, 0), 128, rng.child("si"))
    st, _, _ = learn(st0, sing.view(sing.example_ids), SchemeConfig(ridge=ridge),
                     rng.child("sl"))
    if ridge > 0:
        down = unlearn_linreg_downdate(st, sing, np.array([2]))
        ret, _, _ = learn(st0, sing.view(np.array([0, 1])),
                          SchemeConfig(ridge=ridge), rng.child("sr"))
        rel = float(np.max(np.abs(down.params - ret.params)))
        _, ok = _verify_case("regularized singular fixture unlearns exactly",
                             rel <= 1e-8, f"max error {rel:.3e}")
    else:
        try:
            unlearn_linreg_downdate(st, sing, np.array([2]))
            ok = False
            detail = "expected SingularDowndate"
        except SingularDowndate:
            ok = True
            detail = "SingularDowndate raised"
        _, ok = _verify_case("rank-deficient removal raises SingularDowndate",
                             ok, detail)
    all_ok &= ok
    return 0 if all_ok else 2


def replace_params(state, params):
    from .schemes import ModelState
    return ModelState(state.scheme_id, state.arch, params=params,
                      gram_inv=state.gram_inv, xty=state.xty)


def cmd_demo_dp_collapse(args) -> int:
    """Accuracy of a DP-wrapped classifier as the per-query epsilon shrinks
    toward the negligible regime."""
    doc = load_config(args.config)
    cfg = build_game_config(doc, None)
    root = RngStream(cfg.master_seed, 0).child("dp-demo")
    from .datasets import generate_pools
    data, plan = generate_pools(cfg.dataset, root.child("data"))
    arch = cfg.architecture()
    state0 = init(cfg.scheme_id, arch, cfg.security_parameter,
                  root.child("init"), k=cfg.scheme_cfg.k)
    model, _, _ = learn(state0, data.view(plan.train_ids), cfg.scheme_cfg,
                        root.child("learn"))
    test = data.view(plan.test_ids)
    queries = test.features[:DP_DEMO_QUERIES]
    labels = test.labels[:DP_DEMO_QUERIES]
    if len(queries) < DP_DEMO_QUERIES:
        reps = -(-DP_DEMO_QUERIES // len(queries))
        queries = np.tile(queries, (reps, 1))[:DP_DEMO_QUERIES]
        labels = np.tile(labels, reps)[:DP_DEMO_QUERIES]
    unwrapped = float(np.mean(
        np.argmax(infer_batch(model, queries), axis=1) == labels))
    baseline = 1.0 / arch.num_classes
    lines = ["epsilon_per_query,median_accuracy,baseline,unwrapped"]
    medians = []
    for eps in DP_DEMO_EPSILONS:
        accs = []
        for rep in range(DP_DEMO_REPEATS):
            oracle = wrap_dp_oracle(model, epsilon=eps * DP_DEMO_QUERIES,
                                    delta=cfg.unlearner_cfg.dp_delta,
                                    budget=DP_DEMO_QUERIES,
                                    rng=root.child(("oracle", f17(eps), rep)))
            probs = oracle.infer_batch(queries)
            accs.append(float(np.mean(np.argmax(probs, axis=1) == labels)))
        med = float(np.median(accs))
        medians.append(med)
        lines.append(f"{f17(eps)},{f17(med)},{f17(baseline)},{f17(unwrapped)}")
        print(f"eps/query={eps:.3e}: median_accuracy={f17(med)} "
              f"(baseline={f17(baseline)}, unwrapped={f17(unwrapped)})")
    out = output_dir(doc, args.output)
    (out / "dp_collapse.csv").write_text("".join(r + "\n" for r in lines))
    # Monotone up to the binomial sampling noise of the accuracy estimate
    # (1000 queries, median of 16 repeats).
    slack = 0.01
    monotone = all(a >= b - slack for a, b in zip(medians, medians[1:]))
    collapse = abs(medians[-1] - baseline) <= 0.05
    fidelity = abs(medians[0] - unwrapped) <= 0.02
    ok = monotone and collapse and fidelity
    print(f"monotone={str(monotone).lower()} collapse={str(collapse).lower()} "
          f"fidelity={str(fidelity).lower()}")
    return 0 if ok else 2


def cmd_report(args) -> int:
    """Merge result CSVs, recomputing intervals from raw win counts."""
    root = Path(args.results_dir)
    files = sorted(root.rglob("results.csv"))
    if not files:
        raise ConfigError(f"no results.csv files under {root}")
    header = None
    rows = []
    for path in files:
        lines = path.read_text().splitlines()
        if not lines:
            continue
        if header is None:
            header = lines[0]
        elif lines[0] != header:
            raise MixedSchemaVersions(f"{path} header differs")
        for line in lines[1:]:
            cols = line.split(",")
            if cols[0] != RESULT_SCHEMA:
                raise MixedSchemaVersions(f"{path}: schema {cols[0]!r}")
            rows.append(cols)
    if header != RESULT_HEADER:
        raise MixedSchemaVersions("unrecognized results header")
    groups: dict = {}
    for cols in rows:
        key = (cols[2], cols[3], cols[4], cols[5], cols[6])
        agg = groups.setdefault(key, {"trials": 0, "wins": 0})
        agg["trials"] += int(cols[7])
        agg["wins"] += int(cols[8])
    out_lines = ["method,distinguisher,mode,forget_size,sigma,trials,wins,"
                 "success_rate,ci_lo,ci_hi,significant"]
    for key in sorted(groups):
        agg = groups[key]
        ci = jeffreys_interval(agg["wins"], agg["trials"], 0.95)
        rate = agg["wins"] / agg["trials"]
        out_lines.append(",".join([
            *key, str(agg["trials"]), str(agg["wins"]), f17(rate),
            f17(ci.lo), f17(ci.hi), str(not ci.contains(0.5)).lower()]))
    out = Path(args.output or root)
    out.mkdir(parents=True, exist_ok=True)
    (out / "aggregate.csv").write_text("".join(r + "\n" for r in out_lines))
    print(f"merged {len(rows)} rows from {len(files)} files into "
          f"{len(groups)} config points")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unlearn-arena",
        description="Distinguishing games between unlearned models and "
                    "retrained controls, at desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("config", help="experiment config file")
        p.add_argument("--trials", type=int, default=None,
                       help="override the configured trial count")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel trial processes")
        p.add_argument("--output", default=None,
                       help="override the configured output directory")

    add_common(sub.add_parser("game", help="run one configured game"))
    add_common(sub.add_parser("sweep-forget", help="success rate vs forget size"))
    add_common(sub.add_parser("sweep-sigma", help="KLD score vs removal noise"))

    verify = sub.add_parser("verify-perfect",
                            help="perfect unlearning identity suite")
    verify.add_argument("--ridge", type=float, default=0.0)
    verify.add_argument("--seed", type=int, default=2024)
    verify.add_argument("--inject-fault", default=None,
                        choices=["skip-xty"],
                        help="testing hook: verify the suite catches a bug")

    demo = sub.add_parser("demo-dp-collapse", help="DP utility collapse demo")
    demo.add_argument("config")
    demo.add_argument("--output", default=None)

    report = sub.add_parser("report", help="merge result files")
    report.add_argument("results_dir")
    report.add_argument("--output", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "game": cmd_game,
        "sweep-forget": cmd_sweep_forget,
        "sweep-sigma": cmd_sweep_sigma,
        "verify-perfect": cmd_verify_perfect,
        "demo-dp-collapse": cmd_demo_dp_collapse,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, MixedSchemaVersions) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SingularDowndate, NotPositiveDefinite, ArenaError) as exc:
        print(f"property failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
