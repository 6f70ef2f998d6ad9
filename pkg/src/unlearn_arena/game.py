"""The distinguishing game: challenger, adversary, trials, and reports.

One trial follows the protocol exactly: generate the dataset (the
adversary's choice is realized by the seeded generator), train the
original model, select the forget set, unlearn and retrain a control
with a fresh init stream, flip the bit, present the pair (states in
white-box mode, query-counted oracles in black-box mode), let the
adversary calibrate by self-simulation and guess, then record
utilities, costs, and the anti-trivial-solution flags.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import distinguishers as dist
from .datasets import (
    DatasetSpec,
    generate_pools,
    retain_ids as compute_retain_ids,
    select_forget,
)
from .errors import AllTrialsAborted, ConfigError, SingularDowndate
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
    utility,
)
from .unlearners import (
    DP_ORACLE,
    KNN_DELETE,
    LINREG_DOWNDATE,
    NEWTON_REMOVAL,
    InferenceOracle,
    Unlearner,
    UnlearnerConfig,
    unlearn_retrain,
)

WHITE_BOX = "white-box"
BLACK_BOX = "black-box"

JEFFREYS_LEVEL = 0.95
FLAG_FAILURE_LIMIT = 0.10


@dataclass(frozen=True)
class GameConfig:
    scheme_id: str = SCHEME_MLP
    hidden: tuple[int, ...] = (32, 32)
    scheme_cfg: SchemeConfig = field(default_factory=SchemeConfig)
    unlearner_cfg: UnlearnerConfig = field(default_factory=UnlearnerConfig)
    distinguisher: str = dist.KLD
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    forget_strategy: str = "random-subset"
    forget_size: int = 30
    forget_class: int = 0
    mode: str = WHITE_BOX
    trials: int = 128
    security_parameter: int = 128
    utility_gap: float = 0.05
    query_budget: int = 10_000
    noise_variance: float = dist.DEFAULT_NOISE_VARIANCE
    shadow_count: int = 8
    calibration_trials: int = 8
    master_seed: int = 0

    def validate(self) -> "GameConfig":
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.utility_gap <= 0:
            raise ConfigError("utility_gap must be positive")
        if self.mode not in (WHITE_BOX, BLACK_BOX):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.forget_strategy == "random-subset" and not (
                1 <= self.forget_size < self.dataset.train_size):
            raise ConfigError(
                "forget_size must be a nonempty strict subset of the train set")
        if self.distinguisher == dist.EXACT_MATCH and self.mode != WHITE_BOX:
            raise ConfigError("exact-match needs white-box access")
        if (self.distinguisher in (dist.KLD, dist.MIA)
                and self.scheme_id == SCHEME_LINREG):
            raise ConfigError(
                f"{self.distinguisher} scoring needs a classifier scheme")
        if self.unlearner_cfg.method == DP_ORACLE and self.mode != BLACK_BOX:
            raise ConfigError("dp-oracle only exists in the black-box game")
        wants = {KNN_DELETE: (SCHEME_KNN,), LINREG_DOWNDATE: (SCHEME_LINREG,),
                 NEWTON_REMOVAL: (SCHEME_LOGREG, SCHEME_LINREG)}
        allowed = wants.get(self.unlearner_cfg.method)
        if allowed and self.scheme_id not in allowed:
            raise ConfigError(
                f"method {self.unlearner_cfg.method!r} needs scheme in {allowed}")
        if self.scheme_id == SCHEME_LOGREG and self.hidden:
            raise ConfigError("logreg scheme takes no hidden layers")
        return self

    def architecture(self) -> Architecture:
        if self.scheme_id == SCHEME_LINREG:
            return Architecture(self.dataset.regression_features, 0)
        dims = (self.dataset.dims if self.dataset.kind == "blobs"
                else self.dataset.regression_features)
        hidden = self.hidden if self.scheme_id == SCHEME_MLP else ()
        return Architecture(dims, self.dataset.num_classes, hidden)

    def echo(self) -> dict:
        doc = asdict(self)
        doc["hidden"] = list(self.hidden)
        return doc


@dataclass
class TrialRecord:
    index: int
    bit: int = 0
    guess: int = 0
    win: bool = False
    abstained: bool = False
    score_kind: str = ""
    score_first: float = float("nan")
    score_second: float = float("nan")
    score_unlearned: float = float("nan")
    score_control: float = float("nan")
    rule_kind: str = ""
    rule_degenerate: bool = False
    util_orig: float = float("nan")
    util_control: float = float("nan")
    util_unlearned: float = float("nan")
    cost_learn: int = 0
    cost_unlearn: int = 0
    cost_retrain: int = 0
    utility_gap_ok: bool = True
    cost_ok: bool = True
    aborted: str | None = None


@dataclass
class GameReport:
    config: dict
    trials: int
    completed: int
    aborted: int
    wins: int
    success_rate: float
    ci_lo: float
    ci_hi: float
    significant: bool
    invalid_game: bool
    flag_failure_rate: float
    mean_score_unlearned: float
    mean_score_control: float
    mean_util_orig: float
    mean_util_control: float
    mean_util_unlearned: float
    mean_cost_unlearn: float
    mean_cost_retrain: float
    records: list = field(default_factory=list)


def check_constraints(util_orig: float, util_control: float, cost_unlearn: int,
                      cost_retrain: int, eps_util: float) -> tuple[bool, bool]:
    """Anti-trivial-solution flags: the control must match the original's
    utility, and unlearning must be strictly cheaper than retraining."""
    utility_gap_ok = abs(util_orig - util_control) < eps_util
    cost_ok = cost_unlearn < cost_retrain
    return utility_gap_ok, cost_ok


def _control_scheme_cfg(cfg: GameConfig) -> SchemeConfig:
    # Objective-perturbation noise belongs to the unlearner's training
    # pipeline; the control is retrained with the plain scheme.
    return replace(cfg.scheme_cfg, sigma=0.0)


def run_trial(cfg: GameConfig, trial_index: int, master: RngStream) -> TrialRecord:
    record = TrialRecord(index=trial_index)
    r = master.child(("trial", trial_index))
    try:
        return _run_trial_inner(cfg, record, r)
    except SingularDowndate as exc:
        record.aborted = f"SingularDowndate: {exc}"
        return record


def _run_trial_inner(cfg: GameConfig, record: TrialRecord,
                     r: RngStream) -> TrialRecord:
    arch = cfg.architecture()
    data, plan = generate_pools(cfg.dataset, r.child("data"))
    train_view = data.view(plan.train_ids)
    test_view = data.view(plan.test_ids)

    # Challenger: original model (sigma-perturbed training if configured).
    state0 = init(cfg.scheme_id, arch, cfg.security_parameter,
                  r.child("init"), k=cfg.scheme_cfg.k)
    m_orig, transcript, cost_learn = learn(state0, train_view, cfg.scheme_cfg,
                                           r.child("learn"))

    # Adversary selects the forget set.
    selection = select_forget(data, plan.train_ids, cfg.forget_strategy,
                              cfg.forget_size, r.child("forget"),
                              cfg.forget_class)
    forget_view = data.view(selection.forget_ids)
    retain = compute_retain_ids(plan.train_ids, selection.forget_ids)

    control_cfg = _control_scheme_cfg(cfg)
    unlearner = Unlearner(cfg=cfg.unlearner_cfg, scheme_id=cfg.scheme_id,
                          arch=arch, scheme_cfg=control_cfg,
                          lam=cfg.security_parameter, data=data,
                          train_ids=plan.train_ids,
                          forget_ids=selection.forget_ids,
                          transcript=transcript)

    m_unlearned, cost_unlearn = unlearner.apply(
        m_orig, r.child("unlearn") if unlearner.randomized else None)
    m_control, _, cost_retrain = unlearn_retrain(
        cfg.scheme_id, arch, cfg.security_parameter, data, retain,
        control_cfg, r.child("control"))

    bit = int(r.child("bit").gen.integers(0, 2))
    states = (m_unlearned, m_control) if bit == 1 else (m_control, m_unlearned)
    if cfg.mode == BLACK_BOX:
        dp = cfg.unlearner_cfg.method == DP_ORACLE
        presented = tuple(
            InferenceOracle(
                s, budget=cfg.query_budget,
                epsilon=cfg.unlearner_cfg.dp_epsilon if dp else None,
                delta=cfg.unlearner_cfg.dp_delta if dp else 0.0,
                rng=r.child(("oracle", pos)))
            for pos, s in enumerate(states))
    else:
        presented = states

    adversary = r.child("adversary")
    guess = None
    record.score_kind = cfg.distinguisher
    if cfg.distinguisher == dist.EXACT_MATCH:
        guess = dist.exact_match_guess(m_orig, presented, unlearner)
    else:
        noise_base = r.child("noise")
        if cfg.distinguisher == dist.KLD:
            score_fn = dist.make_kld_scorer(m_orig, forget_view,
                                            cfg.noise_variance, noise_base)
        elif cfg.distinguisher == dist.MIA:
            attack = dist.train_attack_model(
                cfg.scheme_id, arch, control_cfg, data.view(plan.population_ids),
                cfg.shadow_count, adversary.child("attack"))

            def score_fn(m):
                return dist.mia_score(m, forget_view, attack)
        else:
            raise ConfigError(f"unknown distinguisher {cfg.distinguisher!r}")

        def control_fn(stream):
            model, _, _ = unlearn_retrain(cfg.scheme_id, arch,
                                          cfg.security_parameter, data, retain,
                                          control_cfg, stream)
            return model

        rule = dist.calibrate_rule(score_fn, m_orig, unlearner, control_fn,
                                   cfg.calibration_trials, adversary)
        record.rule_kind = rule.kind
        record.rule_degenerate = rule.degenerate
        scores = dist.ScorePair(score_fn(presented[0]), score_fn(presented[1]),
                                cfg.distinguisher)
        record.score_first = scores.first
        record.score_second = scores.second
        record.score_unlearned = scores.first if bit == 1 else scores.second
        record.score_control = scores.second if bit == 1 else scores.first
        guess = dist.decide(rule, scores)

    if guess is None:
        record.abstained = True
        guess = int(r.child("abstain-coin").gen.integers(0, 2))
    record.bit = bit
    record.guess = guess
    record.win = guess == bit

    record.util_orig = utility(m_orig, test_view)
    record.util_control = utility(m_control, test_view)
    record.util_unlearned = utility(m_unlearned, test_view)
    record.cost_learn = cost_learn.units
    record.cost_unlearn = cost_unlearn.units
    record.cost_retrain = cost_retrain.units
    record.utility_gap_ok, record.cost_ok = check_constraints(
        record.util_orig, record.util_control, record.cost_unlearn,
        record.cost_retrain, cfg.utility_gap)
    return record


def _trial_worker(args):
    cfg, index = args
    return run_trial(cfg, index, RngStream(cfg.master_seed, 0))


def run_game(cfg: GameConfig, workers: int = 1) -> GameReport:
    """Run the configured number of independent trials and aggregate.

    Trials own disjoint substreams of the master seed, so any degree of
    parallelism yields a report identical to serial execution.
    """
    cfg.validate()
    master = RngStream(cfg.master_seed, 0)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_trial_worker,
                                    [(cfg, i) for i in range(cfg.trials)],
                                    chunksize=4))
    else:
        records = [run_trial(cfg, i, master) for i in range(cfg.trials)]
    records.sort(key=lambda rec: rec.index)
    live = [rec for rec in records if rec.aborted is None]
    if not live:
        raise AllTrialsAborted(f"all {cfg.trials} trials aborted")
    wins = sum(rec.win for rec in live)
    ci = jeffreys_interval(wins, len(live), JEFFREYS_LEVEL)
    flag_failures = sum(1 for rec in live
                        if not (rec.utility_gap_ok and rec.cost_ok))
    failure_rate = flag_failures / len(live)

    def mean(vals):
        vals = [v for v in vals if np.isfinite(v)]
        return float(np.mean(vals)) if vals else float("nan")

    return GameReport(
        config=cfg.echo(),
        trials=cfg.trials,
        completed=len(live),
        aborted=len(records) - len(live),
        wins=wins,
        success_rate=wins / len(live),
        ci_lo=ci.lo,
        ci_hi=ci.hi,
        significant=not ci.contains(0.5),
        invalid_game=failure_rate > FLAG_FAILURE_LIMIT,
        flag_failure_rate=failure_rate,
        mean_score_unlearned=mean([rec.score_unlearned for rec in live]),
        mean_score_control=mean([rec.score_control for rec in live]),
        mean_util_orig=mean([rec.util_orig for rec in live]),
        mean_util_control=mean([rec.util_control for rec in live]),
        mean_util_unlearned=mean([rec.util_unlearned for rec in live]),
        mean_cost_unlearn=mean([rec.cost_unlearn for rec in live]),
        mean_cost_retrain=mean([rec.cost_retrain for rec in live]),
        records=records,
    )


def report_to_json(report: GameReport) -> str:
    """Canonical serialization; byte-identical for identical configs."""
    doc = asdict(report)
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      allow_nan=True)
