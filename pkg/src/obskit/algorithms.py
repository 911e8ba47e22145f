"""FISPO and ORC-DF drivers: iterate stages, rank, classify, terminate."""
from __future__ import annotations

import enum
import time
from dataclasses import asdict, dataclass, field

from obskit.lie import PRUNE_POLICIES, ObsMatrix, fispo_stages, orcdf_stages
from obskit.model import Model, affine_decompose, augment, replicate_for_experiments
from obskit.rank import IncrementalRank, RankConfig, generic_rank
from obskit.symkernel import ExprMatrix, Symbol, SymbolKind

__all__ = [
    "Algorithm",
    "Termination",
    "Verdict",
    "AnalysisOptions",
    "IterationRecord",
    "Report",
    "run_fispo",
    "run_orcdf",
    "classify_variables",
    "analyze",
    "default_kmax",
]


class Algorithm(str, enum.Enum):
    FISPO = "fispo"
    ORCDF = "orcdf"


class Termination(str, enum.Enum):
    FULL_RANK = "FullRank"
    RANK_STAGNATION = "RankStagnation"
    KMAX_REACHED = "KmaxReached"
    TIME_BUDGET = "TimeBudget"


class Verdict(str, enum.Enum):
    OBSERVABLE = "observable"
    IDENTIFIABLE = "identifiable"
    INVERTIBLE = "invertible"
    UNOBSERVABLE = "unobservable"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class AnalysisOptions:
    algorithm: Algorithm = Algorithm.FISPO
    kmax: int | None = None
    stage_time_budget: float | None = None
    total_time_budget: float | None = None
    rank_config: RankConfig = field(default_factory=RankConfig)
    classify_each_stage: bool = True
    multiexp: int = 1
    prune: str = "feedthrough"

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.kmax is not None and self.kmax < 1:
            raise ValueError("kmax must be at least 1")
        for b in (self.stage_time_budget, self.total_time_budget):
            if b is not None and b <= 0:
                raise ValueError("time budgets must be positive")
        if self.multiexp < 1:
            raise ValueError("multiexp must be at least 1")
        if self.prune not in PRUNE_POLICIES:
            raise ValueError(f"prune must be one of {PRUNE_POLICIES}")


@dataclass
class IterationRecord:
    k: int
    rows: int
    pruned: int
    rank: int
    n_k: int
    newly_classified: list[str]
    stage_seconds: float


@dataclass
class Report:
    model: str
    algorithm: str
    options: dict
    iterations: list[IterationRecord]
    verdicts: dict[str, str]
    termination: str
    rank_method: str = ""
    excluded: list[str] = field(default_factory=list)

    @property
    def ranks(self) -> list[int]:
        return [it.rank for it in self.iterations]

    @property
    def rows(self) -> list[int]:
        return [it.rows for it in self.iterations]

    @property
    def final(self) -> IterationRecord:
        return self.iterations[-1]

    def classified(self) -> set[str]:
        good = {Verdict.OBSERVABLE.value, Verdict.IDENTIFIABLE.value, Verdict.INVERTIBLE.value}
        return {k for k, v in self.verdicts.items() if v in good}

    def with_verdict(self, verdict: str) -> set[str]:
        return {k for k, v in self.verdicts.items() if v == verdict}

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "algorithm": self.algorithm,
            "options": self.options,
            "iterations": [asdict(it) for it in self.iterations],
            "verdicts": dict(self.verdicts),
            "termination": self.termination,
        }


class _Timeout(Exception):
    pass


def default_kmax(m: Model) -> int:
    return 2 * (m.n_x + m.n_theta + (m.max_w_bound + 1) * m.n_w)


def _positive(s: Symbol) -> str:
    if s.kind is SymbolKind.PARAMETER:
        return Verdict.IDENTIFIABLE.value
    if s.kind is SymbolKind.UNKNOWN_INPUT:
        return Verdict.INVERTIBLE.value
    return Verdict.OBSERVABLE.value


def classify_variables(M: ExprMatrix, rank: int, unclassified, cfg: RankConfig | None = None) -> set[int]:
    """Column indices among ``unclassified`` whose removal lowers the rank."""
    out = set()
    for j in sorted(unclassified):
        if generic_rank(M.without_column(j), cfg).rank < rank:
            out.add(j)
    return out


def _options_dict(opts: AnalysisOptions, m: Model, kmax: int) -> dict:
    return {
        "kmax": kmax,
        "stage_time_budget": opts.stage_time_budget,
        "total_time_budget": opts.total_time_budget,
        "classify_each_stage": opts.classify_each_stage,
        "multiexp": opts.multiexp,
        "prune": opts.prune if opts.algorithm is Algorithm.ORCDF else None,
        "seed": opts.rank_config.seed,
        "trials": opts.rank_config.trials,
        "u_deriv_bound": {k: ("unbounded" if v is None else v) for k, v in m.u_deriv_bound.items()},
        "w_deriv_bound": dict(m.w_deriv_bound),
        "exclude": sorted(m.excluded),
    }


def _drive(m: Model, opts: AnalysisOptions, make_stages) -> Report:
    kmax = opts.kmax if opts.kmax is not None else default_kmax(m)
    t_start = time.monotonic()
    total_deadline = t_start + opts.total_time_budget if opts.total_time_budget else None
    stage_deadline = [None]

    def check():
        now = time.monotonic()
        if total_deadline is not None and now > total_deadline:
            raise _Timeout
        if stage_deadline[0] is not None and now > stage_deadline[0]:
            raise _Timeout

    ranker = IncrementalRank(opts.rank_config)
    obs = ObsMatrix()
    stages = make_stages(check)
    verdicts: dict[str, str] = {}
    pending: list[Symbol] = []
    records: list[IterationRecord] = []
    termination = None
    prev = None

    def classify(cols_index: dict[Symbol, int]) -> list[str]:
        hits = ranker.observable_columns()
        newly = []
        for s in list(pending):
            if cols_index[s] in hits:
                verdicts[s.name] = _positive(s)
                pending.remove(s)
                newly.append(s.name)
        return newly

    while True:
        t0 = time.monotonic()
        if opts.stage_time_budget:
            stage_deadline[0] = t0 + opts.stage_time_budget
        try:
            stage = next(stages)
            obs.append(stage)
            rank = ranker.add_rows(stage.jacobian, len(stage.basis), check)
        except _Timeout:
            termination = Termination.TIME_BUDGET
            break
        n_k = len(stage.basis)
        known = set(pending) | {s for s in obs.basis if s.name in verdicts}
        for s in stage.basis:
            if s not in known and s.name not in m.excluded:
                pending.append(s)
        index = {s: j for j, s in enumerate(stage.basis)}
        full = rank == n_k
        newly = classify(index) if (opts.classify_each_stage or full) else []
        records.append(
            IterationRecord(stage.k, obs.n_rows, stage.pruned + (records[-1].pruned if records else 0),
                            rank, n_k, newly, time.monotonic() - t0)
        )
        if full:
            termination = Termination.FULL_RANK
            break
        if prev is not None and rank == prev[0] and n_k == prev[1]:
            termination = Termination.RANK_STAGNATION
            break
        if stage.k >= kmax:
            termination = Termination.KMAX_REACHED
            break
        if total_deadline is not None and time.monotonic() > total_deadline:
            termination = Termination.TIME_BUDGET
            break
        prev = (rank, n_k)

    if records and not opts.classify_each_stage and termination is not Termination.FULL_RANK:
        last = records[-1]
        last.newly_classified = classify({s: j for j, s in enumerate(obs.basis)})
    basis = obs.basis
    if not records:
        basis = augment(m, 0).states
        pending = [s for s in basis if s.name not in m.excluded]
    rest = Verdict.UNOBSERVABLE if termination is Termination.RANK_STAGNATION else Verdict.UNDECIDED
    for s in pending:
        verdicts[s.name] = rest.value
    ordered = {s.name: verdicts[s.name] for s in basis if s.name in verdicts}
    return Report(
        model=m.name,
        algorithm=opts.algorithm.value,
        options=_options_dict(opts, m, kmax),
        iterations=records,
        verdicts=ordered,
        termination=termination.value,
        rank_method=ranker.method,
        excluded=sorted(m.excluded),
    )


def run_fispo(m: Model, opts: AnalysisOptions | None = None) -> Report:
    """Extended-Lie-derivative analysis of the augmented system."""
    opts = opts or AnalysisOptions(algorithm=Algorithm.FISPO)
    if opts.algorithm is not Algorithm.FISPO:
        opts = _with(opts, algorithm=Algorithm.FISPO)
    return _drive(m, opts, lambda check: fispo_stages(m, check))


def run_orcdf(m: Model, opts: AnalysisOptions | None = None) -> Report:
    """Branching Lie-derivative analysis for input-affine systems.

    Raises NotAffine before any stage is computed.
    """
    opts = opts or AnalysisOptions(algorithm=Algorithm.ORCDF)
    if opts.algorithm is not Algorithm.ORCDF:
        opts = _with(opts, algorithm=Algorithm.ORCDF)
    dec = affine_decompose(m)
    return _drive(m, opts, lambda check: orcdf_stages(m, opts.prune, check, dec))


def _with(opts: AnalysisOptions, **changes) -> AnalysisOptions:
    data = {k: getattr(opts, k) for k in opts.__dataclass_fields__}
    data.update(changes)
    return AnalysisOptions(**data)


def analyze(m: Model, opts: AnalysisOptions | None = None) -> Report:
    opts = opts or AnalysisOptions()
    if opts.multiexp > 1:
        m = replicate_for_experiments(m, opts.multiexp)
    if opts.algorithm is Algorithm.ORCDF:
        return run_orcdf(m, opts)
    return run_fispo(m, opts)
