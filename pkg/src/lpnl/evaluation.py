"""Ranked-retrieval metrics and the end-to-end benchmark loop.

Tasks are single-relevant-item: exactly one candidate is the true
neighbor. With the truth at rank r of the derived ranking:

    Hits@1 = 1 if r == 1 else 0
    MRR    = 1 / r
    NDCG   = 1 / log2(r + 1)

so Hits@1 <= MRR <= NDCG holds on every report. The benchmark masks the
truth edge while predicting — mirroring training-data generation — so a
content-aware scorer cannot be handed the answer through the source's
anchors.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from .graph import EdgeMask, HetGraph
from .prompts import PromptConfig
from .sampling import SamplerConfig
from .scoring import ScorerBackendConfig, make_scorer
from .tournament import RANKING_CONVENTION, DncConfig, predict

logger = logging.getLogger(__name__)

__all__ = [
    "EvalTask",
    "MetricReport",
    "metric_hits1",
    "metric_mrr",
    "metric_ndcg",
    "run_benchmark",
    "read_tasks",
]


@dataclass(frozen=True)
class EvalTask:
    source_id: int
    relation: str
    candidate_ids: tuple[int, ...]
    truth_id: int

    def __post_init__(self):
        if self.truth_id not in self.candidate_ids:
            raise ValueError("truth_id must be among candidate_ids")
        if len(set(self.candidate_ids)) != len(self.candidate_ids):
            raise ValueError("candidate_ids contain duplicates")


def _rank_of(ranking: Sequence[int], truth_id: int) -> int:
    try:
        return list(ranking).index(truth_id) + 1
    except ValueError:
        raise ValueError(f"truth {truth_id} is absent from the ranking") from None


def metric_hits1(ranking: Sequence[int], truth_id: int) -> float:
    return 1.0 if _rank_of(ranking, truth_id) == 1 else 0.0


def metric_mrr(ranking: Sequence[int], truth_id: int) -> float:
    return 1.0 / _rank_of(ranking, truth_id)


def metric_ndcg(ranking: Sequence[int], truth_id: int) -> float:
    return 1.0 / math.log2(_rank_of(ranking, truth_id) + 1)


@dataclass(frozen=True)
class MetricReport:
    """Aggregate metrics plus per-task rows and failure accounting.

    ``ndcg``/``mrr``/``hits_at_1`` are means of per-seed means; the std
    fields spread over seeds (zero for a single seed). Failed tasks are
    excluded from aggregates and counted in ``failures``.
    """

    ndcg: float
    mrr: float
    hits_at_1: float
    ndcg_std: float
    mrr_std: float
    hits_at_1_std: float
    rows: tuple[dict, ...]
    seeds: tuple[int, ...]
    tasks: int
    failures: tuple[dict, ...] = field(default_factory=tuple)
    ranking_convention: str = RANKING_CONVENTION

    def validate(self) -> None:
        for name, value in (("ndcg", self.ndcg), ("mrr", self.mrr), ("hits_at_1", self.hits_at_1)):
            if not 0.0 <= value <= 1.0 + 1e-12:
                raise ValueError(f"{name} out of range: {value}")
        if not (self.hits_at_1 <= self.mrr + 1e-12 and self.mrr <= self.ndcg + 1e-12):
            raise ValueError(
                f"metric ordering violated: hits@1={self.hits_at_1} mrr={self.mrr} ndcg={self.ndcg}"
            )

    def to_dict(self) -> dict:
        return {
            "ndcg": self.ndcg,
            "mrr": self.mrr,
            "hits_at_1": self.hits_at_1,
            "ndcg_std": self.ndcg_std,
            "mrr_std": self.mrr_std,
            "hits_at_1_std": self.hits_at_1_std,
            "tasks": self.tasks,
            "seeds": list(self.seeds),
            "failures": list(self.failures),
            "ranking_convention": self.ranking_convention,
            "rows": list(self.rows),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def render_table(self) -> str:
        header = f"{'metric':<10}{'mean':>10}{'std':>10}"
        lines = [header, "-" * len(header)]
        for name, mean, std in (
            ("NDCG", self.ndcg, self.ndcg_std),
            ("MRR", self.mrr, self.mrr_std),
            ("Hits@1", self.hits_at_1, self.hits_at_1_std),
        ):
            lines.append(f"{name:<10}{mean:>10.4f}{std:>10.4f}")
        lines.append(
            f"tasks={self.tasks} seeds={len(self.seeds)} failures={len(self.failures)}"
        )
        return "\n".join(lines)


def _empty_report(seeds: Sequence[int]) -> MetricReport:
    return MetricReport(
        ndcg=0.0, mrr=0.0, hits_at_1=0.0,
        ndcg_std=0.0, mrr_std=0.0, hits_at_1_std=0.0,
        rows=(), seeds=tuple(seeds), tasks=0,
    )


def run_benchmark(
    tasks: Sequence[EvalTask],
    g: HetGraph,
    sampler_cfg: SamplerConfig | None = None,
    prompt_cfg: PromptConfig | None = None,
    scorer_cfg: ScorerBackendConfig | None = None,
    dnc_cfg: DncConfig | None = None,
    seeds: Sequence[int] = (0,),
) -> MetricReport:
    """Predict every task per seed, score the derived rankings, aggregate.

    Each task's truth edge is masked for the whole prediction. The seed
    of the run replaces the sampler's and the tournament's ``rng_seed``
    so repeated seeds measure pipeline variance, not scorer variance.
    An ``oracle_truth`` scorer config is completed with the tasks' own
    ground truth when no truth pairs were supplied. Tasks run concurrently
    up to the backend's in-flight ceiling, sharing one backend instance;
    results are reduced in task order, so reports stay reproducible.
    """
    sampler_cfg = sampler_cfg or SamplerConfig()
    prompt_cfg = prompt_cfg or PromptConfig()
    scorer_cfg = scorer_cfg or ScorerBackendConfig()
    dnc_cfg = dnc_cfg or DncConfig()

    if not tasks:
        logger.warning("no tasks to evaluate; returning an empty report")
        return _empty_report(seeds)

    if scorer_cfg.kind == "oracle_truth" and not scorer_cfg.truth_pairs:
        scorer_cfg = replace(
            scorer_cfg,
            truth_pairs=frozenset((t.source_id, t.truth_id) for t in tasks),
        )
    # one backend for the whole run: its in-flight ceiling, connection pool
    # and cache are global across concurrent tasks
    scorer = make_scorer(scorer_cfg)
    workers = min(scorer.max_in_flight, len(tasks))

    def run_task(args: tuple[int, int, SamplerConfig, DncConfig]) -> tuple[int, int, dict | None, dict | None]:
        seed, task_index, seeded_sampler, seeded_dnc = args
        task = tasks[task_index]
        mask = EdgeMask(
            [
                (task.source_id, task.truth_id, task.relation),
                (task.truth_id, task.source_id, task.relation),
            ]
        )
        try:
            trace = predict(
                g,
                task.source_id,
                task.relation,
                task.candidate_ids,
                seeded_sampler,
                prompt_cfg,
                scorer,
                seeded_dnc,
                mask,
            )
        except Exception as exc:
            logger.warning("task %d failed under seed %d: %s", task_index, seed, exc)
            return seed, task_index, None, {"task": task_index, "seed": seed, "error": str(exc)}
        ndcg = metric_ndcg(trace.ranking, task.truth_id)
        mrr = metric_mrr(trace.ranking, task.truth_id)
        hits = metric_hits1(trace.ranking, task.truth_id)
        row = {
            "task": task_index,
            "seed": seed,
            "source": g.key_of(task.source_id),
            "truth": g.key_of(task.truth_id),
            "predicted": g.key_of(trace.final),
            "rank": _rank_of(trace.ranking, task.truth_id),
            "ndcg": ndcg,
            "mrr": mrr,
            "hits_at_1": hits,
            "scorer_calls": trace.scorer_calls,
        }
        return seed, task_index, row, None

    rows: list[dict] = []
    failures: list[dict] = []
    per_seed: dict[int, list[tuple[float, float, float]]] = {seed: [] for seed in seeds}
    jobs = []
    for seed in seeds:
        seeded_sampler = sampler_cfg.with_seed(seed)
        seeded_dnc = replace(dnc_cfg, rng_seed=seed)
        for task_index in range(len(tasks)):
            jobs.append((seed, task_index, seeded_sampler, seeded_dnc))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_task, jobs))
    else:
        outcomes = [run_task(job) for job in jobs]
    # outcomes arrive in job order, so reports stay byte-identical across runs
    for seed, _, row, failure in outcomes:
        if failure is not None:
            failures.append(failure)
            continue
        per_seed[seed].append((row["ndcg"], row["mrr"], row["hits_at_1"]))
        rows.append(row)

    seed_means = [
        tuple(statistics.fmean(vals[i] for vals in per_seed[seed]) for i in range(3))
        for seed in seeds
        if per_seed[seed]
    ]
    if not seed_means:
        report = _empty_report(seeds)
        return replace(report, failures=tuple(failures))

    def agg(i: int) -> tuple[float, float]:
        values = [m[i] for m in seed_means]
        mean = statistics.fmean(values)
        std = statistics.pstdev(values) if len(values) > 1 else 0.0
        return mean, std

    (ndcg, ndcg_std), (mrr, mrr_std), (hits, hits_std) = agg(0), agg(1), agg(2)
    report = MetricReport(
        ndcg=ndcg, mrr=mrr, hits_at_1=hits,
        ndcg_std=ndcg_std, mrr_std=mrr_std, hits_at_1_std=hits_std,
        rows=tuple(rows), seeds=tuple(seeds), tasks=len(tasks),
        failures=tuple(failures),
    )
    report.validate()
    return report


def read_tasks(path: str, g: HetGraph) -> list[EvalTask]:
    """Read newline-delimited JSON tasks, mapping raw ids to dense ids."""
    tasks: list[EvalTask] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            tasks.append(
                EvalTask(
                    source_id=g.id_of(record["source_id"]),
                    relation=record["relation"],
                    candidate_ids=tuple(g.id_of(c) for c in record["candidate_ids"]),
                    truth_id=g.id_of(record["truth_id"]),
                )
            )
    return tasks
