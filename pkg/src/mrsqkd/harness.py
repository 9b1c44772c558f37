"""Monte Carlo campaign runner, statistics aggregation and CSV output.

Trial seeds derive from the master seed by a counter-based stream, so a
campaign is one deterministic function of its configuration: the same
CampaignConfig always produces byte-identical CSV output, and running
trials on a worker pool yields the same per-trial records as running
them sequentially. Wall-clock timings therefore stay out of the CSV.

A trial counts as *detected* when the run aborts at a verification check
or when it completes with disagreeing raw keys (the users' final key
comparison exposes tampering that the in-protocol checks missed). The
abort fraction alone is reported alongside.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .adversary import TpStrategy
from .engine import Backend, derive_seed
from .protocol import ProtocolConfig, RunStats, RunStatus, run_protocol

CSV_COLUMNS = [
    "trial",
    "n",
    "strategy",
    "status",
    "abort_stage",
    "abort_component",
    "raw_key_len",
    "final_key_len",
    "keys_match",
    "case1_bits",
    "case3_bits",
    "case4_disclosed_bits",
    "cycle_components",
    "chain_components",
    "group1_checks",
    "group1_passed",
    "group2_checks",
    "group2_passed",
    "case4_checks",
    "case4_passed",
    "qubit_total",
]


@dataclass(frozen=True)
class CampaignConfig:
    n: int
    trials: int
    strategy: TpStrategy
    master_seed: int
    backend: Backend = Backend.TABLEAU
    pa_ratio: Fraction = Fraction(1, 2)
    out_path: Optional[str] = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        object.__setattr__(self, "pa_ratio", Fraction(self.pa_ratio))


@dataclass(frozen=True)
class CampaignSummary:
    trials: int
    completed: int
    aborted: int
    abort_rate: float
    mismatched: int
    mismatch_rate: float  # among completed trials
    detection_rate: float  # aborted or mismatched, over all trials
    mean_raw_key_len: float
    mean_final_key_len: float
    empirical_qe: float  # mean raw key length / (2n), completed trials
    group1_checks: int
    group1_passed: int
    group2_checks: int
    group2_passed: int
    case4_checks: int
    case4_passed: int

    def lines(self) -> list[str]:
        def rate(passed: int, total: int) -> str:
            return f"{passed / total:.6f}" if total else "nan"

        return [
            f"trials={self.trials} completed={self.completed} aborted={self.aborted}",
            f"abort_rate={self.abort_rate:.6f}",
            f"mismatch_rate={self.mismatch_rate:.6f}",
            f"detection_rate={self.detection_rate:.6f}",
            f"mean_raw_key_len={self.mean_raw_key_len:.4f}",
            f"mean_final_key_len={self.mean_final_key_len:.4f}",
            f"empirical_qe={self.empirical_qe:.6f}",
            f"group1_pass_rate={rate(self.group1_passed, self.group1_checks)}"
            f" ({self.group1_passed}/{self.group1_checks})",
            f"group2_pass_rate={rate(self.group2_passed, self.group2_checks)}"
            f" ({self.group2_passed}/{self.group2_checks})",
            f"case4_pass_rate={rate(self.case4_passed, self.case4_checks)}"
            f" ({self.case4_passed}/{self.case4_checks})",
        ]


def detected(stats: RunStats) -> bool:
    """Aborted, or completed with a raw-key mismatch."""
    return stats.status is RunStatus.ABORTED or stats.keys_match is False


def run_trial(config: CampaignConfig, trial_index: int) -> RunStats:
    trial_seed = derive_seed(config.master_seed, trial_index)
    run_config = ProtocolConfig(
        n=config.n,
        seed=trial_seed,
        backend=config.backend,
        pa_ratio=config.pa_ratio,
    )
    return run_protocol(run_config, config.strategy, trial_id=trial_index).stats


def _run_trial_star(args: tuple[CampaignConfig, int]) -> RunStats:
    return run_trial(*args)


def run_campaign(config: CampaignConfig) -> tuple[list[RunStats], CampaignSummary]:
    """Execute all trials and aggregate. Writes CSV when out_path is set."""
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            stats = list(
                pool.map(
                    _run_trial_star,
                    ((config, i) for i in range(config.trials)),
                    chunksize=max(1, config.trials // (8 * config.workers)),
                )
            )
    else:
        stats = [run_trial(config, i) for i in range(config.trials)]
    summary = summarize(stats)
    if config.out_path is not None:
        emit_csv(stats, config.out_path)
    return stats, summary


def summarize(stats: Sequence[RunStats]) -> CampaignSummary:
    completed = [s for s in stats if s.status is RunStatus.COMPLETED]
    aborted = len(stats) - len(completed)
    mismatched = sum(1 for s in completed if s.keys_match is False)
    raw_lens = [s.raw_key_len for s in completed if s.raw_key_len is not None]
    final_lens = [s.final_key_len for s in completed if s.final_key_len is not None]
    mean_raw = sum(raw_lens) / len(raw_lens) if raw_lens else float("nan")
    mean_final = sum(final_lens) / len(final_lens) if final_lens else float("nan")
    qubit_total = stats[0].qubit_total if stats else 0
    return CampaignSummary(
        trials=len(stats),
        completed=len(completed),
        aborted=aborted,
        abort_rate=aborted / len(stats),
        mismatched=mismatched,
        mismatch_rate=mismatched / len(completed) if completed else float("nan"),
        detection_rate=(aborted + mismatched) / len(stats),
        mean_raw_key_len=mean_raw,
        mean_final_key_len=mean_final,
        empirical_qe=mean_raw / qubit_total if raw_lens else float("nan"),
        group1_checks=sum(s.group1_checks for s in stats),
        group1_passed=sum(s.group1_passed for s in stats),
        group2_checks=sum(s.group2_checks for s in stats),
        group2_passed=sum(s.group2_passed for s in stats),
        case4_checks=sum(s.case4_checks for s in stats),
        case4_passed=sum(s.case4_passed for s in stats),
    )


def _csv_row(s: RunStats) -> list:
    aborted = s.status is RunStatus.ABORTED
    return [
        s.trial_id,
        s.n,
        s.strategy,
        s.status.value,
        s.abort_stage or "",
        s.abort_component_kind.value if s.abort_component_kind else "",
        "" if aborted else s.raw_key_len,
        "" if aborted else s.final_key_len,
        "" if aborted else str(s.keys_match).lower(),
        s.case1_bits,
        s.case3_bits,
        s.case4_disclosed_bits,
        s.cycle_components,
        s.chain_components,
        s.group1_checks,
        s.group1_passed,
        s.group2_checks,
        s.group2_passed,
        s.case4_checks,
        s.case4_passed,
        s.qubit_total,
    ]


def render_csv(stats: Sequence[RunStats]) -> str:
    """CSV text: mandatory header, one row per trial, LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for s in stats:
        writer.writerow(_csv_row(s))
    return buf.getvalue()


def emit_csv(stats: Sequence[RunStats], path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(stats))
    except OSError as exc:
        raise OSError(f"cannot write campaign CSV to {path!r}: {exc}") from exc


# --------------------------------------------------------------------------
# Analytic detection curves


def detection_curves(xs: Sequence[int]) -> list[tuple[int, float, float]]:
    """Closed-form detection probabilities for comparison plots: the
    measure-and-fake curve 1 - (21/32)^x (x counting shared key bits) and
    the modification curve 1 - (1/2)^x (x counting attacked qubits)."""
    rows = []
    for x in xs:
        if x < 0:
            raise ValueError("curve range must be non-negative")
        rows.append((x, 1.0 - (21.0 / 32.0) ** x, 1.0 - 0.5**x))
    return rows


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
