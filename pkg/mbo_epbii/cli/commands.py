"""
Experiment runner commands: plan parsing, seeded batch execution, result
summaries and reference-set caching.
"""

import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..algorithms.optimizer import RunRecord, run
from ..core.config import CaseConfig, ExperimentPlan, get_settings
from ..core.exceptions import ConfigError, MBOError
from ..core.utils import log_error, write_matrix_csv
from ..services import metrics
from ..services.problems import get_problem, load_reference_set, reference_set_path

logger = logging.getLogger(__name__)

RECORD_FILE = "record.json"
METRICS_COLUMNS = ["iteration", "n", "hv", "igd_plus", "wall_seconds"]


def parse_config(path: Union[str, Path]) -> ExperimentPlan:
    """Read and fully validate an experiment plan (JSON)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed plan file {path}: {e.msg}", line=e.lineno, column=e.colno)
    try:
        plan = ExperimentPlan.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise ConfigError(first["msg"], field=field)
    for index, case in enumerate(plan.cases):
        for seed in case.seeds:
            try:
                case.optimizer_config(seed)
            except ConfigError as e:
                raise ConfigError(str(e), field=f"cases.{index}.optimizer.{e.field}" if e.field else f"cases.{index}")
    return plan


def _cache_dir(output_dir: Path) -> Path:
    return output_dir / get_settings().pf_cache_dir


def _reference_set(case: CaseConfig, output_dir: Path) -> Optional[np.ndarray]:
    problem = get_problem(case.problem, case.n_obj, case.n_var)
    try:
        count = case.indicators.igd_reference_count or metrics.default_reference_count(case.problem, case.n_obj)
        return load_reference_set(problem, count, case.indicators.igd_reference_seed, _cache_dir(output_dir))
    except MBOError as e:
        logger.warning(f"IGD+ disabled for {case.case_id}: {e}")
        return None


def seed_dir(output_dir: Path, case: CaseConfig, seed: int) -> Path:
    return output_dir / case.case_id / f"seed_{seed}"


def write_run_outputs(record: RunRecord, folder: Path) -> None:
    """record.json, per-iteration metrics.csv and the final NDS archive."""
    folder.mkdir(parents=True, exist_ok=True)
    record.write(folder / RECORD_FILE)
    rows = [[it.iteration, it.n, it.hypervolume, it.igd_plus, it.wall_seconds] for it in record.iterations]
    pd.DataFrame(rows, columns=METRICS_COLUMNS).to_csv(folder / "metrics.csv", index=False, lineterminator="\n")
    write_matrix_csv(folder / "nds_archive.csv", record.nds_objectives())


def run_case_seed(case: CaseConfig, seed: int, output_dir: Union[str, Path]) -> Tuple[str, int, Optional[str]]:
    """Execute one (case, seed) run and persist it; returns an error message on failure."""
    output_dir = Path(output_dir)
    try:
        problem = get_problem(case.problem, case.n_obj, case.n_var)
        folder = seed_dir(output_dir, case, seed)
        record = run(problem, case.optimizer_config(seed), case.indicators,
                     _reference_set(case, output_dir), dump_dir=folder)
        write_run_outputs(record, folder)
        return case.case_id, seed, None
    except Exception as e:
        log_error(e, f"run {case.case_id} seed {seed}")
        return case.case_id, seed, str(e)


def load_records(case_dir: Path) -> Tuple[List[RunRecord], int]:
    """Records of one case directory in seed order; corrupt files are skipped."""
    records, skipped = [], 0
    for path in sorted(case_dir.glob(f"seed_*/{RECORD_FILE}")):
        try:
            records.append(RunRecord.from_json(path.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            logger.warning(f"Skipping corrupt record {path}: {e}")
            skipped += 1
    records.sort(key=lambda r: r.seed)
    return records, skipped


def summary_table(records: List[RunRecord]) -> pd.DataFrame:
    """Final-indicator statistics across seeds (mean, std, min, max)."""
    rows = []
    for name, values in (("hv", [r.final.hypervolume for r in records]),
                         ("igd_plus", [r.final.igd_plus for r in records])):
        values = [v for v in values if v is not None]
        if not values:
            continue
        s = metrics.summarize(values)
        rows.append({"indicator": name, "mean": s.mean, "std": s.std, "min": s.min, "max": s.max,
                     "runs": len(values)})
    return pd.DataFrame(rows, columns=["indicator", "mean", "std", "min", "max", "runs"])


def convergence_table(records: List[RunRecord]) -> pd.DataFrame:
    """Per-iteration hypervolume mean with 25th and 75th percentiles across seeds."""
    frame = pd.DataFrame([{"iteration": it.iteration, "n": it.n, "hv": it.hypervolume}
                          for r in records for it in r.iterations])
    grouped = frame.groupby(["iteration", "n"])["hv"]
    table = pd.DataFrame({
        "hv_mean": grouped.mean(),
        "hv_p25": grouped.quantile(0.25),
        "hv_p75": grouped.quantile(0.75),
    }).reset_index()
    return table


def write_case_tables(case_dir: Path) -> None:
    records, _ = load_records(case_dir)
    if not records:
        return
    summary_table(records).to_csv(case_dir / "summary.csv", index=False, lineterminator="\n")
    convergence_table(records).to_csv(case_dir / "convergence.csv", index=False, lineterminator="\n")


def ensure_writable(output_dir: Path) -> None:
    """Create the output directory and check that files can be written into it."""
    marker = output_dir / ".write_check"
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        marker.write_text("", encoding="utf-8")
        marker.unlink()
    except OSError as e:
        raise ConfigError(f"output directory {output_dir} is not writable: {e}", field="output_dir")


def run_plan(plan: ExperimentPlan, workers: Optional[int] = None) -> int:
    """Run every (case, seed) of the plan; returns 0 when all runs succeeded.

    A case's summary tables are written as soon as its last seed finishes.
    """
    output_dir = Path(plan.output_dir)
    ensure_writable(output_dir)
    workers = workers or plan.workers or get_settings().workers
    tasks = [(case, seed) for case in plan.cases for seed in case.seeds]
    pending = Counter(case.case_id for case, _ in tasks)
    logger.info(f"Running {len(tasks)} runs on {workers} worker(s) into {output_dir}")

    results = []

    def _finish(result: Tuple[str, int, Optional[str]]) -> None:
        results.append(result)
        case_id = result[0]
        pending[case_id] -= 1
        if pending[case_id] == 0:
            write_case_tables(output_dir / case_id)
            logger.info(f"Case {case_id} complete")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_case_seed, case, seed, output_dir) for case, seed in tasks]
            for future in as_completed(futures):
                _finish(future.result())
    else:
        for case, seed in tasks:
            _finish(run_case_seed(case, seed, output_dir))

    failures = sorted((case_id, seed, message) for case_id, seed, message in results if message is not None)
    for case_id, seed, message in failures:
        logger.error(f"Run {case_id} seed {seed} failed: {message}")
    return 1 if failures else 0


def _mode_label(record: RunRecord) -> str:
    return "srva" if record.reference_mode == "adaptive" else "sld-baseline"


def report(output_dir: Union[str, Path]) -> int:
    """Print per-case summaries and the SRVA - SLD final-HV difference.

    Returns 0 on complete data, 1 when nothing was found and 2 when corrupt
    records were skipped.
    """
    output_dir = Path(output_dir)
    case_dirs = sorted(p for p in output_dir.iterdir() if p.is_dir() and any(p.glob(f"seed_*/{RECORD_FILE}"))) \
        if output_dir.is_dir() else []
    if not case_dirs:
        print(f"No completed runs found in {output_dir}")
        return 1

    rows = []
    skipped_total = 0
    final_hv: Dict[Tuple[str, int], Dict[str, float]] = {}
    for case_dir in case_dirs:
        records, skipped = load_records(case_dir)
        skipped_total += skipped
        if not records:
            continue
        table = summary_table(records).set_index("indicator")
        mode = _mode_label(records[0])
        row = {"case": case_dir.name, "problem": records[0].problem, "M": records[0].n_obj, "mode": mode,
               "runs": len(records)}
        for name in ("hv", "igd_plus"):
            if name in table.index:
                row[f"{name}_mean"] = table.loc[name, "mean"]
                row[f"{name}_std"] = table.loc[name, "std"]
        rows.append(row)
        final_hv.setdefault((records[0].problem, records[0].n_obj), {})[mode] = table.loc["hv", "mean"]

    print(pd.DataFrame(rows).to_string(index=False))
    deltas = [{"problem": problem, "M": n_obj, "hv_srva": modes["srva"], "hv_sld": modes["sld-baseline"],
               "delta": modes["srva"] - modes["sld-baseline"]}
              for (problem, n_obj), modes in sorted(final_hv.items())
              if "srva" in modes and "sld-baseline" in modes]
    if deltas:
        print()
        print(pd.DataFrame(deltas).to_string(index=False))
    if skipped_total:
        logger.warning(f"{skipped_total} corrupt record(s) skipped")
        return 2
    return 0


def pf_cache(problem_name: str, n_obj: int, count: int, seed: int,
             cache_dir: Optional[Union[str, Path]] = None, n_var: int = 10) -> Path:
    """Generate (or reuse) the cached Pareto-front reference cloud."""
    cache_dir = Path(cache_dir or get_settings().pf_cache_dir)
    problem = get_problem(problem_name, n_obj, n_var)
    load_reference_set(problem, count, seed, cache_dir)
    return reference_set_path(cache_dir, problem, count, seed)
