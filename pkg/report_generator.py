"""
Report files for an evaluation run: the per-task results table, per-metric
plot data (mean and std per model), a markdown summary and a run manifest.
"""
import json
import logging
import os
from typing import Dict, List, Optional

import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from errors import ExperimentError
from experiment import METRIC_NAMES, RunReport

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")
MISSING = "NA"


def _fmt(value: float) -> str:
    return f"{value:.4f}"


class ReportGenerator:
    """
    Writes report files for finished (or stored) runs.
    """

    def __init__(self, template_dir: str = TEMPLATE_DIR):
        self.env = Environment(
            loader=FileSystemLoader(template_dir),
            undefined=StrictUndefined,
            keep_trailing_newline=True,
            trim_blocks=True,
            lstrip_blocks=True,
        )

    def results_table(self, report: RunReport) -> pd.DataFrame:
        """l_w plus one column per (metric, model); means to 4 decimals, NA for absent cells."""
        rows = []
        for l_w in report.lw_values:
            row = {"l_w": str(l_w)}
            for metric in METRIC_NAMES:
                for kind in report.models:
                    cell = report.cells.get((l_w, kind))
                    ok = cell is not None and not cell.absent
                    row[f"{metric}_{kind.value}"] = _fmt(cell.mean(metric)) if ok else MISSING
            rows.append(row)
        return pd.DataFrame(rows, columns=["l_w"] + [f"{m}_{k.value}" for m in METRIC_NAMES for k in report.models])

    def plot_data(self, report: RunReport, metric: str) -> pd.DataFrame:
        """l_w, then <model>_mean and <model>_std for each model."""
        columns = ["l_w"]
        for kind in report.models:
            columns += [f"{kind.value}_mean", f"{kind.value}_std"]
        rows = []
        for l_w in report.lw_values:
            row = {"l_w": l_w}
            for kind in report.models:
                cell = report.cells.get((l_w, kind))
                if cell is None or cell.absent:
                    row[f"{kind.value}_mean"] = None
                    row[f"{kind.value}_std"] = None
                else:
                    row[f"{kind.value}_mean"] = cell.mean(metric)
                    row[f"{kind.value}_std"] = cell.std(metric)
            rows.append(row)
        return pd.DataFrame(rows, columns=columns)

    def render_markdown(self, report: RunReport) -> str:
        tables = []
        for metric in METRIC_NAMES:
            rows = []
            for l_w in report.lw_values:
                values = []
                for kind in report.models:
                    cell = report.cells.get((l_w, kind))
                    if cell is None or cell.absent:
                        values.append(MISSING)
                    else:
                        values.append(f"{_fmt(cell.mean(metric))} ± {_fmt(cell.std(metric))}")
                rows.append({"l_w": l_w, "values": values})
            tables.append({"metric": metric, "rows": rows})

        absent = [
            {"l_w": l_w, "model": kind.value, "reason": cell.absent_reason}
            for (l_w, kind), cell in sorted(report.cells.items(), key=lambda item: (item[0][0], item[0][1].value))
            if cell.absent
        ]
        repeats = max((len(c.repeats) for c in report.cells.values()), default=0)
        template = self.env.get_template("report.md.j2")
        return template.render(
            task=report.task.value,
            models=[k.value for k in report.models],
            master_seed=report.master_seed,
            repeats=repeats,
            tables=tables,
            absent=absent,
        )

    def emit_report(self, report: RunReport, out_dir: str, config_manifest: Optional[str] = None) -> Dict[str, str]:
        """
        Write every report file for one task.

        Args:
            report: Completed run (absent cells allowed)
            out_dir: Output directory, created if missing
            config_manifest: Resolved configuration JSON for run_manifest.json

        Returns:
            Mapping of artifact name -> written path
        """
        task = report.task.value
        try:
            os.makedirs(out_dir, exist_ok=True)
            paths = {"table": os.path.join(out_dir, f"{task}_table.csv")}
            self.results_table(report).to_csv(paths["table"], index=False)

            for metric in METRIC_NAMES:
                key = f"{metric}_plot"
                paths[key] = os.path.join(out_dir, f"{task}_{metric}_plot.csv")
                self.plot_data(report, metric).to_csv(paths[key], index=False, na_rep=MISSING)

            paths["markdown"] = os.path.join(out_dir, f"{task}_report.md")
            with open(paths["markdown"], "w", encoding="utf-8") as f:
                f.write(self.render_markdown(report))

            paths["manifest"] = os.path.join(out_dir, "run_manifest.json")
            with open(paths["manifest"], "w", encoding="utf-8") as f:
                json.dump(self._manifest(report, config_manifest), f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise ExperimentError(f"cannot write report to {out_dir}: {e}") from e

        logger.info("Wrote %s report to %s", task, out_dir)
        return paths

    @staticmethod
    def _manifest(report: RunReport, config_manifest: Optional[str]) -> Dict:
        cells: List[Dict] = []
        for (l_w, kind), cell in sorted(report.cells.items(), key=lambda item: (item[0][0], item[0][1].value)):
            cells.append({
                "l_w": l_w,
                "model": kind.value,
                "n_samples": cell.n_samples,
                "n_train": cell.n_train,
                "n_test": cell.n_test,
                "repeats": len(cell.repeats),
                "selected_folds": list(cell.selected_folds),
                "absent_reason": cell.absent_reason,
            })
        return {
            "task": report.task.value,
            "models": [k.value for k in report.models],
            "lw_values": list(report.lw_values),
            "master_seed": report.master_seed,
            "seeds": report.seeds,
            "cells": cells,
            "config": json.loads(config_manifest) if config_manifest else None,
        }


def emit_report(report: RunReport, out_dir: str, config_manifest: Optional[str] = None) -> Dict[str, str]:
    return ReportGenerator().emit_report(report, out_dir, config_manifest)
