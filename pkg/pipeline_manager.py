"""
Stage orchestration for the wildfire spread pipeline.
Chains ingest -> firegraph -> sequence -> neuralnet/experiment through files in
the work directory and reports each stage as a result dictionary.
"""
import json
import logging
import os
from typing import Dict, List, Optional

import numpy as np

from config import ModelKind, RunConfig, Task
from database import ResultsDatabase
from errors import ExperimentError, WildfireError
from experiment import SplitSpec, build_model_spec, compute_metrics, run_experiment, split_indices
from firegraph import build_wildfires, compute_stats, read_wildfires, write_stats, write_wildfires
from ingest import (
    BoundingBox,
    attach_elevation,
    encode_points,
    filter_bbox,
    fit_normalizer,
    load_elevation_lookup,
    parse_detections,
    read_encoded_points,
    write_encoded_points,
)
from neuralnet import NeuralClassifier, save_model, write_loss_history
from report_generator import ReportGenerator
from sequence import balance_binary, build_samples, class_index, n_classes, read_samples, step_view, write_samples

logger = logging.getLogger(__name__)

ENCODED_POINTS_FILE = "encoded_points.csv"
NORMALIZATION_FILE = "normalization.json"
WILDFIRES_FILE = "wildfires.csv"
STATS_FILE = "wildfire_stats.csv"
RESULTS_DB_FILE = "results.db"


def dataset_filename(task: Task, l_w: int) -> str:
    return f"dataset_{Task(task).value}_lw{l_w}.csv"


def model_filename(kind: ModelKind, task: Task, l_w: int) -> str:
    return f"model_{ModelKind(kind).value}_{Task(task).value}_lw{l_w}.npz"


class PipelineManager:
    """
    Runs one pipeline stage per call.

    Every public method returns {"success": bool, "message": str, "stage": str}
    plus the stage's artifacts; errors from the core modules are caught and
    reported, never raised.
    """

    def __init__(self, config: RunConfig):
        """
        Args:
            config: Resolved run configuration
        """
        self.config = config
        self.work_dir = config.work_dir
        self.out_dir = config.out_dir

    def _work_path(self, name: str) -> str:
        return os.path.join(self.work_dir, name)

    def _require(self, path: str, producer: str) -> None:
        if not os.path.isfile(path):
            raise FileNotFoundError(f"{path} not found (run `{producer}` first)")

    def _run(self, stage: str, action) -> Dict:
        result = {"success": False, "message": "", "stage": stage}
        try:
            os.makedirs(self.work_dir, exist_ok=True)
            result.update(action())
            result["success"] = True
        except (WildfireError, OSError) as e:
            logger.error("%s failed: %s", stage, e)
            result["message"] = str(e)
        return result

    def _load_fires(self):
        points_path = self._work_path(ENCODED_POINTS_FILE)
        fires_path = self._work_path(WILDFIRES_FILE)
        self._require(points_path, "ingest")
        self._require(fires_path, "build-fires")
        by_id = {p.point_id: p for p in read_encoded_points(points_path)}
        return read_wildfires(fires_path, by_id)

    def ingest(self, detections_path: Optional[str] = None) -> Dict:
        """Parse, filter, elevation-join and encode the detection file."""
        def action():
            cfg = self.config
            source = detections_path or cfg.detections_path
            if not source:
                raise FileNotFoundError("no detection file configured (detections_path)")
            self._require(source, "synth-gen")
            errors: List = []
            raw = parse_detections(source, cfg.column_map, cfg.strict_parse, cfg.delimiter, errors)
            box = BoundingBox(cfg.bbox_lat_min, cfg.bbox_lat_max, cfg.bbox_lon_min, cfg.bbox_lon_max)
            kept = filter_bbox(raw, box)
            lookup = load_elevation_lookup(cfg.elevation_path, cfg.elevation_decimals) if cfg.elevation_path else None
            kept = attach_elevation(kept, lookup, cfg.elevation_decimals)
            stats = fit_normalizer(kept)
            points = encode_points(kept, stats)

            path = self._work_path(ENCODED_POINTS_FILE)
            write_encoded_points(points, path)
            with open(self._work_path(NORMALIZATION_FILE), "w", encoding="utf-8") as f:
                json.dump(stats.as_dict(), f, indent=2, sort_keys=True)
            return {
                "message": f"ingest: {len(points)} points encoded ({len(raw) - len(kept)} outside box, {len(errors)} rows skipped) -> {path}",
                "path": path,
                "n_points": len(points),
                "n_skipped": len(errors),
            }
        return self._run("ingest", action)

    def build_fires(self) -> Dict:
        def action():
            points_path = self._work_path(ENCODED_POINTS_FILE)
            self._require(points_path, "ingest")
            points = read_encoded_points(points_path)
            fires = build_wildfires(points, self.config.k, self.config.s_r, self.config.t_r)
            path = self._work_path(WILDFIRES_FILE)
            write_wildfires(fires, path)
            return {
                "message": f"build-fires: {len(fires)} wildfires from {len(points)} points -> {path}",
                "path": path,
                "n_fires": len(fires),
            }
        return self._run("build-fires", action)

    def stats(self) -> Dict:
        """Count, mean, std, min and max of the wildfire lengths."""
        def action():
            stats = compute_stats(self._load_fires())
            path = self._work_path(STATS_FILE)
            write_stats(stats, path)
            return {"message": f"stats: {stats.n_fires} wildfires -> {path}", "path": path, "rows": stats.rows()}
        return self._run("stats", action)

    def make_dataset(self, task: Task, lw_values: List[int]) -> Dict:
        def action():
            fires = self._load_fires()
            paths = []
            counts = {}
            for l_w in lw_values:
                samples, skipped = build_samples(fires, task, l_w)
                if Task(task) is Task.BINARY and self.config.balance_binary:
                    samples = balance_binary(samples, self.config.seed)
                path = self._work_path(dataset_filename(task, l_w))
                write_samples(samples, path, task, l_w, skipped)
                paths.append(path)
                counts[l_w] = len(samples)
            summary = ", ".join(f"l_w={lw}: {n}" for lw, n in counts.items())
            return {"message": f"make-dataset: {Task(task).value} samples {summary}", "paths": paths, "counts": counts}
        return self._run("make-dataset", action)

    def train(self, task: Task, l_w: int, kinds: List[ModelKind]) -> Dict:
        """
        Train each model kind once on the 70% split of a dataset file, save the
        checkpoint and loss history, and report test accuracy.
        """
        def action():
            path = self._work_path(dataset_filename(task, l_w))
            self._require(path, "make-dataset")
            X, labels, _ = read_samples(path)
            y = np.array([class_index(task, label) for label in labels], dtype=np.int64)
            train_idx, test_idx = split_indices(len(y), SplitSpec(self.config.test_fraction, self.config.seed))
            X_view = step_view(X, l_w, task)

            accuracies = {}
            checkpoints = []
            for kind in kinds:
                spec = build_model_spec(kind, task, l_w, self.config, self.config.seed)
                classifier = NeuralClassifier(spec, self.config.seed).fit(X_view[train_idx], y[train_idx])
                metrics = compute_metrics(classifier.predict(X_view[test_idx]), y[test_idx], n_classes(task))
                accuracies[ModelKind(kind).value] = metrics.accuracy

                checkpoint = self._work_path(model_filename(kind, task, l_w))
                save_model(classifier.model, checkpoint)
                write_loss_history(classifier.loss_history, checkpoint[:-len(".npz")] + "_loss.csv")
                checkpoints.append(checkpoint)
            summary = ", ".join(f"{k} {v:.4f}" for k, v in accuracies.items())
            return {"message": f"train: {Task(task).value} l_w={l_w} test accuracy {summary}", "paths": checkpoints, "accuracy": accuracies}
        return self._run("train", action)

    def evaluate(
        self,
        task: Task,
        kinds: List[ModelKind],
        lw_values: List[int],
        repeats: int,
        seed: int,
        out_dir: Optional[str] = None,
    ) -> Dict:
        """Full protocol over lw_values; writes the report and stores the run."""
        def action():
            fires = self._load_fires()
            report = run_experiment(fires, task, kinds, lw_values, repeats, seed, self.config, self.config.vary_seeds)
            manifest = self.config.to_manifest()
            paths = ReportGenerator().emit_report(report, out_dir or self.out_dir, manifest)

            db = ResultsDatabase(self._work_path(RESULTS_DB_FILE))
            try:
                run_id = db.record_run(report, manifest)
            finally:
                db.close_connection()
            absent = sum(1 for c in report.cells.values() if c.absent)
            return {
                "message": f"evaluate: {Task(task).value} run {run_id}, {len(lw_values)} l_w rows, {absent} absent cells -> {paths['table']}",
                "paths": paths,
                "run_id": run_id,
                "report": report,
            }
        return self._run("evaluate", action)

    def report(self, task: Task, out_dir: Optional[str] = None) -> Dict:
        """Re-emit report files from the latest stored run of a task."""
        def action():
            db_path = self._work_path(RESULTS_DB_FILE)
            self._require(db_path, "evaluate")
            db = ResultsDatabase(db_path)
            try:
                run_id = db.latest_run_id(task)
                if run_id is None:
                    raise ExperimentError(f"no stored {Task(task).value} run in {db_path}")
                report = db.load_report(run_id)
                manifest = db.get_run_config(run_id)
            finally:
                db.close_connection()
            paths = ReportGenerator().emit_report(report, out_dir or self.out_dir, manifest)
            return {"message": f"report: {Task(task).value} run {run_id} -> {paths['table']}", "paths": paths, "run_id": run_id}
        return self._run("report", action)
