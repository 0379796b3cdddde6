"""
Stage Coordinator - Instantiates the stages, checks upstream artifacts and writes run manifests
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from config.experiment import ExperimentConfig, save_config
from config.settings import settings
from models.stage_result import StageResult
from numerics.errors import LabError, MissingArtifactError
from stages import (
    DNMapStage, ForwardStage, InvertAStage, InvertQStage, InvertSemilinearStage, RungeStage,
    VerifyStage,
)
from stages.base_stage import BaseStage
from utils.hashing import canonical_hash, file_hash
from utils.manifest import RunManifest, read_manifest


class StageCoordinator:
    """Runs single stages against an output directory shared by a chain of commands"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

        self.stages = self._initialize_stages()

        self.processing_stats = {
            "total_runs": 0,
            "passed": 0,
            "failed": 0,
            "total_time": 0.0
        }

        self.logger.info("Stage coordinator initialized with stages: %s", list(self.stages.keys()))

    def _initialize_stages(self) -> Dict[str, BaseStage]:
        """Initialize all pipeline stages"""
        stages = {}
        for stage in (VerifyStage(), ForwardStage(), DNMapStage(), InvertQStage(), InvertAStage(),
                      InvertSemilinearStage(), RungeStage()):
            stages[stage.stage_type] = stage
        return stages

    def _upstream_digests(self, stage: BaseStage, out_dir: Path,
                          experiment: ExperimentConfig) -> Tuple[Dict[str, str], List[str]]:
        """Artifact digests of every required upstream manifest, verifying each listed file"""
        digests = {}
        notes = []
        for required in stage.requires:
            upstream_stage = self.stages[required]
            directory = out_dir / upstream_stage.artifact
            manifest = read_manifest(directory)
            if manifest is None:
                raise MissingArtifactError(f"{upstream_stage.artifact}/manifest.json", stage.stage_type)
            for name, digest in manifest["artifacts"].items():
                path = out_dir / name
                if not path.exists():
                    raise MissingArtifactError(name, stage.stage_type)
                if file_hash(path) != digest:
                    raise MissingArtifactError(f"{name} (content hash changed)", stage.stage_type)
            if manifest["config_hash"] != experiment.config_hash:
                note = f"Upstream '{required}' ran with a different configuration"
                self.logger.warning(note)
                notes.append(note)
            digests[required] = canonical_hash({"config": manifest["config_hash"],
                                                "artifacts": manifest["artifacts"]})
        return digests, notes

    def run_stage(self, stage_name: str, experiment: ExperimentConfig,
                  out_dir: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
                  threads: Optional[int] = None) -> Tuple[StageResult, RunManifest]:
        """
        Run one stage and write its manifest

        Args:
            stage_name: Key of the stage in STAGE_CONFIGS
            experiment: Parsed experiment configuration
            out_dir: Run directory shared with upstream commands
            seed: Noise seed; defaults to the experiment's
            threads: Worker threads for per-source solves

        Returns:
            Tuple of the stage result and the written manifest
        """
        stage = self.stages.get(stage_name)
        if stage is None:
            raise LabError(f"Stage {stage_name} not found")
        out_dir = Path(out_dir or settings.OUTPUT_DIR)
        seed = experiment.noise.seed if seed is None else seed
        threads = threads or settings.THREADS

        upstream, notes = self._upstream_digests(stage, out_dir, experiment)
        context: Dict[str, Any] = {"out_dir": out_dir, "seed": seed, "threads": threads,
                                   "upstream": upstream}
        result = stage.execute(experiment, context)
        for note in notes:
            result.add_warning(note)

        config_path = stage.stage_dir(context) / "config.json"
        save_config(experiment, config_path)
        result.add_artifact(f"{stage.artifact}/config.json", file_hash(config_path))
        stage.save_document(result, context, "metrics.json", result.metrics)

        manifest = RunManifest(
            command=stage_name,
            config_hash=experiment.config_hash,
            artifacts=dict(result.artifacts),
            checks=[check.as_dict() for check in result.checks],
            timings={stage_name: result.processing_time or 0.0},
            upstream=upstream,
            seed=seed,
            threads=threads,
            passed=result.is_successful(),
            errors=list(result.errors),
            warnings=list(result.warnings),
        )
        manifest.write(stage.stage_dir(context))
        self.logger.info("Stage %s finished: %s", stage_name, result.get_summary())

        self.processing_stats["total_runs"] += 1
        self.processing_stats["total_time"] += result.processing_time or 0.0
        if manifest.passed:
            self.processing_stats["passed"] += 1
        else:
            self.processing_stats["failed"] += 1
        return result, manifest

    def get_stage_stats(self) -> Dict[str, Any]:
        """Get statistics of every stage"""
        return {name: stage.get_stats() for name, stage in self.stages.items()}

    def get_processing_stats(self) -> Dict[str, Any]:
        return self.processing_stats.copy()
