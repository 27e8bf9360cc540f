"""
Optimization plumbing shared by every fitting and training loop.

- CodeParameters turns a LatentCode into Adam-trainable tensors, one group per
  parameter kind, with the camera scale parameterized as s0 * (1 + rho).
- run_stage drives one Adam stage, keeps the best-so-far checkpoint, records a
  loss trace and aborts with FittingDivergedError on a non-finite loss.
"""

import csv
import logging
import math
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import torch
from torch import Tensor, nn
from tqdm import tqdm

from ..common.errors import FittingDivergedError
from ..losses.weights import LossReport
from .code import LatentCode
from .config import OptimizerConfig

logger = logging.getLogger(__name__)

MIN_SCALE_RATIO = -0.99


class CodeParameters:
    """Trainable tensors behind one LatentCode"""

    def __init__(self, init: LatentCode, free_joints: Sequence[int] | None = None, shape: Tensor | None = None) -> None:
        self.jaw = init.jaw
        self.scale0 = init.scale.detach().clone()
        self.detail = init.detail.detach().clone()
        self.shape = shape if shape is not None else nn.Parameter(init.shape.detach().clone())
        self.expression = nn.Parameter(init.expression.detach().clone())
        self.pose = nn.Parameter(init.pose.detach().clone())
        self.albedo = nn.Parameter(init.albedo.detach().clone())
        self.light = nn.Parameter(init.light.detach().clone())
        self.scale = nn.Parameter(torch.zeros((), dtype=init.scale.dtype))
        self.translation = nn.Parameter(init.translation.detach().clone())
        if free_joints is not None:
            mask = torch.zeros_like(self.pose)
            for joint in free_joints:
                mask[3 * joint : 3 * joint + 3] = 1.0
            self.pose.register_hook(lambda grad: grad * mask)

    def groups(self) -> dict[str, Tensor]:
        return {
            "shape": self.shape,
            "expression": self.expression,
            "pose": self.pose,
            "albedo": self.albedo,
            "light": self.light,
            "scale": self.scale,
            "translation": self.translation,
        }

    def code(self) -> LatentCode:
        scale = self.scale0 * (1.0 + torch.clamp(self.scale, min=MIN_SCALE_RATIO))
        return LatentCode(
            shape=self.shape,
            pose=self.pose,
            expression=self.expression,
            albedo=self.albedo,
            light=self.light,
            scale=scale,
            translation=self.translation,
            detail=self.detail,
            jaw=self.jaw,
        )

    def snapshot(self) -> dict[str, Tensor]:
        return {name: t.detach().clone() for name, t in self.groups().items()}

    def restore(self, snapshot: dict[str, Tensor]) -> None:
        with torch.no_grad():
            for name, t in self.groups().items():
                t.copy_(snapshot[name])

    def final_code(self) -> LatentCode:
        with torch.no_grad():
            return self.code().clone()


def param_groups(groups: dict[str, Tensor], learning_rates: dict[str, float], frozen: Sequence[str]) -> list[dict]:
    """Adam groups for the trainable tensors; frozen or zero-rate groups are left out"""
    seen: set[int] = set()
    out = []
    for name, tensor in groups.items():
        if name in frozen or learning_rates.get(name, 0.0) <= 0 or id(tensor) in seen:
            continue
        seen.add(id(tensor))
        out.append({"params": [tensor], "lr": learning_rates[name], "name": name})
    return out


def build_optimizer(groups: list[dict], config: OptimizerConfig, iterations: int):
    if not groups:
        return None, None
    optimizer = torch.optim.Adam(groups, betas=config.betas, eps=config.eps)
    if config.schedule == "cosine":
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=max(iterations, 1))
    else:
        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, lambda _: 1.0)
    return optimizer, scheduler


class TraceRecorder:
    """One row per evaluated iteration: stage, iteration, every term, total, best"""

    def __init__(self) -> None:
        self.rows: list[dict[str, Any]] = []

    def record(self, stage: str, iteration: int, values: dict[str, float], best: float) -> None:
        row: dict[str, Any] = {"stage": stage, "iteration": iteration}
        row.update(values)
        row["best"] = best
        self.rows.append(row)

    def column(self, name: str, stage: str | None = None) -> list[float]:
        return [row[name] for row in self.rows if name in row and (stage is None or row["stage"] == stage)]

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        columns: list[str] = []
        for row in self.rows:
            columns += [key for key in row if key not in columns]
        with path.open("w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=columns)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({key: repr(value) if isinstance(value, float) else value for key, value in row.items()})
        return path


def run_stage(
    stage: str,
    objective: Callable[[], LossReport],
    parameters: list[dict],
    optimizer_config: OptimizerConfig,
    iterations: int,
    snapshot: Callable[[], Any],
    restore: Callable[[Any], None],
    trace: TraceRecorder,
    checkpoint: Callable[[Any], Any] | None = None,
    log_every: int = 100,
    progress: bool = False,
) -> LossReport:
    """
    Minimize objective() with Adam for `iterations` steps and restore the best iterate.

    The iterate after the last step is evaluated too, so the returned report is the
    best of iterations + 1 evaluations.
    """
    optimizer, scheduler = build_optimizer(parameters, optimizer_config, iterations)
    best_value = math.inf
    best_state = snapshot()
    best_report: LossReport | None = None
    for iteration in tqdm(range(iterations + 1), desc=stage, disable=not progress, leave=False):
        report = objective()
        total = report.total
        value = float(total.detach())
        if not math.isfinite(value):
            trace.record(stage, iteration, report.values(), best_value)
            logger.error("stage %s diverged at iteration %d", stage, iteration)
            raise FittingDivergedError(
                f"non-finite loss in stage {stage!r} at iteration {iteration}",
                trace=trace.rows,
                checkpoint=checkpoint(best_state) if checkpoint else best_state,
            )
        if value < best_value:
            best_value, best_state, best_report = value, snapshot(), report.detached()
        trace.record(stage, iteration, report.values(), best_value)
        if log_every and iteration % log_every == 0:
            logger.debug("%s %d: %s", stage, iteration, report.values())
        if iteration == iterations or optimizer is None or not total.requires_grad:
            continue
        optimizer.zero_grad(set_to_none=True)
        total.backward()
        optimizer.step()
        scheduler.step()
    restore(best_state)
    logger.info("stage %s: %d iterations, best total %.6g", stage, iterations, best_value)
    return best_report
