"""Request/response bodies for the control service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class SetRequest(BaseModel):
    address: str
    value: float | bool | str


class SetReply(BaseModel):
    ok: bool
    address: str
    error: str | None = None


class RenderRequest(BaseModel):
    replay: str
    out: str
    seed: int = 0
    scene: str | None = None
    breath: str | None = None
    duration_s: float | None = Field(default=None, gt=0)


class RenderReply(BaseModel):
    out: str
    duration_s: float
    blocks: int
    fault_count: int
    peak_dbfs: float
    real_time_factor: float
    scene_timeline: list[tuple[float, str]]
    warnings: list[str]


class AnalyzeRequest(BaseModel):
    replay: str
    calibration: str | None = None
    out: str | None = None


class AnalyzeReply(BaseModel):
    rows: int
    out: str | None = None


class CalibrateRequest(BaseModel):
    rest: str
    mvc: str
    out: str


class CalibrateReply(BaseModel):
    out: str
    devices: list[str]
