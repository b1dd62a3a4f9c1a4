"""Pydantic request/response models for the service API."""

from __future__ import annotations

from pydantic import BaseModel, Field

MarkedSetB64 = str  # base64 of the MSQSET01 binary format


class HealthResponse(BaseModel):
    status: str
    version: str


class FamilyModel(BaseModel):
    n: int
    k: int
    starts: list[int]


class NoiseModel(BaseModel):
    kind: str = "bernoulli-density"
    density: float = 0.0
    seed: int = 0


class SquareModel(BaseModel):
    order: int
    entries: list[int]  # row-major
    magic_sum: int
    text: str


class ConstructRequest(BaseModel):
    n: int
    k: int
    starts: list[int]


class ValidateRequest(BaseModel):
    entries: list[list[int]]


class ValidateResponse(BaseModel):
    is_magic: bool
    magic_sum: int | None = None


class MarkedSetModel(BaseModel):
    q: int
    b: int
    ones: int
    data_b64: MarkedSetB64


class GensetRequest(BaseModel):
    q: int
    family: FamilyModel | None = None
    indices: list[int] | None = None
    noise: NoiseModel | None = None


class SpectrumRequest(BaseModel):
    set_b64: MarkedSetB64


class SpectrumResponse(BaseModel):
    q: int
    probabilities: list[float]
    csv: str


class SampleRequest(BaseModel):
    set_b64: MarkedSetB64
    shots: int = Field(ge=1)
    seed: int = 0


class SampleResponse(BaseModel):
    q: int
    shots: int
    seed: int
    counts: dict[int, int]  # sparse: outcome -> count
    csv: str


class DetectRequest(BaseModel):
    set_b64: MarkedSetB64
    n: int
    shots: int = 0
    m: int = 10
    k_max: int = 64
    representatives: list[int] | None = None
    seed: int = 0
    max_candidates: int | None = None


class FamilyReportModel(BaseModel):
    n: int
    k: int
    starts: list[int]


class DetectionReportModel(BaseModel):
    outcome: str
    square: SquareModel | None = None
    family: FamilyReportModel | None = None
    candidates_examined: int
    shots_used: int
    seed: int
    message: str | None = None
    spacing: int | None = None


class AutocorrRequest(BaseModel):
    set_b64: MarkedSetB64
    s_from: int = 0
    s_to: int


class AutocorrResponse(BaseModel):
    values: list[tuple[int, float]]
    csv: str


class RecoverRequest(BaseModel):
    set_b64: MarkedSetB64
    k: int
    n: int
    shots: int | None = 0  # 0 -> exact overlaps, None -> accuracy-derived
    s_max: int | None = None
    seed: int = 0
    spacing_only: bool = False


class BoundRequest(BaseModel):
    z: int
    horizon: int = 10**6


class BoundResponse(BaseModel):
    z: int
    t0: int
    U: int
    horizon: int


class CertifyRequest(BaseModel):
    set_b64: MarkedSetB64
    n: int


class ProtocolDemoRequest(BaseModel):
    n: int = 13
    q: int = 10
    k: int = 5
    starts: list[int] | None = None
    noise: NoiseModel | None = None
    message_bits: str = Field(default="", pattern="^[01]*$")
    seed: int = 0
    exact_mode: bool = False
    shots_per_round: int = 40
    max_rounds: int = 8
    withhold_representatives: bool = False
    use_socket: bool = False
    include_transcript: bool = False
    s_max: int | None = None


class ProtocolDemoResponse(BaseModel):
    ok: bool
    square: SquareModel | None
    family: FamilyReportModel | None
    sent_bits: str
    decoded_bits: str
    bits_match: bool
    reconstruction_matches_secret: bool
    rounds_used: int
    queries_used: int
    frames: int
    seed: int
    transcript_jsonl: str | None = None


class ErrorDetail(BaseModel):
    error_type: str
    message: str
