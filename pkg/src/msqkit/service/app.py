"""FastAPI application wrapping the core package."""

from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, detect, numbertheory, protocol, qsim
from ..errors import FormatError, MsqError
from ..markedset import MarkedSet, NoiseSpec, apply_noise, from_progressions
from ..squares import MagicSquare, ProgressionFamily, construct_order_n, validate_square
from . import models


def _square_model(square: MagicSquare) -> models.SquareModel:
    return models.SquareModel(
        order=square.order,
        entries=[x for row in square.entries for x in row],
        magic_sum=square.magic_sum,
        text=square.to_text(),
    )


def _family_model(fam: ProgressionFamily) -> models.FamilyReportModel:
    return models.FamilyReportModel(n=fam.n, k=fam.k, starts=list(fam.starts))


def _set_model(s: MarkedSet) -> models.MarkedSetModel:
    return models.MarkedSetModel(
        q=s.q,
        b=s.domain_size,
        ones=s.popcount,
        data_b64=base64.b64encode(s.serialize()).decode(),
    )


def _decode_set(data_b64: str) -> MarkedSet:
    try:
        raw = base64.b64decode(data_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise FormatError(f"invalid base64 payload: {exc}") from exc
    return MarkedSet.deserialize(raw)


def _report_model(report: detect.DetectionReport, spacing: int | None = None) -> models.DetectionReportModel:
    return models.DetectionReportModel(
        outcome=report.outcome,
        square=_square_model(report.square) if report.square else None,
        family=_family_model(report.family) if report.family else None,
        candidates_examined=report.candidates_examined,
        shots_used=report.shots_used,
        seed=report.seed,
        message=report.message,
        spacing=spacing,
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="msqkit service",
        version=__version__,
        description=(
            "Magic-square construction, QFT period detection, shifted-oracle "
            "spacing recovery, number-theoretic certification, and the "
            "two-party protocol demo."
        ),
    )

    @app.exception_handler(MsqError)
    async def _msq_error(_: Request, exc: MsqError):
        return JSONResponse(
            status_code=422,
            content={"detail": {"error_type": type(exc).__name__, "message": str(exc)}},
        )

    @app.get("/health", response_model=models.HealthResponse)
    def health():
        return models.HealthResponse(status="ok", version=__version__)

    @app.post("/construct", response_model=models.SquareModel)
    def construct(req: models.ConstructRequest):
        fam = ProgressionFamily(n=req.n, starts=tuple(req.starts), k=req.k)
        return _square_model(construct_order_n(fam))

    @app.post("/validate", response_model=models.ValidateResponse)
    def validate(req: models.ValidateRequest):
        check = validate_square(req.entries)
        return models.ValidateResponse(is_magic=check.is_magic, magic_sum=check.magic_sum)

    @app.post("/genset", response_model=models.MarkedSetModel)
    def genset(req: models.GensetRequest):
        if req.family is not None:
            fam = ProgressionFamily(
                n=req.family.n, starts=tuple(req.family.starts), k=req.family.k
            )
            s = from_progressions(fam, req.q)
            if req.indices:
                s = MarkedSet.from_indices(
                    req.q, list(s.iter_marked()) + list(req.indices)
                )
        else:
            s = MarkedSet.from_indices(req.q, req.indices or [])
        if req.noise is not None and req.noise.density > 0:
            s = apply_noise(
                s,
                NoiseSpec(
                    kind=req.noise.kind, density=req.noise.density, seed=req.noise.seed
                ),
            )
        return _set_model(s)

    @app.post("/spectrum", response_model=models.SpectrumResponse)
    def spectrum(req: models.SpectrumRequest):
        s = _decode_set(req.set_b64)
        spec = qsim.exact_spectrum(s)
        return models.SpectrumResponse(
            q=s.q,
            probabilities=spec.probabilities.tolist(),
            csv=qsim.spectrum_to_csv(spec),
        )

    @app.post("/sample", response_model=models.SampleResponse)
    def sample(req: models.SampleRequest):
        s = _decode_set(req.set_b64)
        counts = qsim.sample(qsim.exact_spectrum(s), req.shots, req.seed)
        sparse = {
            int(k): int(c) for k, c in enumerate(counts.counts.tolist()) if c
        }
        return models.SampleResponse(
            q=s.q,
            shots=req.shots,
            seed=req.seed,
            counts=sparse,
            csv=qsim.counts_to_csv(counts),
        )

    @app.post("/detect", response_model=models.DetectionReportModel)
    def run_detect(req: models.DetectRequest):
        s = _decode_set(req.set_b64)
        params = detect.Algorithm1Params(
            shots=req.shots,
            m=req.m,
            k_max=req.k_max,
            representatives=tuple(req.representatives) if req.representatives else None,
            seed=req.seed,
            max_candidates=req.max_candidates,
        )
        return _report_model(detect.algorithm1(s, req.n, params))

    @app.post("/autocorr", response_model=models.AutocorrResponse)
    def autocorr(req: models.AutocorrRequest):
        s = _decode_set(req.set_b64)
        sig = detect.autocorr_scan(s, req.s_from, req.s_to)
        return models.AutocorrResponse(
            values=[(shift, sig.values[shift]) for shift in sorted(sig.values)],
            csv=sig.to_csv(),
        )

    @app.post("/recover", response_model=models.DetectionReportModel)
    def recover(req: models.RecoverRequest):
        s = _decode_set(req.set_b64)
        params = detect.RecoverParams(shots=req.shots, s_max=req.s_max, seed=req.seed)
        if req.spacing_only:
            try:
                spacing = detect.recover_spacing(s, req.k, req.n, params)
            except detect.RecoveryFailure:
                report = detect.DetectionReport(
                    outcome="none-of-form",
                    square=None,
                    family=None,
                    candidates_examined=params.max_candidates,
                    shots_used=req.shots or 0,
                    seed=req.seed,
                    message=detect.NO_STRUCTURED_MESSAGE,
                )
                return _report_model(report)
            report = detect.DetectionReport(
                outcome="solution",
                square=None,
                family=None,
                candidates_examined=1,
                shots_used=req.shots or 0,
                seed=req.seed,
            )
            return _report_model(report, spacing=spacing)
        report = detect.algorithm2(s, req.k, req.n, params)
        spacing = (
            report.family.starts[1] - report.family.starts[0]
            if report.family and report.family.n >= 2
            else None
        )
        return _report_model(report, spacing=spacing)

    @app.post("/bound", response_model=models.BoundResponse)
    def bound(req: models.BoundRequest):
        result = numbertheory.compute_bound(req.z, horizon=req.horizon)
        return models.BoundResponse(
            z=req.z, t0=result.t0, U=result.U, horizon=result.horizon
        )

    @app.post("/certify")
    def certify(req: models.CertifyRequest):
        s = _decode_set(req.set_b64)
        return numbertheory.certify_absence_squares(s, req.n).to_json()

    @app.post("/protocol-demo", response_model=models.ProtocolDemoResponse)
    def protocol_demo(req: models.ProtocolDemoRequest):
        starts = (
            tuple(req.starts)
            if req.starts
            else tuple(68 * i for i in range(1, req.n + 1))
        )
        fam = ProgressionFamily(n=req.n, starts=starts, k=req.k)
        marked = from_progressions(fam, req.q)
        if req.noise is not None and req.noise.density > 0:
            marked = apply_noise(
                marked,
                NoiseSpec(
                    kind=req.noise.kind, density=req.noise.density, seed=req.noise.seed
                ),
            )
        bits = tuple(int(ch) for ch in req.message_bits)
        secret = protocol.PartyBSecret(
            family=fam,
            marked=marked,
            representatives=None if req.withhold_representatives else fam.starts,
            message_bits=bits,
        )
        params = protocol.ProtocolParams(
            max_rounds=req.max_rounds,
            shots_per_round=req.shots_per_round,
            exact_mode=req.exact_mode,
            seed=req.seed,
            s_max=req.s_max,
        )
        channel = protocol.make_socket_channel() if req.use_socket else None
        try:
            result = protocol.run_protocol(secret, channel=channel, params=params)
        except protocol.ProtocolFailure as exc:
            return models.ProtocolDemoResponse(
                ok=False,
                square=None,
                family=None,
                sent_bits=req.message_bits,
                decoded_bits="",
                bits_match=False,
                reconstruction_matches_secret=False,
                rounds_used=req.max_rounds,
                queries_used=0,
                frames=len(exc.transcript.frames) if exc.transcript else 0,
                seed=req.seed,
                transcript_jsonl=(
                    exc.transcript.to_jsonl()
                    if req.include_transcript and exc.transcript
                    else None
                ),
            )
        decoded = "".join(str(b) for b in result.decoded_bits)
        return models.ProtocolDemoResponse(
            ok=result.ok,
            square=_square_model(result.square) if result.square else None,
            family=_family_model(result.family) if result.family else None,
            sent_bits=req.message_bits,
            decoded_bits=decoded,
            bits_match=decoded == req.message_bits,
            reconstruction_matches_secret=result.family == fam,
            rounds_used=result.rounds_used,
            queries_used=result.queries_used,
            frames=len(result.transcript.frames),
            seed=req.seed,
            transcript_jsonl=(
                result.transcript.to_jsonl() if req.include_transcript else None
            ),
        )

    return app


app = create_app()
