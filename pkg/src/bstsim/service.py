"""HTTP service wrapping the simulator.

Each endpoint mirrors a pipeline stage and takes a JSON body whose fields
match the corresponding config dataclass. All runs are seeded, so repeating
a request reproduces its response exactly.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .bb84 import BitString
from .bsts import derive_session
from .photon import Basis
from .postprocess import ReconciliationParams
from .session import (
    ReconciliationFailure,
    SessionConfig,
    SessionReport,
    run_full_session,
    run_key_exchange,
    run_postprocess,
    run_sweep,
    run_transfer,
)

_BASIS_BY_LETTER = {basis.value: basis for basis in Basis}


def _parse_bases(letters: str) -> tuple[Basis, ...]:
    bases = []
    for letter in letters:
        if letter not in _BASIS_BY_LETTER:
            raise ValueError(
                f"unknown basis letter {letter!r}; expected letters from 'RDC'"
            )
        bases.append(_BASIS_BY_LETTER[letter])
    return tuple(bases)


class ReconModel(BaseModel):
    initial_block_size: int = 16
    passes_without_error_to_stop: int = 2
    max_passes: int = 32


class SessionRequest(BaseModel):
    photons: int = 4096
    noise_flip_prob: float = 0.0
    eve_mode: Literal["none", "intercept_resend"] = "none"
    eve_basis_set: str = "RD"
    seed: int = 0
    sample_size: int = 200
    qber_threshold: float = 0.11
    timing_rule: Literal["table2", "example9"] = "table2"
    message: Optional[str] = Field(
        default=None, description="message bits as a 0/1 string; random if null"
    )
    message_bits: int = 64
    recon: ReconModel = Field(default_factory=ReconModel)
    amplify: bool = False
    include_trace: bool = False


class SessionReportModel(BaseModel):
    sifted_len: int
    qber: float
    eve_decision: str
    reconciled_len: Optional[int] = None
    leaked_parity_count: Optional[int] = None
    amplified_len: Optional[int] = None
    bsts_interval_ms: Optional[int] = None
    bsts_bases: Optional[list[str]] = None
    message_delivered: bool = False
    receiver_error: Optional[float] = None
    eve_accuracy: Optional[float] = None


class SessionResponse(BaseModel):
    status: Literal["ok", "aborted", "reconciliation_failed"]
    report: SessionReportModel
    trace: Optional[dict[str, Any]] = None


class SweepRequest(SessionRequest):
    runs: int = Field(default=10, ge=1)
    include_reports: bool = False


class FieldStats(BaseModel):
    mean: float
    stderr: float
    n: int


class SweepResponse(BaseModel):
    n: int
    aborts: int
    reconciliation_failures: int
    fields: dict[str, FieldStats]
    reports: Optional[list[SessionReportModel]] = None


class ExchangeRequest(BaseModel):
    photons: int = 4096
    noise_flip_prob: float = 0.0
    eve_mode: Literal["none", "intercept_resend"] = "none"
    eve_basis_set: str = "RD"
    seed: int = 0
    sample_size: int = 200
    qber_threshold: float = 0.11
    include_trace: bool = False


class ExchangeResponse(BaseModel):
    status: Literal["ok", "aborted"]
    sifted_len: int
    qber: float
    eve_decision: str
    remaining_len: int
    trace: Optional[dict[str, Any]] = None


class PostprocessRequest(BaseModel):
    key_a: str
    key_b: str
    recon: ReconModel = Field(default_factory=ReconModel)
    amplify: bool = False
    seed: int = 0
    include_trace: bool = False


class PostprocessResponse(BaseModel):
    status: Literal["ok", "reconciliation_failed"]
    reconciled_len: Optional[int] = None
    leaked_parity_count: Optional[int] = None
    passes_run: Optional[int] = None
    discarded_positions: Optional[list[int]] = None
    keys_equal: Optional[bool] = None
    key_a: Optional[str] = None
    key_b: Optional[str] = None
    amplified_len: Optional[int] = None
    amplified_key: Optional[str] = None
    trace: Optional[dict[str, Any]] = None


class DeriveRequest(BaseModel):
    key: str
    timing_rule: Literal["table2", "example9"] = "table2"


class DeriveResponse(BaseModel):
    base1: str
    base2: str
    interval_ms: int
    schedule: str


class TransferRequest(BaseModel):
    key: str
    message: str
    timing_rule: Literal["table2", "example9"] = "table2"
    noise_flip_prob: float = 0.0
    eve_mode: Literal["none", "intercept_resend"] = "none"
    eve_basis_set: str = "RD"
    seed: int = 0
    include_trace: bool = False


class TransferResponse(BaseModel):
    base1: str
    base2: str
    interval_ms: int
    schedule: str
    decoded: str
    message_delivered: bool
    receiver_error: float
    eve_accuracy: Optional[float] = None
    trace: Optional[dict[str, Any]] = None


app = FastAPI(
    title="bstsim",
    version=__version__,
    description=(
        "Deterministic simulator of quantum key exchange with "
        "key-synchronized covert message transfer."
    ),
)


def _recon_params(model: ReconModel) -> ReconciliationParams:
    return ReconciliationParams(
        initial_block_size=model.initial_block_size,
        passes_without_error_to_stop=model.passes_without_error_to_stop,
        max_passes=model.max_passes,
    )


def _session_config(req: SessionRequest) -> SessionConfig:
    return SessionConfig(
        photons=req.photons,
        noise_flip_prob=req.noise_flip_prob,
        eve_mode=req.eve_mode,
        eve_basis_set=_parse_bases(req.eve_basis_set),
        seed=req.seed,
        sample_size=req.sample_size,
        qber_threshold=req.qber_threshold,
        timing_rule=req.timing_rule,
        message=BitString.from01(req.message) if req.message is not None else None,
        message_bits=req.message_bits,
        recon=_recon_params(req.recon),
        amplify=req.amplify,
    )


def _report_model(report: SessionReport) -> SessionReportModel:
    return SessionReportModel(**report.to_dict())


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok", "version": __version__}


@app.post("/api/session", response_model=SessionResponse)
def post_session(req: SessionRequest) -> SessionResponse:
    try:
        cfg = _session_config(req)
        report, trace = run_full_session(cfg)
    except ReconciliationFailure as exc:
        return SessionResponse(
            status="reconciliation_failed",
            report=_report_model(exc.report),
            trace=exc.trace.to_dict() if req.include_trace else None,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    status = "aborted" if report.eve_decision == "Abort" else "ok"
    return SessionResponse(
        status=status,
        report=_report_model(report),
        trace=trace.to_dict() if req.include_trace else None,
    )


@app.post("/api/sweep", response_model=SweepResponse)
def post_sweep(req: SweepRequest) -> SweepResponse:
    try:
        cfg = _session_config(req)
        summary, reports = run_sweep(cfg, req.runs)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return SweepResponse(
        n=summary["n"],
        aborts=summary["aborts"],
        reconciliation_failures=summary["reconciliation_failures"],
        fields={
            name: FieldStats(**stats) for name, stats in summary["fields"].items()
        },
        reports=(
            [_report_model(r) for r in reports] if req.include_reports else None
        ),
    )


@app.post("/api/bb84", response_model=ExchangeResponse)
def post_bb84(req: ExchangeRequest) -> ExchangeResponse:
    try:
        cfg = SessionConfig(
            photons=req.photons,
            noise_flip_prob=req.noise_flip_prob,
            eve_mode=req.eve_mode,
            eve_basis_set=_parse_bases(req.eve_basis_set),
            seed=req.seed,
            sample_size=req.sample_size,
            qber_threshold=req.qber_threshold,
        )
        result, trace = run_key_exchange(cfg)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return ExchangeResponse(
        status="aborted" if result["eve_decision"] == "Abort" else "ok",
        trace=trace.to_dict() if req.include_trace else None,
        **result,
    )


@app.post("/api/postprocess", response_model=PostprocessResponse)
def post_postprocess(req: PostprocessRequest) -> PostprocessResponse:
    try:
        key_a = BitString.from01(req.key_a)
        key_b = BitString.from01(req.key_b)
        result, trace = run_postprocess(
            key_a, key_b, _recon_params(req.recon), req.amplify, req.seed
        )
    except ReconciliationFailure as exc:
        return PostprocessResponse(
            status="reconciliation_failed",
            reconciled_len=exc.report.reconciled_len,
            leaked_parity_count=exc.report.leaked_parity_count,
            trace=exc.trace.to_dict() if req.include_trace else None,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return PostprocessResponse(
        status="ok",
        trace=trace.to_dict() if req.include_trace else None,
        **result,
    )


@app.post("/api/bsts/derive", response_model=DeriveResponse)
def post_derive(req: DeriveRequest) -> DeriveResponse:
    try:
        params = derive_session(BitString.from01(req.key), req.timing_rule)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return DeriveResponse(
        base1=params.base1.value,
        base2=params.base2.value,
        interval_ms=params.interval_ms,
        schedule="".join(b.value for b in params.schedule),
    )


@app.post("/api/bsts/run", response_model=TransferResponse)
def post_transfer(req: TransferRequest) -> TransferResponse:
    try:
        result, trace = run_transfer(
            BitString.from01(req.key),
            BitString.from01(req.message),
            req.timing_rule,
            req.noise_flip_prob,
            req.eve_mode,
            _parse_bases(req.eve_basis_set),
            req.seed,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return TransferResponse(
        trace=trace.to_dict() if req.include_trace else None,
        **result,
    )
