"""HTTP service exposing the core operations.

Run with ``uvicorn levfp.service:app``. Payloads carry matrices as nested
JSON lists; every stochastic endpoint takes an explicit seed, so responses
are reproducible.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

import numpy as np

from . import __version__, fingerprint as fp, sketch, stats, synth
from .connectome import GroupMatrix, edge_count

app = FastAPI(
    title="levfp",
    version=__version__,
    description="Leverage-score feature selection for connectome fingerprinting.",
)


class GroupMatrixPayload(BaseModel):
    subject_ids: list[str]
    values: list[list[float]]
    region_count: int

    def to_group(self) -> GroupMatrix:
        return GroupMatrix(
            subject_ids=tuple(self.subject_ids),
            values=np.array(self.values, dtype=float),
            region_count=self.region_count,
        )

    @classmethod
    def from_group(cls, g: GroupMatrix) -> "GroupMatrixPayload":
        return cls(
            subject_ids=list(g.subject_ids),
            values=g.values.tolist(),
            region_count=g.region_count,
        )


class LeverageRequest(BaseModel):
    matrix: list[list[float]] = Field(description="Features as rows.")


class LeverageResponse(BaseModel):
    scores: list[float]
    ranking: list[int]
    rank: int


class SketchRequest(BaseModel):
    matrix: list[list[float]]
    s: int = Field(gt=0)
    seed: int = 0
    distribution: str = Field(
        default="norm_squared", pattern="^(norm_squared|leverage)$"
    )


class SketchResponse(BaseModel):
    values: list[list[float]]
    source_rows: list[int]


class MatchRequest(BaseModel):
    g1: GroupMatrixPayload
    g2: GroupMatrixPayload
    features: list[int] | None = None


class MatchResponse(BaseModel):
    predicted: list[int]
    correct_mask: list[bool]
    accuracy_percent: float
    ties: int
    degenerate: list[str]


class FingerprintRequest(BaseModel):
    g1: GroupMatrixPayload
    g2: GroupMatrixPayload
    t: int = 100
    train_fraction: float = 0.8
    trials: int = 100
    null_trials: int = 1000
    seed: int = 0


class TrialReportPayload(BaseModel):
    trials: int
    mean_accuracy: float
    std_accuracy: float
    per_trial: list[float]
    feature_budget: int
    seed: int

    @classmethod
    def from_report(cls, r: fp.TrialReport) -> "TrialReportPayload":
        return cls(
            trials=r.trials,
            mean_accuracy=r.mean_accuracy,
            std_accuracy=r.std_accuracy,
            per_trial=list(r.per_trial),
            feature_budget=r.feature_budget,
            seed=r.seed,
        )


class FingerprintResponse(BaseModel):
    leverage_train: TrialReportPayload
    leverage_test: TrialReportPayload
    random_features: TrialReportPayload
    empirical_p: float


class HypergeomRequest(BaseModel):
    k: int
    K: int
    n: int
    N: int


class HypergeomResponse(BaseModel):
    p_value: float
    log10_p: float


class SynthRequest(BaseModel):
    n_subjects: int = 50
    n_regions: int = 90
    n_signature_edges: int = 60
    signature_strength: float = 0.3
    common_strength: float = 0.3
    common_loading_sd: float = 0.0
    session_noise: float = 0.12
    seed: int = 0


class SynthResponse(BaseModel):
    g1: GroupMatrixPayload
    g2: GroupMatrixPayload
    signature_edges: list[int]


class RecurrenceRequest(BaseModel):
    feature_sets: list[list[int]]
    total_features: int = Field(gt=0)
    threshold: float = Field(gt=0, le=1)


class EnrichmentRow(BaseModel):
    item_id: int
    observed: int
    expected: float
    p_value: float
    log10_p: float
    passed: bool


class RecurrenceResponse(BaseModel):
    kept: list[int]
    results: list[EnrichmentRow]


class RegionEnrichmentRequest(BaseModel):
    edges: list[int]
    region_count: int = Field(ge=2)
    threshold: float = Field(gt=0, le=1)


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/leverage", response_model=LeverageResponse)
def leverage(req: LeverageRequest) -> LeverageResponse:
    try:
        profile = sketch.leverage_scores(sketch.FeatureMatrix(np.array(req.matrix)))
    except ValueError as exc:
        raise _bad_request(exc) from None
    return LeverageResponse(
        scores=profile.scores.tolist(),
        ranking=profile.ranking.tolist(),
        rank=profile.rank,
    )


@app.post("/sketch", response_model=SketchResponse)
def make_sketch(req: SketchRequest) -> SketchResponse:
    try:
        a = sketch.FeatureMatrix(np.array(req.matrix))
        dist = (
            sketch.norm_squared_distribution(a)
            if req.distribution == "norm_squared"
            else sketch.leverage_distribution(a)
        )
        result = sketch.row_sample(a, req.s, dist, req.seed)
    except ValueError as exc:
        raise _bad_request(exc) from None
    return SketchResponse(
        values=result.values.tolist(), source_rows=result.source_rows.tolist()
    )


@app.post("/match", response_model=MatchResponse)
def match(req: MatchRequest) -> MatchResponse:
    try:
        g1 = req.g1.to_group()
        g2 = req.g2.to_group()
        features = (
            np.arange(g1.n_edges) if req.features is None else req.features
        )
        res = fp.match_groups(g1, g2, features)
    except ValueError as exc:
        raise _bad_request(exc) from None
    return MatchResponse(
        predicted=res.predicted.tolist(),
        correct_mask=res.correct_mask.tolist(),
        accuracy_percent=res.accuracy_percent,
        ties=res.ties,
        degenerate=list(res.degenerate),
    )


@app.post("/fingerprint", response_model=FingerprintResponse)
def fingerprint_run(req: FingerprintRequest) -> FingerprintResponse:
    try:
        g1 = req.g1.to_group()
        g2 = req.g2.to_group()
        train, test = fp.split_trial(
            g1, g2, req.train_fraction, req.t, req.trials, req.seed
        )
        null = fp.random_feature_trial(g1, g2, req.t, req.null_trials, req.seed + 1)
    except ValueError as exc:
        raise _bad_request(exc) from None
    dist = stats.empirical_pvalue(test.mean_accuracy, null)
    return FingerprintResponse(
        leverage_train=TrialReportPayload.from_report(train),
        leverage_test=TrialReportPayload.from_report(test),
        random_features=TrialReportPayload.from_report(null),
        empirical_p=dist.empirical_p,
    )


@app.post("/hypergeom", response_model=HypergeomResponse)
def hypergeom(req: HypergeomRequest) -> HypergeomResponse:
    try:
        log_p = stats.log_hypergeom_sf(req.k, req.K, req.n, req.N)
    except ValueError as exc:
        raise _bad_request(exc) from None
    return HypergeomResponse(p_value=math.exp(log_p), log10_p=log_p / math.log(10))


@app.post("/synth", response_model=SynthResponse)
def synth_cohort(req: SynthRequest) -> SynthResponse:
    try:
        cohort = synth.generate_cohort(synth.SynthConfig(**req.model_dump()))
    except ValueError as exc:
        raise _bad_request(exc) from None
    return SynthResponse(
        g1=GroupMatrixPayload.from_group(cohort.g1),
        g2=GroupMatrixPayload.from_group(cohort.g2),
        signature_edges=sorted(cohort.signature_edges),
    )


def _rows(results) -> list[EnrichmentRow]:
    return [
        EnrichmentRow(
            item_id=r.item_id,
            observed=r.observed,
            expected=r.expected,
            p_value=r.p_value,
            log10_p=r.log10_p,
            passed=r.passed,
        )
        for r in results
    ]


@app.post("/enrich/recurrent", response_model=RecurrenceResponse)
def enrich_recurrent(req: RecurrenceRequest) -> RecurrenceResponse:
    try:
        kept, results = stats.recurrent_features(
            [set(s) for s in req.feature_sets], req.total_features, req.threshold
        )
    except ValueError as exc:
        raise _bad_request(exc) from None
    return RecurrenceResponse(kept=sorted(kept), results=_rows(results))


@app.post("/enrich/regions", response_model=RecurrenceResponse)
def enrich_regions(req: RegionEnrichmentRequest) -> RecurrenceResponse:
    if any(not 0 <= e < edge_count(req.region_count) for e in req.edges):
        raise HTTPException(status_code=422, detail="edge id out of range")
    kept, results = stats.region_enrichment(
        set(req.edges), req.region_count, req.threshold
    )
    return RecurrenceResponse(kept=sorted(kept), results=_rows(results))
