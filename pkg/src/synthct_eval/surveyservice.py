"""Blind-survey assembly, persistence, and the HTTP service raters use.

A survey is a seeded, shuffled mix of real and synthetic slices persisted
as a self-contained directory: a client-safe item list, a server-side
truth file, the slices re-saved as portable images, and an append-only
JSONL response log. Ground truth never enters any client-facing payload;
raters fetch items, view windowed renderings, and submit one judgment per
item.

Persistence layout under a data directory::

    <survey_id>/survey.json       item order, no truth
    <survey_id>/truth.json        {"<item_id>": "real"|"synthetic"}
    <survey_id>/items/*.pgm(.json) full-depth slices for re-windowing
    <survey_id>/responses.jsonl   append-only judgment log
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image
from pydantic import BaseModel, Field

from .errors import InvalidParameter, MalformedInput
from .imaging import ImageSet, SliceImage, load_portable_slice, save_portable_slice, window_to_8bit
from .surveystats import load_survey_log, survey_stats

DEFAULT_WC = 40.0
DEFAULT_WW = 400.0

JUDGMENT_CODES = {"synthetic": 0, "real": 1, "indeterminable": 2}


class CreateSurveyBody(BaseModel):
    """POST /api/surveys payload; manifest paths are server-local."""

    real_manifest: str
    synth_manifest: str
    n_real: int = Field(default=10, ge=1)
    n_synth: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0)


class ResponseBody(BaseModel):
    """POST /api/surveys/{id}/responses payload."""

    rater_id: str = Field(min_length=1)
    item_id: str = Field(min_length=1)
    judgment: str
    rationale: str | None = None


@dataclass(frozen=True)
class SurveyItem:
    item_id: str
    truth: str  # server-side only; never serialized into client payloads
    image: SliceImage


@dataclass(frozen=True)
class SurveyDefinition:
    survey_id: str
    seed: int
    n_real: int
    n_synth: int
    hu_range: tuple[float, float]
    items: tuple[SurveyItem, ...]

    def __post_init__(self):
        if len(self.items) != self.n_real + self.n_synth:
            raise InvalidParameter(
                f"survey {self.survey_id}: {len(self.items)} items for "
                f"n_real={self.n_real} + n_synth={self.n_synth}"
            )

    @property
    def truth(self) -> dict[str, str]:
        return {item.item_id: item.truth for item in self.items}


def make_survey(
    real_pool: ImageSet,
    synth_pool: ImageSet,
    n_real: int,
    n_synth: int,
    seed: int,
) -> SurveyDefinition:
    """Sample and shuffle a balanced blind survey.

    Slices are drawn without replacement from each pool and interleaved
    by a seeded shuffle; the result is deterministic for fixed pools and
    seed. Raters are never told the real/synthetic split.
    """
    if n_real < 1 or n_synth < 1:
        raise InvalidParameter("n_real and n_synth must both be >= 1")
    if real_pool.provenance != "real" or synth_pool.provenance != "synthetic":
        raise InvalidParameter(
            "pools must have provenance 'real' and 'synthetic' respectively"
        )
    real_slices = list(real_pool.iter_slices())
    synth_slices = list(synth_pool.iter_slices())
    if len(real_slices) < n_real:
        raise InvalidParameter(
            f"real pool holds {len(real_slices)} slices, need {n_real}"
        )
    if len(synth_slices) < n_synth:
        raise InvalidParameter(
            f"synthetic pool holds {len(synth_slices)} slices, need {n_synth}"
        )

    digest = hashlib.sha256(
        f"{real_pool.set_id}|{synth_pool.set_id}|{n_real}|{n_synth}|{seed}".encode()
    ).hexdigest()
    survey_id = f"survey-{digest[:12]}"

    rng = np.random.default_rng(seed)
    picks = [
        (real_slices[i], "real")
        for i in rng.choice(len(real_slices), size=n_real, replace=False)
    ] + [
        (synth_slices[i], "synthetic")
        for i in rng.choice(len(synth_slices), size=n_synth, replace=False)
    ]
    order = rng.permutation(len(picks))

    items = tuple(
        SurveyItem(
            item_id=f"{survey_id}.{pos:03d}",
            truth=picks[src][1],
            image=picks[src][0],
        )
        for pos, src in enumerate(order)
    )
    return SurveyDefinition(
        survey_id=survey_id,
        seed=seed,
        n_real=n_real,
        n_synth=n_synth,
        hu_range=real_pool.hu_range,
        items=items,
    )


def persist_survey(defn: SurveyDefinition, data_dir: str | Path) -> Path:
    """Write a survey bundle under data_dir; returns the survey directory."""
    survey_dir = Path(data_dir) / defn.survey_id
    items_dir = survey_dir / "items"
    items_dir.mkdir(parents=True, exist_ok=True)
    for item in defn.items:
        save_portable_slice(item.image, items_dir / f"{item.item_id}.pgm", defn.hu_range)
    doc = {
        "schema": 1,
        "survey_id": defn.survey_id,
        "seed": defn.seed,
        "n_real": defn.n_real,
        "n_synth": defn.n_synth,
        "hu_range": list(defn.hu_range),
        "items": [
            {"item_id": item.item_id, "path": f"items/{item.item_id}.pgm"}
            for item in defn.items
        ],
    }
    (survey_dir / "survey.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    (survey_dir / "truth.json").write_text(
        json.dumps(defn.truth, sort_keys=True, indent=2) + "\n"
    )
    (survey_dir / "responses.jsonl").touch()
    return survey_dir


class _StoredSurvey:
    """One persisted survey as the service sees it."""

    def __init__(self, survey_dir: Path):
        self.dir = survey_dir
        doc = json.loads((survey_dir / "survey.json").read_text())
        self.survey_id: str = doc["survey_id"]
        self.item_order: list[str] = [entry["item_id"] for entry in doc["items"]]
        self.item_paths: dict[str, Path] = {
            entry["item_id"]: survey_dir / entry["path"] for entry in doc["items"]
        }
        self.truth_path = survey_dir / "truth.json"
        self.log_path = survey_dir / "responses.jsonl"
        self._images: dict[str, SliceImage] = {}
        self.seen_pairs: set[tuple[str, str]] = set()
        if self.log_path.is_file():
            for line in self.log_path.read_text().splitlines():
                if line.strip():
                    doc = json.loads(line)
                    self.seen_pairs.add((doc["rater_id"], doc["item_id"]))

    def image(self, item_id: str) -> SliceImage:
        if item_id not in self._images:
            self._images[item_id] = load_portable_slice(self.item_paths[item_id])
        return self._images[item_id]


class SurveyStore:
    """All surveys under one data directory; appends are serialized."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        self.surveys: dict[str, _StoredSurvey] = {}
        for entry in sorted(self.data_dir.iterdir()):
            if (entry / "survey.json").is_file():
                stored = _StoredSurvey(entry)
                self.surveys[stored.survey_id] = stored

    def add(self, defn: SurveyDefinition) -> _StoredSurvey:
        persist_survey(defn, self.data_dir)
        stored = _StoredSurvey(self.data_dir / defn.survey_id)
        self.surveys[defn.survey_id] = stored
        return stored

    def find_item(self, item_id: str) -> tuple[_StoredSurvey, str] | None:
        for stored in self.surveys.values():
            if item_id in stored.item_paths:
                return stored, item_id
        return None

    def append_response(
        self,
        survey: _StoredSurvey,
        rater_id: str,
        item_id: str,
        judgment: int,
        rationale: str | None,
    ) -> bool:
        """Append one response; False if the (rater, item) pair already responded."""
        line = json.dumps(
            {
                "survey_id": survey.survey_id,
                "rater_id": rater_id,
                "item_id": item_id,
                "judgment": judgment,
                "rationale": rationale,
                "ts": datetime.now(timezone.utc).isoformat(),
            },
            ensure_ascii=False,
            sort_keys=True,
        )
        with self._write_lock:
            if (rater_id, item_id) in survey.seen_pairs:
                return False
            with survey.log_path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
            survey.seen_pairs.add((rater_id, item_id))
        return True


def render_png(img: SliceImage, wc: float, ww: float) -> bytes:
    """Lossless 8-bit grayscale PNG of a windowed slice."""
    gray = window_to_8bit(img, wc, ww)
    buf = io.BytesIO()
    Image.fromarray(gray, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def create_app(data_dir: str | Path, token: str | None = None, static_dir: str | Path | None = None):
    """Build the survey FastAPI application.

    token defaults to the SURVEY_TOKEN environment variable; when set,
    every /api request must carry "Authorization: Bearer <token>".
    static_dir optionally mounts a built browser client at /.
    """
    from fastapi import FastAPI, HTTPException, Query, Request, Response
    from fastapi.responses import JSONResponse

    if token is None:
        token = os.environ.get("SURVEY_TOKEN") or None
    store = SurveyStore(data_dir)
    app = FastAPI(title="synthct-eval survey service")

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if token and request.url.path.startswith("/api"):
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {token}":
                return JSONResponse({"detail": "invalid bearer token"}, status_code=401)
        return await call_next(request)

    def get_survey(survey_id: str) -> _StoredSurvey:
        if survey_id not in store.surveys:
            raise HTTPException(status_code=404, detail=f"unknown survey {survey_id!r}")
        return store.surveys[survey_id]

    @app.post("/api/surveys", status_code=201)
    def create_survey(body: CreateSurveyBody):
        from .imaging import load_manifest

        try:
            real_pool = load_manifest(body.real_manifest)
            synth_pool = load_manifest(body.synth_manifest)
            defn = make_survey(real_pool, synth_pool, body.n_real, body.n_synth, body.seed)
        except (MalformedInput, InvalidParameter) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        store.add(defn)
        return {"survey_id": defn.survey_id}

    @app.get("/api/surveys/{survey_id}/items")
    def list_items(survey_id: str):
        survey = get_survey(survey_id)
        return [{"item_id": item_id} for item_id in survey.item_order]

    @app.get("/api/items/{item_id}/image")
    def item_image(
        item_id: str,
        wc: float = Query(default=DEFAULT_WC),
        ww: float = Query(default=DEFAULT_WW),
    ):
        found = store.find_item(item_id)
        if found is None:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id!r}")
        if ww <= 0:
            raise HTTPException(status_code=422, detail="window width must be > 0")
        survey, item_id = found
        png = render_png(survey.image(item_id), wc, ww)
        return Response(content=png, media_type="image/png")

    @app.post("/api/surveys/{survey_id}/responses", status_code=204)
    def submit_response(survey_id: str, body: ResponseBody):
        survey = get_survey(survey_id)
        if body.judgment not in JUDGMENT_CODES:
            raise HTTPException(
                status_code=422,
                detail=f"judgment must be one of {sorted(JUDGMENT_CODES)}",
            )
        if body.item_id not in survey.item_paths:
            raise HTTPException(status_code=404, detail=f"unknown item {body.item_id!r}")
        accepted = store.append_response(
            survey, body.rater_id, body.item_id, JUDGMENT_CODES[body.judgment], body.rationale
        )
        if not accepted:
            raise HTTPException(
                status_code=409,
                detail=f"rater {body.rater_id!r} already judged item {body.item_id!r}",
            )
        return Response(status_code=204)

    @app.get("/api/surveys/{survey_id}/stats")
    def stats(survey_id: str):
        survey = get_survey(survey_id)
        records = load_survey_log(survey.log_path, survey.truth_path)
        if not records:
            return {"n_records": 0, "accuracy": None, "tests": []}
        return survey_stats(records)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
