"""HTTP service over a triage workspace.

Read endpoints recompute their bodies from the workspace state on every
request, so identical queries against an unchanged workspace return
identical bodies and no GET ever mutates anything. Writes go through
the store, which appends to the durable event log before the response
is sent. The optional frontend directory is served as static assets;
the API works identically without it.
"""

import json
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .advisories import AdvisoryFormat
from .catalog import UiRequired
from .errors import (
    DegeneratePeError,
    NoOverlapError,
    StageError,
    StaleVersionError,
)
from .reliability import Ac1Mode, RatingRecord, attribute_report
from .report import (
    RemediationAvailability,
    advisory_breakdown,
    alt_remediation_breakdown,
    breakdown_to_dict,
    mitigations_to_dict,
    ot_shares,
    ot_shares_to_dict,
    top_mitigations,
    vendor_advisory_table,
    vendor_table_to_dict,
)
from .workspace import (
    ReviewDecision,
    WorkspaceStore,
    advisory_from_dict,
    candidate_from_dict,
)

REPORT_NAMES = ("advisory-formats", "remediation", "ot-shares", "top-mitigations", "vendors")

REVIEWER_HEADER = "X-Reviewer-Id"

_ENTRY_FIELDS = (
    "cve_id",
    "vendor_project",
    "product",
    "vulnerability_name",
    "date_added",
    "due_date",
    "known_ransomware_use",
    "unspsc_code",
    "category_title",
    "ot_relevant",
    "ui_required",
)


def _error(status: int, code: str, detail: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail, **extra})


def _not_found(detail: str, **extra) -> JSONResponse:
    return _error(404, "not_found", detail, **extra)


def _validation_failed(detail: str) -> JSONResponse:
    return _error(422, "validation_failed", detail)


def create_app(store: WorkspaceStore, frontend_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="kevtriage", docs_url=None, redoc_url=None)

    @app.exception_handler(StageError)
    async def stage_missing(request: Request, exc: StageError):
        return _not_found(str(exc), missing_stage=exc.missing_stage)

    @app.exception_handler(StaleVersionError)
    async def stale_version(request: Request, exc: StaleVersionError):
        return _error(
            409, "conflict", str(exc), expected=exc.expected, actual=exc.actual
        )

    def entry_rows() -> list[dict]:
        return store.read_stage("entries")

    def remediation_labels() -> dict:
        """cve_id -> label string, or {} before the advisories stage runs."""
        if not store.has_stage("advisories"):
            return {}
        return {
            cve: row["remediation_label"]
            for cve, row in store.read_stage("advisories")["by_cve"].items()
        }

    def listing_row(row: dict, labels: dict) -> dict:
        slim = {field: row.get(field) for field in _ENTRY_FIELDS}
        slim["remediation_label"] = labels.get(row["cve_id"])
        return slim

    @app.get("/api/workspace")
    def workspace_summary():
        stages = ("catalog", "records", "entries", "advisories", "mappings",
                  "candidates", "playbook", "gaps")
        return {
            "version": store.version(),
            "stages": {name: store.has_stage(name) for name in stages},
            "decision_count": len(store.decisions()),
            "label_count": len(store.labels()),
        }

    @app.get("/api/entries")
    def list_entries(
        vendor: str | None = None,
        category: str | None = None,
        ot: str | None = Query(default=None, pattern="^(true|false)$"),
        remediation: str | None = None,
        interaction: str | None = None,
    ):
        if remediation is not None:
            known = {a.value for a in RemediationAvailability}
            if remediation not in known:
                return _validation_failed(
                    f"unknown remediation filter {remediation!r}; expected one of {sorted(known)}"
                )
        if interaction is not None:
            known = {u.value for u in UiRequired}
            if interaction not in known:
                return _validation_failed(
                    f"unknown interaction filter {interaction!r}; expected one of {sorted(known)}"
                )
        rows = entry_rows()
        labels = remediation_labels()
        selected = []
        for row in rows:
            if vendor is not None and row["vendor_project"].lower() != vendor.lower():
                continue
            if category is not None:
                title = (row.get("category_title") or "").lower()
                code = row.get("unspsc_code") or ""
                if category.lower() != title and category != code:
                    continue
            if ot is not None and row.get("ot_relevant") is not (ot == "true"):
                continue
            if interaction is not None and row["ui_required"] != interaction:
                continue
            if remediation is not None and labels.get(row["cve_id"]) != remediation:
                continue
            selected.append(listing_row(row, labels))
        return {"version": store.version(), "count": len(selected), "entries": selected}

    @app.get("/api/entries/{cve_id}")
    def entry_detail(cve_id: str):
        for row in entry_rows():
            if row["cve_id"] == cve_id:
                break
        else:
            return _not_found(f"unknown CVE {cve_id}")
        advisory = None
        if store.has_stage("advisories"):
            advisory = store.read_stage("advisories")["by_cve"].get(cve_id)
        mappings = []
        if store.has_stage("mappings"):
            mappings = store.read_stage("mappings")["by_cve"].get(cve_id, [])
        candidates = []
        if store.has_stage("candidates"):
            candidates = store.read_stage("candidates")["by_cve"].get(cve_id, [])
        gap = None
        if store.has_stage("gaps"):
            gap = store.read_stage("gaps")["by_cve"].get(cve_id)
        decisions = [
            d.to_dict() for d in store.decisions() if d.cve_id == cve_id
        ]
        return {
            "version": store.version(),
            "entry": row,
            "advisory": advisory,
            "mappings": mappings,
            "candidates": candidates,
            "gap": gap,
            "decisions": decisions,
        }

    @app.get("/api/entries/{cve_id}/playbook")
    def entry_playbook(cve_id: str):
        known = {row["cve_id"] for row in entry_rows()}
        if cve_id not in known:
            return _not_found(f"unknown CVE {cve_id}")
        store.require_stage("playbook")
        if store.has_stage("gaps"):
            reason = store.read_stage("gaps")["by_cve"].get(cve_id)
            if reason is not None:
                return _not_found(
                    f"no playbook entry for {cve_id}: nothing actionable",
                    cve_id=cve_id,
                    gap=reason,
                )
        document = json.loads(store.read_stage_text("playbook"))
        for entry in document["entries"]:
            if entry["cve_id"] == cve_id:
                return {
                    "version": store.version(),
                    "generated_at": document["generated_at"],
                    "provenance": document["provenance"],
                    "entry": entry,
                }
        return _not_found(f"no playbook entry for {cve_id}", cve_id=cve_id)

    @app.get("/api/reports/{name}")
    def report(name: str, top: int = 15):
        if name not in REPORT_NAMES:
            return _not_found(
                f"unknown report {name!r}", known_reports=list(REPORT_NAMES)
            )
        rows = entry_rows()
        if name == "advisory-formats":
            store.require_stage("advisories")
            labels = store.read_stage("advisories")["by_cve"]
            data = breakdown_to_dict(
                advisory_breakdown(
                    AdvisoryFormat(labels[row["cve_id"]]["format"])
                    for row in rows
                    if row["cve_id"] in labels
                )
            )
        elif name == "remediation":
            store.require_stage("advisories")
            labels = remediation_labels()
            data = breakdown_to_dict(
                alt_remediation_breakdown(
                    RemediationAvailability(labels[row["cve_id"]])
                    for row in rows
                    if row["cve_id"] in labels
                )
            )
        elif name == "ot-shares":
            if rows and "ot_relevant" not in rows[0]:
                raise StageError("classification", "run the classify command first")
            data = ot_shares_to_dict(
                ot_shares(
                    (row["ot_relevant"], UiRequired(row["ui_required"]))
                    for row in rows
                )
            )
        elif name == "top-mitigations":
            store.require_stage("candidates")
            candidates = [
                candidate_from_dict(c)
                for per_cve in store.read_stage("candidates")["by_cve"].values()
                for c in per_cve
            ]
            data = mitigations_to_dict(top_mitigations(candidates, n=top))
        else:
            store.require_stage("advisories")
            labels = store.read_stage("advisories")["by_cve"]
            data = vendor_table_to_dict(
                vendor_advisory_table(
                    (
                        (
                            row["vendor_project"],
                            labels[row["cve_id"]]["format"]
                            != AdvisoryFormat.NONE_FOUND.value,
                        )
                        for row in rows
                        if row["cve_id"] in labels
                    ),
                    n=top,
                )
            )
        return {"version": store.version(), "report": name, "data": data}

    @app.get("/api/reliability/{attribute}")
    def reliability(attribute: str, mode: str = "paper-eq1"):
        if mode not in ("paper-eq1", "gwet-standard"):
            return _validation_failed(
                f"unknown mode {mode!r}; expected paper-eq1 or gwet-standard"
            )
        rows = store.labels()
        if not rows:
            return _not_found("no labels recorded in this workspace")
        records = [
            RatingRecord(
                item_id=row["item_id"],
                rater_id=row["rater_id"],
                attribute=row["attribute"],
                label=row["label"],
            )
            for row in rows
        ]
        ac1_mode = Ac1Mode.GWET_STANDARD if mode == "gwet-standard" else Ac1Mode.PAPER_EQ1
        try:
            result = attribute_report(records, attribute, ac1_mode)
        except (NoOverlapError, DegeneratePeError) as exc:
            return _validation_failed(str(exc))
        return {
            "version": store.version(),
            "attribute": result.attribute,
            "mode": result.mode.value,
            "pooling": result.pooling,
            "pooled_ac1": result.pooled_ac1,
            "rows": [
                {
                    "rater_a": row.rater_a,
                    "rater_b": row.rater_b,
                    "n_items": row.n_items,
                    "k": row.k,
                    "p_o": row.p_o,
                    "p_e": row.p_e,
                    "ac1": row.ac1,
                }
                for row in result.rows
            ],
        }

    @app.post("/api/decisions", status_code=201)
    async def post_decision(
        request: Request,
        x_reviewer_id: str | None = Header(default=None, alias=REVIEWER_HEADER),
    ):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _validation_failed("request body must be a JSON object")
        if not isinstance(body, dict):
            return _validation_failed("request body must be a JSON object")
        reviewer = x_reviewer_id or str(body.get("reviewer_id", ""))
        if not reviewer.strip():
            return _validation_failed(
                f"reviewer_id required (send the {REVIEWER_HEADER} header)"
            )
        payload = dict(body)
        payload["reviewer_id"] = reviewer
        payload.setdefault(
            "decided_at",
            datetime.now(timezone.utc).replace(microsecond=0).isoformat(),
        )
        expected = payload.pop("expected_version", None)
        try:
            decision = ReviewDecision.from_dict(payload)
        except ValueError as exc:
            return _validation_failed(str(exc))
        try:
            seq = store.record_decision(decision, expected)
        except KeyError:
            return _not_found(f"unknown CVE {decision.cve_id}")
        return {"seq": seq, "version": store.version(), "decision": decision.to_dict()}

    @app.post("/api/labels", status_code=201)
    async def post_labels(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _validation_failed("request body must be JSON")
        if isinstance(body, list):
            rows, expected = body, None
        elif isinstance(body, dict):
            rows = body.get("labels")
            expected = body.get("expected_version")
        else:
            rows = None
            expected = None
        if not isinstance(rows, list) or not rows:
            return _validation_failed(
                'expected {"labels": [...]} or a non-empty JSON array'
            )
        try:
            seqs = store.record_labels(rows, expected)
        except ValueError as exc:
            return _validation_failed(str(exc))
        return {"appended": len(seqs), "version": store.version()}

    if frontend_dir is not None:
        frontend_path = Path(frontend_dir)
        if frontend_path.is_dir():
            app.mount(
                "/", StaticFiles(directory=frontend_path, html=True), name="console"
            )

    return app
