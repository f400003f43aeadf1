"""Command-line interface for the triage pipeline.

Commands chain through a workspace directory: ingest parses the raw
feed, later stages refine it, and report/emit produce the deliverables.
Every command is headless; `serve` is the only one that starts the HTTP
service. The report path writes delimited tables and renders matching
figures next to them.
"""

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from .advisories import SpecificityRules, parse_advisory_manifest
from .attack import (
    MappingRules,
    default_attack_index,
    default_mapping_rules,
    load_attack_dataset,
    map_cve_to_techniques,
    rate_effectiveness,
    render_ot_steps,
    techniques_to_mitigations,
)
from .catalog import UiRequired, enrich, parse_kevc_feed, read_cve_records
from .classify import (
    ClassifierRules,
    assess_ot_relevance,
    classify_unspsc,
    default_ot_rules,
)
from .errors import KevTriageError, NothingActionableError, StageError
from .figures import (
    render_breakdown_figure,
    render_ot_shares_figure,
    render_top_mitigations_figure,
)
from .playbook import build_playbook_entry, default_provenance, emit_playbook
from .reliability import (
    Ac1Mode,
    RatingRecord,
    attribute_report,
    read_labels_csv,
    sample_validation_set,
)
from .report import (
    advisory_breakdown,
    alt_remediation_breakdown,
    label_remediation,
    ot_shares,
    render_breakdown_csv,
    render_mitigations_csv,
    render_vendor_table_csv,
    top_mitigations,
    vendor_advisory_table,
)
from .workspace import (
    WorkspaceStore,
    advisory_from_dict,
    advisory_to_dict,
    candidate_from_dict,
    candidate_to_dict,
    enriched_from_parts,
    entry_from_dict,
    entry_to_dict,
    mapping_from_dict,
    mapping_to_dict,
    record_from_dict,
    record_to_dict,
)

REPORT_NAMES = ("advisory-formats", "remediation", "ot-shares", "top-mitigations", "vendors")


def _store(args) -> WorkspaceStore:
    return WorkspaceStore(args.workspace)


# --- pipeline commands --------------------------------------------------

def cmd_ingest(args) -> int:
    feed_text = Path(args.feed).read_text(encoding="utf-8")
    feed = parse_kevc_feed(feed_text)
    records = read_cve_records(args.records) if args.records else {}
    with _store(args) as store:
        store.write_stage(
            "catalog",
            {
                "title": feed.title,
                "catalog_version": feed.catalog_version,
                "date_released": feed.date_released,
                "declared_count": feed.declared_count,
                "entries": [entry_to_dict(e) for e in feed.entries],
                "skipped": list(feed.skipped),
                "warnings": list(feed.warnings),
            },
        )
        store.write_stage(
            "records", {cve: record_to_dict(rec) for cve, rec in records.items()}
        )
        store.write_stage(
            "provenance",
            {
                "feed": {
                    "title": feed.title,
                    "catalog_version": feed.catalog_version,
                    "date_released": feed.date_released,
                    "source": Path(args.feed).name,
                    "entry_count": len(feed.entries),
                },
                "versions": dict(default_provenance()),
            },
        )
    print(
        f"ingested {len(feed.entries)} entries "
        f"({len(feed.skipped)} skipped, {len(feed.warnings)} warnings), "
        f"{len(records)} CVE records"
    )
    for warning in feed.warnings:
        print(f"  warning: {warning}")
    return 0


def cmd_enrich(args) -> int:
    with _store(args) as store:
        catalog = store.read_stage("catalog")
        records_raw = store.read_stage("records")
        entries = [entry_from_dict(row) for row in catalog["entries"]]
        records = {cve: record_from_dict(row) for cve, row in records_raw.items()}
        enriched = enrich(entries, records)
        rows = []
        for item in enriched:
            row = entry_to_dict(item.kevc)
            row["has_record"] = item.record is not None
            cvss = item.record.cvss if item.record else None
            row["cvss_version"] = cvss.version.value if cvss else None
            row["attack_vector"] = cvss.attack_vector.value if cvss else None
            row["base_score"] = cvss.base_score if cvss else None
            row["ui_required"] = item.user_interaction_required.value
            rows.append(row)
        store.write_stage("entries", rows)
    counts = {"yes": 0, "no": 0, "unknown": 0}
    for row in rows:
        counts[row["ui_required"]] += 1
    print(
        f"enriched {len(rows)} entries "
        f"(interaction yes={counts['yes']} no={counts['no']} unknown={counts['unknown']})"
    )
    return 0


def cmd_classify(args) -> int:
    rules = None
    if args.rules:
        rules = ClassifierRules.from_text(Path(args.rules).read_text(encoding="utf-8"))
    ot_rules = default_ot_rules()
    with _store(args) as store:
        rows = store.read_stage("entries")
        ot_count = 0
        for row in rows:
            assignment = classify_unspsc(
                row["product"], row["short_description"], rules
            )
            relevance = assess_ot_relevance(assignment, ot_rules)
            row["unspsc_code"] = assignment.code
            row["category_title"] = assignment.class_title
            row["classification_source"] = assignment.source.value
            row["classification_confidence"] = assignment.confidence
            row["classification_rationale"] = assignment.rationale
            row["ot_relevant"] = relevance.plausible_in_ot
            row["ot_basis"] = relevance.basis
            row["ot_map_version"] = relevance.map_version
            ot_count += relevance.plausible_in_ot
        store.write_stage("entries", rows)
    print(f"classified {len(rows)} entries ({ot_count} OT-plausible)")
    return 0


def cmd_advisories(args) -> int:
    rules = None
    if args.rules:
        rules = SpecificityRules.from_mapping(
            json.loads(Path(args.rules).read_text(encoding="utf-8"))
        )
    manifest_text = Path(args.manifest).read_text(encoding="utf-8")
    advisories = parse_advisory_manifest(manifest_text, rules=rules)
    with _store(args) as store:
        store.require_stage("catalog")
        by_cve = {}
        for cve_id, advisory in advisories.items():
            row = advisory_to_dict(advisory)
            row["remediation_label"] = label_remediation(advisory).value
            by_cve[cve_id] = row
        store.write_stage("advisories", {"by_cve": by_cve})
    print(f"stored advisories for {len(by_cve)} entries")
    return 0


def _load_enriched(store: WorkspaceStore) -> list:
    rows = store.read_stage("entries")
    records_raw = store.read_stage("records")
    return [
        enriched_from_parts(row, records_raw.get(row["cve_id"]), row["ui_required"])
        for row in rows
    ]


def cmd_map(args) -> int:
    index = default_attack_index()
    if args.attack_bundle:
        index = load_attack_dataset(Path(args.attack_bundle).read_text(encoding="utf-8"))
    rules = default_mapping_rules()
    if args.rules:
        # Custom keyword rules keep the bundled CWE bridge.
        rules = MappingRules.from_texts(
            Path(args.rules).read_text(encoding="utf-8"), _default_bridge_text()
        )
    with _store(args) as store:
        enriched = _load_enriched(store)
        mappings_by_cve = {}
        candidates_by_cve = {}
        total_mappings = 0
        total_candidates = 0
        for entry in enriched:
            mappings = map_cve_to_techniques(entry, rules)
            if args.threshold:
                mappings = [m for m in mappings if m.confidence >= args.threshold]
            candidates = [
                render_ot_steps(rate_effectiveness(c, entry), entry, index=index)
                for c in techniques_to_mitigations(index, mappings)
            ]
            cve_id = entry.kevc.cve_id
            mappings_by_cve[cve_id] = [mapping_to_dict(m) for m in mappings]
            candidates_by_cve[cve_id] = [candidate_to_dict(c) for c in candidates]
            total_mappings += len(mappings)
            total_candidates += len(candidates)
        store.write_stage(
            "mappings",
            {
                "attack_bundle_version": index.version,
                "rules_version": rules.version,
                "threshold": args.threshold,
                "by_cve": mappings_by_cve,
            },
        )
        store.write_stage("candidates", {"by_cve": candidates_by_cve})
    print(
        f"mapped {len(mappings_by_cve)} entries: "
        f"{total_mappings} technique mappings, {total_candidates} candidates "
        f"(dataset {index.version})"
    )
    return 0


def _default_bridge_text() -> str:
    from importlib import resources

    return resources.files("kevtriage.data").joinpath("cwe_bridge.csv").read_text("utf-8")


def _parse_clock(text: str) -> datetime:
    moment = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment


def cmd_score(args) -> int:
    with _store(args) as store:
        store.require_stage("provenance")
        enriched = _load_enriched(store)
        advisories_stage = store.read_stage("advisories")["by_cve"]
        mappings_stage = store.read_stage("mappings")
        candidates_stage = store.read_stage("candidates")["by_cve"]

        provenance = dict(default_provenance())
        provenance["attack_dataset"] = mappings_stage["attack_bundle_version"]
        provenance["technique_rules"] = mappings_stage["rules_version"]

        if args.clock:
            moment = _parse_clock(args.clock)
        else:
            released = store.read_stage("catalog")["date_released"]
            moment = _parse_clock(released[:10] + "T00:00:00Z")
        clock = lambda: moment  # noqa: E731

        entries = []
        gaps = {}
        for item in enriched:
            cve_id = item.kevc.cve_id
            advisory_row = advisories_stage.get(cve_id)
            remediations = (
                advisory_from_dict(advisory_row).remediations if advisory_row else ()
            )
            mappings = [
                mapping_from_dict(m) for m in mappings_stage["by_cve"].get(cve_id, ())
            ]
            candidates = [
                candidate_from_dict(c) for c in candidates_stage.get(cve_id, ())
            ]
            try:
                entries.append(
                    build_playbook_entry(
                        item, remediations, candidates, mappings,
                        value_density=args.value_density,
                        provenance=provenance,
                    )
                )
            except NothingActionableError as exc:
                gaps[cve_id] = exc.reason
        text = emit_playbook(entries, clock, provenance)
        store.write_stage_text("playbook", text)
        store.write_stage("gaps", {"by_cve": gaps})
    print(
        f"scored {len(entries)} playbook entries "
        f"({len(gaps)} gaps with nothing actionable) at {moment.isoformat()}"
    )
    return 0


def cmd_emit(args) -> int:
    with _store(args) as store:
        text = store.read_stage_text("playbook")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# --- reports ------------------------------------------------------------

def _require_classification(rows) -> None:
    if rows and "ot_relevant" not in rows[0]:
        raise StageError("classification", "run the classify command first")


def cmd_report(args) -> int:
    names = [args.name] if args.name else list(REPORT_NAMES)
    with _store(args) as store:
        rows = store.read_stage("entries")
        out_dir = Path(args.out) if args.out else store.reports_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []

        advisories_by_cve = None
        advisory_objects = None

        def advisories_loaded():
            nonlocal advisories_by_cve, advisory_objects
            if advisories_by_cve is None:
                advisories_by_cve = store.read_stage("advisories")["by_cve"]
                advisory_objects = {
                    cve: advisory_from_dict(row)
                    for cve, row in advisories_by_cve.items()
                }
            return advisory_objects

        for name in names:
            if name == "advisory-formats":
                advisories = advisories_loaded()
                breakdown = advisory_breakdown(
                    advisories[row["cve_id"]].format
                    for row in rows
                    if row["cve_id"] in advisories
                )
                csv_path = out_dir / "advisory_formats.csv"
                csv_path.write_text(render_breakdown_csv(breakdown), encoding="utf-8")
                written.append(csv_path)
                written.append(
                    render_breakdown_figure(
                        breakdown, out_dir / "advisory_formats.png", "Advisory formats"
                    )
                )
            elif name == "remediation":
                advisories = advisories_loaded()
                breakdown = alt_remediation_breakdown(
                    label_remediation(advisories[row["cve_id"]])
                    for row in rows
                    if row["cve_id"] in advisories
                )
                csv_path = out_dir / "remediation_availability.csv"
                csv_path.write_text(render_breakdown_csv(breakdown), encoding="utf-8")
                written.append(csv_path)
                written.append(
                    render_breakdown_figure(
                        breakdown,
                        out_dir / "remediation_availability.png",
                        "Alternate remediation availability",
                    )
                )
            elif name == "ot-shares":
                _require_classification(rows)
                shares = ot_shares(
                    (row["ot_relevant"], UiRequired(row["ui_required"]))
                    for row in rows
                )
                for breakdown, stem in (
                    (shares.plausible, "ot_plausibility"),
                    (shares.interaction_all, "interaction_all"),
                    (shares.interaction_ot, "interaction_ot"),
                ):
                    if breakdown is None:
                        continue
                    csv_path = out_dir / f"{stem}.csv"
                    csv_path.write_text(
                        render_breakdown_csv(breakdown), encoding="utf-8"
                    )
                    written.append(csv_path)
                written.append(
                    render_ot_shares_figure(shares, out_dir / "ot_shares.png")
                )
            elif name == "top-mitigations":
                candidates_stage = store.read_stage("candidates")["by_cve"]
                candidates = [
                    candidate_from_dict(c)
                    for per_cve in candidates_stage.values()
                    for c in per_cve
                ]
                ranks = top_mitigations(candidates, n=args.top)
                csv_path = out_dir / "top_mitigations.csv"
                csv_path.write_text(render_mitigations_csv(ranks), encoding="utf-8")
                written.append(csv_path)
                written.append(
                    render_top_mitigations_figure(
                        ranks, out_dir / "top_mitigations.png"
                    )
                )
            elif name == "vendors":
                advisories = advisories_loaded()
                table = vendor_advisory_table(
                    (
                        row["vendor_project"],
                        advisories[row["cve_id"]].format.value != "none_found",
                    )
                    for row in rows
                    if row["cve_id"] in advisories
                )
                csv_path = out_dir / "vendor_advisories.csv"
                csv_path.write_text(render_vendor_table_csv(table), encoding="utf-8")
                written.append(csv_path)
            else:
                print(f"error: unknown report {name!r}", file=sys.stderr)
                print(f"known reports: {', '.join(REPORT_NAMES)}", file=sys.stderr)
                return 2
    for path in written:
        print(f"wrote {path}")
    return 0


# --- reliability --------------------------------------------------------

def cmd_reliability(args) -> int:
    if args.labels:
        records = read_labels_csv(args.labels)
    else:
        store = WorkspaceStore(args.workspace)
        rows = store.labels()
        if not rows:
            print(
                "error: no --labels file and no labels recorded in the workspace",
                file=sys.stderr,
            )
            return 1
        records = [
            RatingRecord(
                item_id=row["item_id"],
                rater_id=row["rater_id"],
                attribute=row["attribute"],
                label=row["label"],
            )
            for row in rows
        ]

    if args.sample:
        items = sorted({r.item_id for r in records})
        chosen = sample_validation_set(items, args.sample, args.seed)
        for item in chosen:
            print(item)
        return 0

    if not args.attribute:
        print("error: --attribute is required (or use --sample)", file=sys.stderr)
        return 2
    mode = Ac1Mode.GWET_STANDARD if args.mode == "gwet-standard" else Ac1Mode.PAPER_EQ1
    report = attribute_report(records, args.attribute, mode)
    print(f"attribute: {report.attribute} (mode {report.mode.value}, {report.pooling})")
    print("rater_a,rater_b,n_items,k,p_o,p_e,ac1")
    for row in report.rows:
        print(
            f"{row.rater_a},{row.rater_b},{row.n_items},{row.k},"
            f"{row.p_o:.6f},{row.p_e:.6f},{row.ac1:.6f}"
        )
    print(f"pooled_ac1,{report.pooled_ac1:.6f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .webapp import create_app

    store = WorkspaceStore(args.workspace)
    store.require_stage("entries")
    app = create_app(store, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# --- argument wiring ----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kevtriage",
        description="Exploited-vulnerability triage pipeline over a workspace directory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def workspace_flag(p):
        p.add_argument(
            "--workspace", default="workspace", help="workspace directory (default: ./workspace)"
        )

    p = sub.add_parser("ingest", help="parse a KEV feed snapshot (and CVE records) into the workspace")
    workspace_flag(p)
    p.add_argument("--feed", required=True, help="KEV feed JSON file")
    p.add_argument("--records", help="directory of CVE record JSON files")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("enrich", help="join catalog entries with CVE records")
    workspace_flag(p)
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("classify", help="assign UNSPSC categories and OT plausibility")
    workspace_flag(p)
    p.add_argument("--rules", help="classifier rule table CSV (default: bundled)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("advisories", help="load an advisory manifest and grade remediations")
    workspace_flag(p)
    p.add_argument("--manifest", required=True, help="advisory manifest JSON file")
    p.add_argument("--rules", help="specificity rule file JSON (default: bundled)")
    p.set_defaults(func=cmd_advisories)

    p = sub.add_parser("map", help="map entries to techniques and mitigation candidates")
    workspace_flag(p)
    p.add_argument("--attack-bundle", help="technique/mitigation STIX bundle (default: bundled)")
    p.add_argument("--rules", help="technique keyword rule CSV (default: bundled)")
    p.add_argument(
        "--threshold", type=float, default=0.0,
        help="drop technique mappings below this confidence (default: 0)",
    )
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("score", help="build and score playbook entries")
    workspace_flag(p)
    p.add_argument("--clock", help="timestamp for the emitted document (default: feed release date)")
    p.add_argument(
        "--value-density", type=float, default=1.0,
        help="effectiveness multiplier in [0,1] (default: 1.0)",
    )
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="write report tables and figures")
    workspace_flag(p)
    p.add_argument("--name", help=f"single report to produce ({', '.join(REPORT_NAMES)})")
    p.add_argument("--out", help="output directory (default: workspace state/reports)")
    p.add_argument("--top", type=int, default=15, help="rows in the mitigation ranking")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reliability", help="inter-rater agreement over a label set")
    workspace_flag(p)
    p.add_argument("--labels", help="labels CSV (default: labels recorded in the workspace)")
    p.add_argument("--attribute", help="attribute to evaluate")
    p.add_argument(
        "--mode", choices=("paper-eq1", "gwet-standard"), default="paper-eq1",
        help="chance-agreement formula (default: paper-eq1)",
    )
    p.add_argument("--sample", type=float, help="print a validation sample of this fraction instead")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default: 0)")
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("emit", help="write the canonical playbook document")
    workspace_flag(p)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("serve", help="start the HTTP service over the workspace")
    workspace_flag(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8200)
    p.add_argument("--frontend", help="directory of built console assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KevTriageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
