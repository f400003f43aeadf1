"""Command-line pipeline over the synthetic workspace."""

import json
from importlib import resources
from pathlib import Path

import pytest

from kevtriage import cli
from kevtriage.workspace import WorkspaceStore


class TestChaining:
    def test_all_stages_present(self, built_workspace):
        store = WorkspaceStore(built_workspace)
        for stage in (
            "catalog", "records", "provenance", "entries",
            "advisories", "mappings", "candidates", "playbook", "gaps",
        ):
            assert store.has_stage(stage), stage

    def test_emit_before_ingest(self, tmp_path, capsys):
        code = cli.main(["emit", "--workspace", str(tmp_path / "empty")])
        assert code == 1
        err = capsys.readouterr().err
        assert "missing pipeline stage" in err
        assert "score" in err

    def test_enrich_before_ingest(self, tmp_path, capsys):
        code = cli.main(["enrich", "--workspace", str(tmp_path / "empty")])
        assert code == 1
        assert "run the ingest command first" in capsys.readouterr().err

    def test_unknown_command(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2
        assert "invalid choice" in capsys.readouterr().err

    def test_locked_workspace(self, workspace_copy, capsys):
        (Path(workspace_copy) / ".lock").write_text("12345")
        code = cli.main(["enrich", "--workspace", workspace_copy])
        assert code == 1
        assert "locked" in capsys.readouterr().err

    def test_missing_feed_file(self, tmp_path, capsys):
        code = cli.main([
            "ingest", "--workspace", str(tmp_path / "ws"),
            "--feed", str(tmp_path / "nope.json"),
        ])
        assert code == 1

    def test_serve_requires_entries(self, tmp_path, capsys):
        code = cli.main(["serve", "--workspace", str(tmp_path / "empty")])
        assert code == 1
        assert "run the enrich command first" in capsys.readouterr().err


class TestStageContents:
    def test_catalog_stage(self, built_workspace):
        store = WorkspaceStore(built_workspace)
        catalog = store.read_stage("catalog")
        assert catalog["declared_count"] == 1391
        assert len(catalog["entries"]) == 1391
        assert catalog["warnings"] == []
        assert len(store.read_stage("records")) == 1360

    def test_entries_carry_both_enrichment_passes(self, built_workspace):
        rows = WorkspaceStore(built_workspace).read_stage("entries")
        interaction = sum(row["ui_required"] == "no" for row in rows)
        ot = sum(row["ot_relevant"] for row in rows)
        assert (interaction, ot) == (954, 910)

    def test_provenance_versions(self, built_workspace):
        provenance = WorkspaceStore(built_workspace).read_stage("provenance")
        assert provenance["feed"]["entry_count"] == 1391
        assert set(provenance["versions"]) == {
            "attack_dataset", "technique_rules", "cwe_bridge", "rating_rules",
            "mitigation_classes", "step_templates", "effectiveness_formula",
            "change_risk_formula",
        }

    def test_gap_stage(self, built_workspace):
        gaps = WorkspaceStore(built_workspace).read_stage("gaps")["by_cve"]
        assert sorted(gaps) == [
            "CVE-2021-30336", "CVE-2021-30984", "CVE-2021-30990",
            "CVE-2022-30331", "CVE-2022-30337",
        ]

    def test_playbook_document(self, built_workspace):
        text = WorkspaceStore(built_workspace).read_stage_text("playbook")
        document = json.loads(text)
        assert len(document["entries"]) == 1386
        assert document["generated_at"] == "2025-08-01T00:00:00Z"


class TestEmit:
    def test_emit_to_file_matches_stage(self, built_workspace, tmp_path):
        out = tmp_path / "playbook.json"
        assert cli.main(["emit", "--workspace", built_workspace, "--out", str(out)]) == 0
        stage = WorkspaceStore(built_workspace).read_stage_text("playbook")
        assert out.read_text(encoding="utf-8") == stage

    def test_emit_to_stdout(self, built_workspace, capsys):
        assert cli.main(["emit", "--workspace", built_workspace]) == 0
        text = capsys.readouterr().out
        assert json.loads(text)["schema_version"] == "1.0.0"


class TestReportCommand:
    def test_default_writes_tables_and_figures(self, workspace_copy, tmp_path):
        out = tmp_path / "reports"
        assert cli.main(["report", "--workspace", workspace_copy, "--out", str(out)]) == 0
        expected = {
            "advisory_formats.csv", "advisory_formats.png",
            "remediation_availability.csv", "remediation_availability.png",
            "ot_plausibility.csv", "interaction_all.csv", "interaction_ot.csv",
            "ot_shares.png", "top_mitigations.csv", "top_mitigations.png",
            "vendor_advisories.csv",
        }
        assert {p.name for p in out.iterdir()} == expected
        # Figures are real PNG files, not zero-byte placeholders.
        for name in ("advisory_formats.png", "ot_shares.png", "top_mitigations.png"):
            assert (out / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_single_report_contents(self, workspace_copy, tmp_path):
        out = tmp_path / "one"
        assert cli.main([
            "report", "--workspace", workspace_copy,
            "--name", "top-mitigations", "--out", str(out),
        ]) == 0
        lines = (out / "top_mitigations.csv").read_text().splitlines()
        assert lines[0] == "rank,mitigation_id,total,high,medium,low"
        assert lines[1] == "1,M1030,711,651,60,0"
        assert not (out / "advisory_formats.csv").exists()

    def test_breakdown_percentages(self, workspace_copy, tmp_path):
        out = tmp_path / "fmt"
        assert cli.main([
            "report", "--workspace", workspace_copy,
            "--name", "advisory-formats", "--out", str(out),
        ]) == 0
        lines = (out / "advisory_formats.csv").read_text().splitlines()
        assert lines[0] == "label,count,share,percent"
        by_label = {line.split(",")[0]: line for line in lines[1:]}
        assert by_label["web_page"].endswith(",73.9")
        assert by_label["web_page"].split(",")[1] == "1028"
        assert by_label["csaf2"].endswith(",12.4")

    def test_unknown_name(self, workspace_copy, capsys):
        code = cli.main(["report", "--workspace", workspace_copy, "--name", "heatmap"])
        assert code == 2
        assert "known reports" in capsys.readouterr().err

    def test_default_output_dir(self, workspace_copy):
        assert cli.main(["report", "--workspace", workspace_copy, "--name", "vendors"]) == 0
        assert (Path(workspace_copy) / "state/reports/vendor_advisories.csv").exists()


class TestReliabilityCommand:
    def test_table_output(self, fixture_inputs, capsys):
        code = cli.main([
            "reliability", "--labels", str(fixture_inputs.labels),
            "--attribute", "advisory_format",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "rater_a,rater_b,n_items,k,p_o,p_e,ac1" in out
        assert "r1,r2,140,5," in out
        assert "pooled_ac1,0.899946" in out

    def test_mode_flag(self, fixture_inputs, capsys):
        assert cli.main([
            "reliability", "--labels", str(fixture_inputs.labels),
            "--attribute", "ot_relevance", "--mode", "gwet-standard",
        ]) == 0
        assert "mode gwet_standard" in capsys.readouterr().out

    def test_sample_mode(self, fixture_inputs, capsys):
        assert cli.main([
            "reliability", "--labels", str(fixture_inputs.labels),
            "--sample", "0.5", "--seed", "3",
        ]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 70  # half of the 140 labeled items
        assert all(line.startswith("CVE-") for line in lines)

    def test_attribute_required(self, fixture_inputs, capsys):
        code = cli.main(["reliability", "--labels", str(fixture_inputs.labels)])
        assert code == 2
        assert "--attribute" in capsys.readouterr().err

    def test_workspace_labels_fallback(self, workspace_copy, fixture_inputs, capsys):
        import csv

        with open(fixture_inputs.labels, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        WorkspaceStore(workspace_copy).record_labels(rows)
        capsys.readouterr()
        assert cli.main([
            "reliability", "--workspace", workspace_copy,
            "--attribute", "remediation_label",
        ]) == 0
        assert "pooled_ac1,0.890" in capsys.readouterr().out

    def test_no_labels_anywhere(self, workspace_copy, capsys):
        code = cli.main([
            "reliability", "--workspace", workspace_copy, "--attribute", "ot_relevance",
        ])
        assert code == 1
        assert "no labels" in capsys.readouterr().err


class TestFlags:
    def test_score_clock_override(self, workspace_copy):
        assert cli.main([
            "score", "--workspace", workspace_copy, "--clock", "2026-01-05T09:30:00Z",
        ]) == 0
        document = json.loads(WorkspaceStore(workspace_copy).read_stage_text("playbook"))
        assert document["generated_at"] == "2026-01-05T09:30:00Z"

    def test_map_threshold_prunes_everything(self, workspace_copy):
        # No keyword rule reaches 0.9, so nothing survives the cut.
        assert cli.main([
            "map", "--workspace", workspace_copy, "--threshold", "0.9",
        ]) == 0
        store = WorkspaceStore(workspace_copy)
        candidates = store.read_stage("candidates")["by_cve"]
        assert all(not per_cve for per_cve in candidates.values())
        assert store.read_stage("mappings")["threshold"] == 0.9
        # Scoring still works; entries fall back to advisory remediations.
        assert cli.main(["score", "--workspace", workspace_copy]) == 0
        gaps = store.read_stage("gaps")["by_cve"]
        assert len(gaps) == 157  # every no-advisory entry is now a gap

    def test_classify_explicit_rules_match_default(self, workspace_copy, tmp_path, built_workspace):
        rules = tmp_path / "rules.csv"
        rules.write_text(
            resources.files("kevtriage.data").joinpath("unspsc_rules.csv").read_text("utf-8"),
            encoding="utf-8",
        )
        assert cli.main([
            "classify", "--workspace", workspace_copy, "--rules", str(rules),
        ]) == 0
        ours = (Path(workspace_copy) / "state/entries.json").read_bytes()
        theirs = (Path(built_workspace) / "state/entries.json").read_bytes()
        assert ours == theirs
