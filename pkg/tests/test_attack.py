"""Tests for technique mapping, mitigation candidates, ratings, and steps."""

import json
from datetime import date

import pytest

from kevtriage.attack import (
    GENERIC_STEP_MARKER,
    AttackIndex,
    MappingMethod,
    MitigationCandidate,
    Rating,
    StepTemplates,
    TechniqueMapping,
    default_attack_index,
    default_mapping_rules,
    default_rating_rules,
    default_step_templates,
    derive_candidates,
    load_attack_dataset,
    map_cve_to_techniques,
    rate_effectiveness,
    render_ot_steps,
    techniques_to_mitigations,
)
from kevtriage.catalog import (
    CveRecord,
    EnrichedEntry,
    KevcEntry,
    RansomwareUse,
    UiRequired,
    parse_cvss_vector,
)
from kevtriage.errors import (
    EmptyDomainError,
    MalformedBundleError,
    UnknownTechniqueError,
)

RATING_ORDER = {Rating.LOW: 0, Rating.MEDIUM: 1, Rating.HIGH: 2}


def make_entry(cve_id="CVE-2024-1000", description="", vector=None, cwe_ids=(),
               product="TurbineViewer", vendor="Composite Controls",
               required_action="Apply updates per vendor instructions."):
    kevc = KevcEntry(
        cve_id=cve_id,
        vendor_project=vendor,
        product=product,
        vulnerability_name=f"{product} Vulnerability",
        date_added=date(2024, 3, 1),
        short_description=description,
        required_action=required_action,
        due_date=date(2024, 3, 22),
        known_ransomware_use=RansomwareUse.UNKNOWN,
        cwe_ids=tuple(cwe_ids),
    )
    record = None
    ui = UiRequired.UNKNOWN
    if vector is not None:
        cvss = parse_cvss_vector(vector)
        record = CveRecord(
            cve_id=cve_id,
            description=description,
            cvss=cvss,
            references=(),
            cwe_ids=tuple(cwe_ids),
            published=date(2024, 2, 20),
        )
        ui = UiRequired.YES if cvss.user_interaction.value == "required" else UiRequired.NO
    return EnrichedEntry(kevc=kevc, record=record, user_interaction_required=ui)


NET_VECTOR = "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H"
NET_UI_VECTOR = "CVSS:3.1/AV:N/AC:L/PR:N/UI:R/S:U/C:H/I:H/A:H"
LOCAL_VECTOR = "CVSS:3.1/AV:L/AC:L/PR:L/UI:N/S:U/C:H/I:H/A:H"
ADJ_VECTOR = "CVSS:3.1/AV:A/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H"


# --- bundle loading -----------------------------------------------------

def test_default_bundle_contains_segmentation():
    index = default_attack_index()
    assert index.mitigations["M1030"].name == "Network Segmentation"
    assert index.version == "15.1-triage-2025.08"


def test_revoked_and_deprecated_objects_filtered():
    index = default_attack_index()
    assert "T1175" not in index.techniques
    assert "M1002" not in index.mitigations
    assert "M1002" not in index.mitigation_to_techniques
    for techniques in index.mitigation_to_techniques.values():
        assert "T1175" not in techniques


def test_dangling_edges_dropped():
    # The pinned bundle has M1030->T1175 and M1002->T1190 edges; both ends
    # must vanish along with the retired objects.
    index = default_attack_index()
    assert index.mitigation_to_techniques["M1030"] == ("T1133", "T1190", "T1210")
    assert sorted(index.technique_to_mitigations["T1190"]) == ["M1030", "M1037"]


def _stix_technique(ext_id, name, uid, **extra):
    obj = {
        "type": "attack-pattern",
        "id": f"attack-pattern--{uid}",
        "name": name,
        "external_references": [
            {"source_name": "mitre-attack", "external_id": ext_id}
        ],
    }
    obj.update(extra)
    return obj


def _stix_mitigation(ext_id, name, uid, **extra):
    obj = {
        "type": "course-of-action",
        "id": f"course-of-action--{uid}",
        "name": name,
        "external_references": [
            {"source_name": "mitre-attack", "external_id": ext_id}
        ],
    }
    obj.update(extra)
    return obj


def test_non_mitigates_relationships_ignored():
    bundle = {
        "type": "bundle",
        "id": "bundle--00000000-0000-4000-8000-000000000001",
        "objects": [
            _stix_technique("T1190", "Exploit Public-Facing Application",
                            "00000000-0000-4000-8000-00000000000a"),
            _stix_mitigation("M1030", "Network Segmentation",
                             "00000000-0000-4000-8000-00000000000b"),
            {
                "type": "relationship",
                "id": "relationship--00000000-0000-4000-8000-00000000000c",
                "relationship_type": "uses",
                "source_ref": "course-of-action--00000000-0000-4000-8000-00000000000b",
                "target_ref": "attack-pattern--00000000-0000-4000-8000-00000000000a",
            },
        ],
    }
    index = load_attack_dataset(bundle)
    assert index.mitigation_to_techniques == {}
    assert index.technique_to_mitigations == {}


@pytest.mark.parametrize("payload", [
    b"not json at all {",
    json.dumps({"type": "report", "objects": []}),
    json.dumps({"type": "bundle"}),
])
def test_malformed_bundles_rejected(payload):
    with pytest.raises(MalformedBundleError):
        load_attack_dataset(payload)


def test_bundle_without_both_domains_rejected():
    only_technique = {
        "type": "bundle",
        "objects": [_stix_technique("T1190", "x", "00000000-0000-4000-8000-000000000002")],
    }
    only_mitigation = {
        "type": "bundle",
        "objects": [_stix_mitigation("M1030", "x", "00000000-0000-4000-8000-000000000003")],
    }
    for bundle in ({"type": "bundle", "objects": []}, only_technique, only_mitigation):
        with pytest.raises(EmptyDomainError):
            load_attack_dataset(bundle)


# --- technique mapping --------------------------------------------------

def test_web_interface_with_network_vector_maps_t1190():
    entry = make_entry(
        description="Unauthenticated remote code execution in the web interface.",
        vector=NET_VECTOR,
    )
    mappings = map_cve_to_techniques(entry)
    by_id = {m.technique_id: m for m in mappings}
    assert "T1190" in by_id
    hit = by_id["T1190"]
    assert hit.method is MappingMethod.KEYWORD_RULE
    # Two T1190 rules fire; the merge keeps the higher confidence and
    # accumulates both matched snippets as evidence.
    assert hit.confidence == 0.8
    assert len(hit.evidence) == 2


def test_network_gated_rule_needs_a_vector():
    text = "Unauthenticated remote code execution in the web interface."
    no_vector = map_cve_to_techniques(make_entry(description=text))
    assert all(m.technique_id != "T1190" for m in no_vector)
    local = map_cve_to_techniques(make_entry(description=text, vector=LOCAL_VECTOR))
    assert all(m.technique_id != "T1190" for m in local)


def test_crafted_document_requires_user_interaction():
    text = "A crafted document opened by the victim leads to code execution."
    with_ui = map_cve_to_techniques(make_entry(description=text, vector=NET_UI_VECTOR))
    assert any(m.technique_id == "T1204" for m in with_ui)
    without_ui = map_cve_to_techniques(make_entry(description=text, vector=NET_VECTOR))
    assert all(m.technique_id != "T1204" for m in without_ui)


def test_no_keyword_or_cwe_hits_yields_empty():
    entry = make_entry(description="An unspecified issue was addressed.", vector=NET_VECTOR)
    assert map_cve_to_techniques(entry) == []


def test_cwe_bridge_maps_memory_corruption():
    entry = make_entry(
        description="An unspecified issue was addressed.",
        vector=NET_UI_VECTOR,
        cwe_ids=("CWE-787",),
    )
    mappings = map_cve_to_techniques(entry)
    assert len(mappings) == 1
    hit = mappings[0]
    assert hit.technique_id == "T1203"
    assert hit.method is MappingMethod.CWE_BRIDGE
    assert hit.evidence == ("CWE-787",)
    assert hit.confidence == 0.4


def test_keyword_and_bridge_merge_keeps_max_confidence():
    entry = make_entry(
        description="OS command injection allows arbitrary commands.",
        vector=NET_VECTOR,
        cwe_ids=("CWE-78",),
    )
    mappings = [m for m in map_cve_to_techniques(entry) if m.technique_id == "T1059"]
    assert len(mappings) == 1
    hit = mappings[0]
    assert hit.confidence == 0.75
    assert "CWE-78" in hit.evidence
    assert any("command" in e.lower() for e in hit.evidence)


def test_mappings_sorted_and_stable():
    entry = make_entry(
        description="VPN appliance allows authentication bypass and command injection.",
        vector=NET_VECTOR,
    )
    first = map_cve_to_techniques(entry)
    second = map_cve_to_techniques(entry)
    assert first == second
    ids = [m.technique_id for m in first]
    assert ids == sorted(ids)
    assert set(ids) == {"T1133", "T1078", "T1059"}


def test_keyword_mapping_requires_evidence():
    with pytest.raises(ValueError):
        TechniqueMapping(
            cve_id="CVE-2024-1",
            technique_id="T1190",
            method=MappingMethod.KEYWORD_RULE,
            evidence=(),
            confidence=0.5,
        )
    with pytest.raises(ValueError):
        TechniqueMapping(
            cve_id="CVE-2024-1",
            technique_id="T1190",
            method=MappingMethod.MANUAL,
            evidence=("analyst",),
            confidence=0.0,
        )


# --- candidates ---------------------------------------------------------

def test_t1190_candidates_include_segmentation():
    index = default_attack_index()
    mapping = TechniqueMapping(
        cve_id="CVE-2024-1000",
        technique_id="T1190",
        method=MappingMethod.MANUAL,
        evidence=("analyst",),
        confidence=0.9,
    )
    candidates = techniques_to_mitigations(index, [mapping])
    ids = [c.mitigation_id for c in candidates]
    assert ids == ["M1030", "M1037"]
    assert all(c.via_techniques == ("T1190",) for c in candidates)
    assert all(c.effectiveness is None and c.ot_steps == () for c in candidates)


def test_shared_mitigation_collects_via_techniques():
    index = default_attack_index()
    mappings = [
        TechniqueMapping("CVE-2024-1000", "T1190", MappingMethod.MANUAL, ("a",), 0.9),
        TechniqueMapping("CVE-2024-1000", "T1133", MappingMethod.MANUAL, ("a",), 0.9),
    ]
    candidates = techniques_to_mitigations(index, mappings)
    m1030 = next(c for c in candidates if c.mitigation_id == "M1030")
    assert m1030.via_techniques == ("T1133", "T1190")


def test_unknown_technique_raises():
    index = default_attack_index()
    mapping = TechniqueMapping(
        cve_id="CVE-2024-1000",
        technique_id="T9999",
        method=MappingMethod.MANUAL,
        evidence=("analyst",),
        confidence=0.9,
    )
    with pytest.raises(UnknownTechniqueError) as excinfo:
        techniques_to_mitigations(index, [mapping])
    assert excinfo.value.technique_id == "T9999"


def test_candidate_requires_via_techniques():
    with pytest.raises(ValueError):
        MitigationCandidate(cve_id="CVE-2024-1", mitigation_id="M1030", via_techniques=())


# --- effectiveness ratings ----------------------------------------------

@pytest.mark.parametrize("mitigation_id,vector,expected,rule_id", [
    ("M1030", NET_VECTOR, Rating.HIGH, "RR-NETEXP-HIGH"),
    ("M1030", NET_UI_VECTOR, Rating.MEDIUM, "RR-NETEXP-UI"),
    ("M1030", ADJ_VECTOR, Rating.MEDIUM, "RR-ADJACENT"),
    ("M1030", LOCAL_VECTOR, Rating.LOW, "RR-LOCAL-EXPOSURE"),
    ("M1017", NET_VECTOR, Rating.LOW, "RR-USERVEC-NOUI"),
    ("M1017", NET_UI_VECTOR, Rating.MEDIUM, "RR-USERVEC-UI"),
])
def test_rating_matrix(mitigation_id, vector, expected, rule_id):
    candidate = MitigationCandidate(
        cve_id="CVE-2024-1000", mitigation_id=mitigation_id, via_techniques=("T1190",)
    )
    entry = make_entry(vector=vector)
    rated = rate_effectiveness(candidate, entry)
    assert rated.effectiveness is expected
    assert rated.rationale == rule_id


def test_exposure_class_without_vector_hits_wildcard_row():
    candidate = MitigationCandidate(
        cve_id="CVE-2024-1000", mitigation_id="M1030", via_techniques=("T1190",)
    )
    rated = rate_effectiveness(candidate, make_entry())
    assert rated.effectiveness is Rating.MEDIUM
    assert rated.rationale == "RR-EXPOSURE-DEFAULT"


def test_user_vector_without_vector_falls_back_to_default():
    # Both user_vector rows constrain UI, so a vectorless entry matches
    # nothing and takes the named default.
    candidate = MitigationCandidate(
        cve_id="CVE-2024-1000", mitigation_id="M1017", via_techniques=("T1204",)
    )
    rated = rate_effectiveness(candidate, make_entry())
    assert rated.effectiveness is Rating.MEDIUM
    assert rated.rationale == "default"


def test_unclassed_mitigation_defaults_to_medium():
    candidate = MitigationCandidate(
        cve_id="CVE-2024-1000", mitigation_id="M1050", via_techniques=("T1203",)
    )
    rated = rate_effectiveness(candidate, make_entry(vector=NET_VECTOR))
    assert rated.effectiveness is Rating.MEDIUM
    assert rated.rationale == "default"


def test_relaxing_ui_never_lowers_exposure_rating():
    # For exposure-blocking mitigations, moving UI from required to none
    # (more autonomous exploitation) must not make the rating drop.
    base = "CVSS:3.1/AV:{av}/AC:L/PR:N/UI:{ui}/S:U/C:H/I:H/A:H"
    candidate = MitigationCandidate(
        cve_id="CVE-2024-1000", mitigation_id="M1030", via_techniques=("T1190",)
    )
    for av in ("N", "A", "L", "P"):
        with_ui = rate_effectiveness(
            candidate, make_entry(vector=base.format(av=av, ui="R"))
        )
        without_ui = rate_effectiveness(
            candidate, make_entry(vector=base.format(av=av, ui="N"))
        )
        assert (
            RATING_ORDER[without_ui.effectiveness] >= RATING_ORDER[with_ui.effectiveness]
        ), f"AV:{av} rating dropped when UI relaxed"


# --- step rendering -----------------------------------------------------

def test_m1030_steps_substitute_product_and_ports():
    candidate = MitigationCandidate(
        cve_id="CVE-2024-1000", mitigation_id="M1030", via_techniques=("T1190",)
    )
    entry = make_entry(
        description="Remote code execution over SMB on TCP/445 in the web interface.",
        vector=NET_VECTOR,
    )
    rendered = render_ot_steps(candidate, entry)
    assert len(rendered.ot_steps) == 2
    assert "TurbineViewer" in rendered.ot_steps[0]
    assert "zone" in rendered.ot_steps[0]
    assert "deny-by-default" in rendered.ot_steps[1]
    assert "(observed: TCP/445)" in rendered.ot_steps[1]


def test_steps_without_port_mentions_render_clean():
    candidate = MitigationCandidate(
        cve_id="CVE-2024-1000", mitigation_id="M1030", via_techniques=("T1190",)
    )
    entry = make_entry(description="Remote code execution in the web interface.",
                      vector=NET_VECTOR)
    rendered = render_ot_steps(candidate, entry)
    assert "observed" not in rendered.ot_steps[1]
    assert not rendered.ot_steps[1].endswith(" ")


def test_missing_template_yields_marked_generic_step():
    candidate = MitigationCandidate(
        cve_id="CVE-2024-1000", mitigation_id="M1032", via_techniques=("T1133",)
    )
    empty = StepTemplates(version="test", templates={})
    rendered = render_ot_steps(candidate, make_entry(), templates=empty)
    assert len(rendered.ot_steps) == 1
    assert rendered.ot_steps[0].startswith(GENERIC_STEP_MARKER)
    description = default_attack_index().mitigations["M1032"].description
    assert description.strip() in rendered.ot_steps[0]


# --- full pipeline invariants -------------------------------------------

def _fixture_batch():
    entries = []
    for i in range(40):
        entries.append(make_entry(
            cve_id=f"CVE-2024-{20000 + i}",
            description="Unauthenticated remote code execution in the web interface.",
            vector=NET_VECTOR,
        ))
    for i in range(30):
        entries.append(make_entry(
            cve_id=f"CVE-2024-{21000 + i}",
            description="A crafted document opened by the victim runs code.",
            vector=NET_UI_VECTOR,
            cwe_ids=("CWE-787",),
        ))
    for i in range(10):
        entries.append(make_entry(
            cve_id=f"CVE-2024-{22000 + i}",
            description="An unspecified issue was addressed.",
        ))
    return entries


def test_derive_candidates_deterministic():
    entries = _fixture_batch()
    first = [derive_candidates(e) for e in entries]
    second = [derive_candidates(e) for e in entries]
    assert first == second
    for _, candidates in first:
        keys = [(c.cve_id, c.mitigation_id) for c in candidates]
        assert keys == sorted(keys)


def test_derived_candidates_are_complete_and_consistent():
    index = default_attack_index()
    for entry in _fixture_batch():
        mappings, candidates = derive_candidates(entry)
        mapped_ids = {m.technique_id for m in mappings}
        for candidate in candidates:
            assert candidate.mitigation_id in index.mitigations
            assert candidate.effectiveness is not None
            assert candidate.rationale
            assert len(candidate.ot_steps) >= 1
            for technique_id in candidate.via_techniques:
                assert technique_id in mapped_ids
                assert technique_id in index.techniques


def test_coverage_ratio_shape():
    # 144 drive-by entries reach one mitigation each; 54 client-side
    # entries reach two. 252 candidates over 198 CVEs, ratio about 1.27.
    entries = []
    for i in range(144):
        entries.append(make_entry(
            cve_id=f"CVE-2023-{30000 + i}",
            description="A drive-by compromise occurs when users browse untrusted sites.",
            vector=NET_UI_VECTOR,
        ))
    for i in range(54):
        entries.append(make_entry(
            cve_id=f"CVE-2023-{40000 + i}",
            description="Client-side memory corruption in the renderer process.",
            vector=NET_UI_VECTOR,
        ))
    total_candidates = 0
    covered = 0
    for entry in entries:
        _, candidates = derive_candidates(entry)
        assert candidates, entry.kevc.cve_id
        total_candidates += len(candidates)
        covered += 1
    assert covered == 198
    assert total_candidates == 252
    assert abs(total_candidates / covered - 1.27) < 0.01


def test_default_tables_are_versioned():
    assert default_mapping_rules().version == "2025.08.1"
    assert default_mapping_rules().cwe_bridge_version == "2025.08.1"
    assert default_rating_rules().version == "2025.08.1"
    assert default_rating_rules().classes_version == "2025.08.1"
    assert default_step_templates().version == "2025.08.1"
    assert default_attack_index().version == "15.1-triage-2025.08"


def test_attack_index_is_immutable_dataclass():
    index = default_attack_index()
    with pytest.raises(AttributeError):
        index.version = "tampered"
    assert isinstance(index, AttackIndex)
