"""Deterministic synthetic workspace inputs for tests and demos.

Builds a 1,391-entry catalog whose category, exploitation-flavor,
advisory-format, and remediation-label mixes are pinned so that the
toolkit's own statistics land on known reference values (65.4% OT
plausibility, 73.6% no-interaction within OT, format shares
73.9/12.4/1.1, remediation shares 11.3/70.4/5.0/13.4 with the 100.1
display-rounding artifact, and M1030 leading the mitigation table).

Everything derives from the seed through the same SplitMix64 generator
the reliability module uses, so identical seeds produce byte-identical
input files on any platform.
"""

import csv
import io
import json
import sys
from dataclasses import dataclass
from datetime import date, timedelta
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping

from .reliability import _SplitMix64, sample_validation_set

DEFAULT_SEED = 20250801

FEED_TITLE = "Synthetic Known Exploited Vulnerabilities Fixture"
START_DATE = date(2021, 11, 3)

# Flavors: description texture, CVSS shape, CWE, and therefore which
# technique rules fire.  NOMATCH entries have no CVE record at all.
NET_RCE = "net_rce"
VPN = "vpn"
SMB = "smb"
CLIENT_DOC = "client_doc"
BROWSER = "browser"
PRIVESC = "privesc"
CREDS = "creds"
CMD = "cmd"
NOMATCH = "nomatch"


@dataclass(frozen=True)
class FlavorSpec:
    description: str
    name_suffix: str
    av: str | None  # vector AV code; None = no record
    ui: str | None
    score: float | None
    cwes: tuple[str, ...]


FLAVORS: Mapping[str, FlavorSpec] = {
    NET_RCE: FlavorSpec(
        "Unauthenticated remote code execution in the web interface.",
        "Remote Code Execution Vulnerability",
        "N", "N", 9.8, ("CWE-22",),
    ),
    VPN: FlavorSpec(
        "The VPN web portal allows unauthenticated remote code execution.",
        "VPN Portal Remote Code Execution Vulnerability",
        "N", "N", 9.8, ("CWE-22",),
    ),
    SMB: FlavorSpec(
        "A flaw in the SMB service allows lateral movement between hosts.",
        "SMB Lateral Movement Vulnerability",
        "A", "N", 8.8, ("CWE-20",),
    ),
    CLIENT_DOC: FlavorSpec(
        "A crafted document opened by the victim triggers client-side "
        "memory corruption.",
        "Document Parsing Memory Safety Vulnerability",
        "N", "R", 8.8, ("CWE-787",),
    ),
    BROWSER: FlavorSpec(
        "A drive-by compromise via a malicious web page triggers "
        "client-side memory corruption.",
        "Drive-by Memory Corruption Vulnerability",
        "N", "R", 8.8, ("CWE-787",),
    ),
    PRIVESC: FlavorSpec(
        "A privilege escalation flaw in the kernel-mode driver allows "
        "local users to gain elevated rights.",
        "Privilege Escalation Vulnerability",
        "L", "N", 7.8, ("CWE-269",),
    ),
    CREDS: FlavorSpec(
        "Hard-coded credentials permit an authentication bypass of the "
        "management interface.",
        "Authentication Bypass Vulnerability",
        "N", "N", 9.8, ("CWE-287",),
    ),
    CMD: FlavorSpec(
        "The web console allows OS command injection and execution of "
        "arbitrary commands.",
        "Command Injection Vulnerability",
        "N", "N", 9.8, ("CWE-78",),
    ),
    NOMATCH: FlavorSpec(
        "An unspecified issue was addressed.",
        "Unspecified Vulnerability",
        None, None, None, (),
    ),
}


@dataclass(frozen=True)
class CategorySpec:
    key: str
    vendor: str
    product: str
    unspsc_code: str
    ot_expected: bool
    flavors: tuple[tuple[str, int], ...]

    @property
    def count(self) -> int:
        return sum(n for _, n in self.flavors)


# Counts are load-bearing: they pin the reference shares listed in the
# module docstring.  Change them only together with the tests.
CATEGORIES: tuple[CategorySpec, ...] = (
    CategorySpec("os", "Northfield Systems", "Northfield Linux", "43233004", True,
                 ((NET_RCE, 121), (SMB, 60), (PRIVESC, 88), (CREDS, 30),
                  (CLIENT_DOC, 32), (NOMATCH, 20))),
    CategorySpec("browser", "Swiftpane Project", "Swiftpane Browser", "43232401", True,
                 ((BROWSER, 110), (CLIENT_DOC, 18))),
    CategorySpec("appserver", "Meridian Software", "Meridian Application Server",
                 "43232912", True, ((NET_RCE, 80), (CMD, 30))),
    CategorySpec("gateway", "Bastion Networks", "Bastion VPN Gateway", "43222609", True,
                 ((VPN, 96),)),
    CategorySpec("firewall", "Ironline Security", "Ironline Firewall", "43222501", True,
                 ((VPN, 24), (NET_RCE, 66))),
    CategorySpec("pdf", "Papergate Labs", "Papergate PDF Viewer", "43232108", True,
                 ((CLIENT_DOC, 60),)),
    CategorySpec("virtualization", "Stratos Systems", "Stratos Hypervisor",
                 "43233411", True, ((NET_RCE, 40), (PRIVESC, 10))),
    CategorySpec("database", "Corestone Data", "Corestone Database Server",
                 "43232304", True, ((NET_RCE, 13), (CREDS, 10))),
    CategorySpec("ics", "Gridmaster Automation", "Gridmaster SCADA Suite",
                 "43232910", True, ((NET_RCE, 2),)),
    CategorySpec("mobile", "Skylark Apps", "Skylark Mobile App", "43231505", False,
                 ((CLIENT_DOC, 40), (PRIVESC, 34), (NOMATCH, 11))),
    CategorySpec("email", "Bayside Messaging", "Bayside Mail Server", "43233501", False,
                 ((CLIENT_DOC, 50), (NET_RCE, 28))),
    CategorySpec("office", "Clearwrite Software", "Clearwrite Office Suite",
                 "43231513", False, ((CLIENT_DOC, 72),)),
    CategorySpec("cms", "Pagecraft", "Pagecraft CMS", "43232612", False,
                 ((NET_RCE, 30), (CMD, 36))),
    CategorySpec("collab", "Huddlewire", "Huddlewire Collaboration Server",
                 "43232303", False, ((CLIENT_DOC, 24), (NET_RCE, 16))),
    CategorySpec("ecommerce", "Cartwheel Commerce", "Cartwheel Commerce Platform",
                 "43232614", False, ((NET_RCE, 12), (CMD, 20))),
    CategorySpec("devtools", "Forgeline Tools", "Forgeline Build Server",
                 "43232402", False, ((CMD, 26), (CREDS, 6))),
    CategorySpec("media", "Vistaplay Software", "Vistaplay Media Player",
                 "43231514", False, ((PRIVESC, 26),)),
    CategorySpec("backup", "Vaultline Systems", "Vaultline Backup Manager",
                 "43233415", False, ((CREDS, 24),)),
    CategorySpec("crm", "Relatia Software", "Relatia CRM", "43231507", False,
                 ((NET_RCE, 11), (CREDS, 13), (PRIVESC, 2))),
)

TOTAL_ENTRIES = sum(spec.count for spec in CATEGORIES)

# Advisory formats: the media vendor is end-of-life (all NoneFound), one
# NOMATCH entry per NOMATCH-bearing category is forced NoneFound so a
# NothingActionable gap always exists at a known CVE, and the rest of
# the pool is dealt out by seeded shuffle.
FORMAT_POOL = {"web_page": 1028, "csaf": 172, "cvrf": 15, "other_structured": 19,
               "none_found": 157}

# Per-format remediation label mix (specific / generic / no_workaround).
LABEL_MIX = {
    "csaf": (60, 20, 92),
    "cvrf": (5, 3, 7),
    "other_structured": (6, 3, 10),
    "web_page": (115, 43, 870),
}

SPECIFIC = "specific"
GENERIC = "generic"
NO_WORKAROUND = "no_workaround"
NO_ADVISORY = "no_advisory"

GENERIC_WORKAROUND_TEXT = "Restrict access where possible."


@dataclass(frozen=True)
class PlannedEntry:
    index: int
    cve_id: str
    category: str
    vendor: str
    product: str
    unspsc_code: str
    ot_expected: bool
    flavor: str
    advisory_format: str
    remediation_label: str
    port: int

    @property
    def date_added(self) -> date:
        return START_DATE + timedelta(days=self.index // 2)

    @property
    def due_date(self) -> date:
        return self.date_added + timedelta(days=21)

    @property
    def patched_version(self) -> str:
        return f"{2 + self.index % 7}.{self.index % 10}"

    @property
    def detailed_workaround(self) -> str:
        return (
            f"Disable the remote_mgmt service on {self.product} and block "
            f"TCP/{self.port} at the zone firewall until the fix is applied."
        )

    @property
    def vendor_fix_text(self) -> str:
        return f"Update {self.product} to version {self.patched_version}."


def _shuffled(items: list, seed: int) -> list:
    rng = _SplitMix64(seed)
    items = list(items)
    for i in range(len(items) - 1, 0, -1):
        j = rng.below(i + 1)
        items[i], items[j] = items[j], items[i]
    return items


@lru_cache(maxsize=4)
def build_fixture_plan(seed: int = DEFAULT_SEED) -> tuple[PlannedEntry, ...]:
    """The full per-entry plan; everything else renders from this."""
    skeleton = []  # (index, category spec, flavor)
    index = 0
    for spec in CATEGORIES:
        for flavor, count in spec.flavors:
            for _ in range(count):
                skeleton.append((index, spec, flavor))
                index += 1

    seeder = _SplitMix64(seed)
    format_seed = seeder.next_u64()
    label_seeds = {fmt: seeder.next_u64() for fmt in sorted(LABEL_MIX)}

    # Deal formats: forced NoneFound first, then the shuffled pool.
    forced_none: set[int] = set()
    for spec in CATEGORIES:
        if spec.key == "media":
            forced_none.update(
                i for i, s, _ in skeleton if s.key == "media"
            )
    for spec_key in ("os", "mobile"):
        first_nomatch = next(
            i for i, s, flavor in skeleton if s.key == spec_key and flavor == NOMATCH
        )
        forced_none.add(first_nomatch)

    pool = []
    for fmt, count in sorted(FORMAT_POOL.items()):
        remaining = count - (len(forced_none) if fmt == "none_found" else 0)
        pool.extend([fmt] * remaining)
    pool = _shuffled(pool, format_seed)
    assert len(pool) == len(skeleton) - len(forced_none)

    formats: dict[int, str] = {}
    cursor = 0
    for i, _, _ in skeleton:
        if i in forced_none:
            formats[i] = "none_found"
        else:
            formats[i] = pool[cursor]
            cursor += 1

    # Deal remediation labels within each format group.
    labels: dict[int, str] = {}
    by_format: dict[str, list[int]] = {}
    for i, _, _ in skeleton:
        by_format.setdefault(formats[i], []).append(i)
    for fmt, members in sorted(by_format.items()):
        if fmt == "none_found":
            for i in members:
                labels[i] = NO_ADVISORY
            continue
        specific, generic, nowork = LABEL_MIX[fmt]
        assert specific + generic + nowork == len(members)
        deck = _shuffled(
            [SPECIFIC] * specific + [GENERIC] * generic + [NO_WORKAROUND] * nowork,
            label_seeds[fmt],
        )
        for i, label in zip(members, deck):
            labels[i] = label

    plan = []
    for i, spec, flavor in skeleton:
        year = 2021 + (i % 3)
        plan.append(
            PlannedEntry(
                index=i,
                cve_id=f"CVE-{year}-{30000 + i}",
                category=spec.key,
                vendor=spec.vendor,
                product=spec.product,
                unspsc_code=spec.unspsc_code,
                ot_expected=spec.ot_expected,
                flavor=flavor,
                advisory_format=formats[i],
                remediation_label=labels[i],
                port=8000 + (i % 500),
            )
        )
    return tuple(plan)


def fixture_gap_cve_ids(seed: int = DEFAULT_SEED) -> tuple[str, ...]:
    """CVEs guaranteed to end in a NothingActionable gap."""
    return tuple(
        entry.cve_id
        for entry in build_fixture_plan(seed)
        if entry.flavor == NOMATCH and entry.remediation_label == NO_ADVISORY
    )


# --- KEVC feed ----------------------------------------------------------

def fixture_feed(seed: int = DEFAULT_SEED) -> dict:
    plan = build_fixture_plan(seed)
    rows = []
    for entry in plan:
        spec = FLAVORS[entry.flavor]
        notes = ""
        if entry.category == "media":
            notes = "Product is end of life; the vendor publishes no advisories."
        rows.append({
            "cveID": entry.cve_id,
            "vendorProject": entry.vendor,
            "product": entry.product,
            "vulnerabilityName": f"{entry.product} {spec.name_suffix}",
            "dateAdded": entry.date_added.isoformat(),
            "shortDescription": spec.description,
            "requiredAction": "Apply updates per vendor instructions.",
            "dueDate": entry.due_date.isoformat(),
            "knownRansomwareCampaignUse": "Known" if entry.index % 9 == 0 else "Unknown",
            "notes": notes,
            "cwes": list(spec.cwes),
        })
    return {
        "title": FEED_TITLE,
        "catalogVersion": f"fixture-{seed}",
        "dateReleased": "2025-08-01T00:00:00.000Z",
        "count": len(rows),
        "vulnerabilities": rows,
    }


# --- CVE records --------------------------------------------------------

def _vector_block(entry: PlannedEntry) -> tuple[str, dict]:
    """Metric key and block; versions vary for texture, semantics do not."""
    spec = FLAVORS[entry.flavor]
    pr = "L" if entry.flavor == PRIVESC else "N"
    if entry.index % 11 == 0:
        ui = {"N": "N", "R": "A"}[spec.ui]
        vector = (
            f"CVSS:4.0/AV:{spec.av}/AC:L/AT:N/PR:{pr}/UI:{ui}"
            "/VC:H/VI:H/VA:H/SC:N/SI:N/SA:N"
        )
        return "cvssV4_0", {"vectorString": vector, "baseScore": spec.score, "version": "4.0"}
    if entry.index % 7 == 0:
        vector = f"CVSS:3.0/AV:{spec.av}/AC:L/PR:{pr}/UI:{spec.ui}/S:U/C:H/I:H/A:H"
        return "cvssV3_0", {"vectorString": vector, "baseScore": spec.score, "version": "3.0"}
    vector = f"CVSS:3.1/AV:{spec.av}/AC:L/PR:{pr}/UI:{spec.ui}/S:U/C:H/I:H/A:H"
    return "cvssV3_1", {"vectorString": vector, "baseScore": spec.score, "version": "3.1"}


def fixture_records(seed: int = DEFAULT_SEED) -> list[dict]:
    """CVE records for every non-NOMATCH entry."""
    records = []
    for entry in build_fixture_plan(seed):
        if entry.flavor == NOMATCH:
            continue
        spec = FLAVORS[entry.flavor]
        key, block = _vector_block(entry)
        published = entry.date_added - timedelta(days=14)
        records.append({
            "dataType": "CVE_RECORD",
            "dataVersion": "5.1",
            "cveMetadata": {
                "cveId": entry.cve_id,
                "assignerShortName": entry.vendor.split()[0].lower(),
                "datePublished": f"{published.isoformat()}T00:00:00Z",
            },
            "containers": {
                "cna": {
                    "descriptions": [{"lang": "en", "value": spec.description}],
                    "references": [
                        {"url": f"https://advisories.example/{entry.category}/{entry.cve_id}"}
                    ],
                    "problemTypes": [
                        {
                            "descriptions": [
                                {"lang": "en", "type": "CWE", "cweId": cwe,
                                 "description": cwe}
                                for cwe in spec.cwes
                            ]
                        }
                    ],
                    "metrics": [{key: block}],
                }
            },
        })
    return records


# --- advisories ---------------------------------------------------------

def _remediation_dicts(entry: PlannedEntry) -> list[dict]:
    fixes = [{"category": "vendor_fix", "details": entry.vendor_fix_text,
              "url": f"https://downloads.example/{entry.category}/{entry.patched_version}"}]
    if entry.remediation_label == SPECIFIC:
        fixes.append({"category": "workaround", "details": entry.detailed_workaround})
    elif entry.remediation_label == GENERIC:
        fixes.append({"category": "workaround", "details": GENERIC_WORKAROUND_TEXT})
    return fixes


def _csaf_document(entry: PlannedEntry) -> dict:
    pid = "CSAFPID-0001"
    release = f"{entry.due_date.isoformat()}T00:00:00Z"
    remediations = [
        dict(rem, product_ids=[pid]) for rem in _remediation_dicts(entry)
    ]
    return {
        "document": {
            "category": "csaf_security_advisory",
            "csaf_version": "2.0",
            "title": f"{entry.product} security advisory",
            "publisher": {
                "category": "vendor",
                "name": entry.vendor,
                "namespace": f"https://{entry.category}.example",
            },
            "tracking": {
                "id": f"{entry.vendor.split()[0].upper()}-{entry.cve_id.split('-')[1]}-{entry.index:04d}",
                "status": "final",
                "version": "1.0.0",
                "initial_release_date": release,
                "current_release_date": release,
                "revision_history": [
                    {"number": "1.0.0", "date": release, "summary": "Initial release"}
                ],
            },
        },
        "product_tree": {
            "branches": [
                {
                    "category": "vendor",
                    "name": entry.vendor,
                    "branches": [
                        {
                            "category": "product_name",
                            "name": entry.product,
                            "branches": [
                                {
                                    "category": "product_version",
                                    "name": entry.patched_version,
                                    "product": {
                                        "product_id": pid,
                                        "name": f"{entry.vendor} {entry.product} {entry.patched_version}",
                                    },
                                }
                            ],
                        }
                    ],
                }
            ]
        },
        "vulnerabilities": [
            {
                "cve": entry.cve_id,
                "product_status": {"known_affected": [pid]},
                "remediations": remediations,
            }
        ],
    }


_CVRF_REMEDIATION = """    <vuln:Remediation Type="{rtype}">
        <vuln:Description>{details}</vuln:Description>
        <vuln:ProductID>{pid}</vuln:ProductID>
      </vuln:Remediation>
"""


def _cvrf_document(entry: PlannedEntry) -> str:
    pid = "LCPID-0001"
    pieces = []
    for rem in _remediation_dicts(entry):
        rtype = "Official Fix" if rem["category"] == "vendor_fix" else "Workaround"
        pieces.append(
            _CVRF_REMEDIATION.format(rtype=rtype, details=rem["details"], pid=pid)
        )
    return f"""<?xml version="1.0" encoding="UTF-8"?>
<cvrfdoc xmlns="http://www.icasi.org/CVRF/schema/cvrf/1.2"
         xmlns:vuln="http://www.icasi.org/CVRF/schema/vuln/1.2"
         xmlns:prod="http://www.icasi.org/CVRF/schema/prod/1.2">
  <DocumentTitle>{entry.product} legacy advisory</DocumentTitle>
  <DocumentType>Security Advisory</DocumentType>
  <DocumentPublisher Type="Vendor" VendorID="{entry.vendor}"/>
  <DocumentTracking>
    <Identification><ID>{entry.vendor.split()[0].upper()}-{entry.cve_id.split('-')[1]}-{entry.index:04d}</ID></Identification>
    <Status>Final</Status>
    <Version>1.0</Version>
    <CurrentReleaseDate>{entry.due_date.isoformat()}T00:00:00</CurrentReleaseDate>
  </DocumentTracking>
  <prod:ProductTree>
    <prod:FullProductName ProductID="{pid}">{entry.vendor} {entry.product} {entry.patched_version}</prod:FullProductName>
  </prod:ProductTree>
  <vuln:Vulnerability Ordinal="1">
    <vuln:CVE>{entry.cve_id}</vuln:CVE>
    <vuln:ProductStatuses>
      <vuln:Status Type="Known Affected"><vuln:ProductID>{pid}</vuln:ProductID></vuln:Status>
    </vuln:ProductStatuses>
    <vuln:Remediations>
  {"".join(pieces).rstrip()}
    </vuln:Remediations>
  </vuln:Vulnerability>
</cvrfdoc>
"""


def fixture_advisory_manifest(seed: int = DEFAULT_SEED) -> dict:
    items = []
    for entry in build_fixture_plan(seed):
        if entry.advisory_format == "none_found":
            items.append({"cve_id": entry.cve_id, "kind": "none_found"})
        elif entry.advisory_format == "csaf":
            items.append({
                "cve_id": entry.cve_id,
                "kind": "csaf",
                "url": f"https://{entry.category}.example/csaf/{entry.cve_id}.json",
                "document": _csaf_document(entry),
            })
        elif entry.advisory_format == "cvrf":
            items.append({
                "cve_id": entry.cve_id,
                "kind": "cvrf",
                "url": f"https://{entry.category}.example/cvrf/{entry.cve_id}.xml",
                "document_xml": _cvrf_document(entry),
            })
        else:
            items.append({
                "cve_id": entry.cve_id,
                "kind": entry.advisory_format,
                "advisory_id": f"{entry.vendor.split()[0].upper()}-{entry.cve_id.split('-')[1]}-{entry.index:04d}",
                "vendor": entry.vendor,
                "url": f"https://{entry.category}.example/advisories/{entry.cve_id}",
                "last_updated": entry.due_date.isoformat(),
                "remediations": _remediation_dicts(entry),
            })
    return {"manifest_version": "1", "advisories": items}


# --- reliability labels -------------------------------------------------

def fixture_labels_csv(seed: int = DEFAULT_SEED) -> str:
    """Double-rated validation sample over three attributes.

    Rater r2 disagrees on every 17th sampled item, giving agreement
    realistically short of perfect.
    """
    plan = build_fixture_plan(seed)
    by_cve = {entry.cve_id: entry for entry in plan}
    sample = sample_validation_set(sorted(by_cve), 0.10, seed)

    flips = {
        "advisory_format": lambda v: "web_page" if v != "web_page" else "none_found",
        "remediation_label": lambda v: NO_WORKAROUND if v != NO_WORKAROUND else GENERIC,
        "ot_relevance": lambda v: "false" if v == "true" else "true",
    }
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["item_id", "rater_id", "attribute", "label"])
    for position, cve_id in enumerate(sample):
        entry = by_cve[cve_id]
        truth = {
            "advisory_format": (
                "csaf2" if entry.advisory_format == "csaf" else entry.advisory_format
            ),
            "remediation_label": entry.remediation_label,
            "ot_relevance": "true" if entry.ot_expected else "false",
        }
        for attribute, value in truth.items():
            writer.writerow([cve_id, "r1", attribute, value])
            disagree = position % 17 == 16
            writer.writerow([
                cve_id, "r2", attribute,
                flips[attribute](value) if disagree else value,
            ])
    return out.getvalue()


# --- materialization ----------------------------------------------------

@dataclass(frozen=True)
class FixturePaths:
    root: Path
    feed: Path
    records_dir: Path
    advisories: Path
    labels: Path


def write_workspace_inputs(directory: str | Path, seed: int = DEFAULT_SEED) -> FixturePaths:
    """Write feed, records, advisory manifest, and labels under a directory."""
    root = Path(directory)
    records_dir = root / "records"
    records_dir.mkdir(parents=True, exist_ok=True)

    feed_path = root / "kev_feed.json"
    feed_path.write_text(
        json.dumps(fixture_feed(seed), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    for record in fixture_records(seed):
        cve_id = record["cveMetadata"]["cveId"]
        (records_dir / f"{cve_id}.json").write_text(
            json.dumps(record, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    advisories_path = root / "advisories.json"
    advisories_path.write_text(
        json.dumps(fixture_advisory_manifest(seed), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    labels_path = root / "labels.csv"
    labels_path.write_text(fixture_labels_csv(seed), encoding="utf-8")
    return FixturePaths(
        root=root,
        feed=feed_path,
        records_dir=records_dir,
        advisories=advisories_path,
        labels=labels_path,
    )


def _main(argv: list[str]) -> int:
    if not 1 <= len(argv) <= 2:
        print("usage: python -m kevtriage.fixtures OUTDIR [SEED]", file=sys.stderr)
        return 2
    seed = int(argv[1]) if len(argv) == 2 else DEFAULT_SEED
    paths = write_workspace_inputs(argv[0], seed)
    for path in (paths.feed, paths.records_dir, paths.advisories, paths.labels):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(_main(sys.argv[1:]))
