"""Exploited-vulnerability triage toolkit.

Turns a known-exploited-vulnerabilities catalog plus vendor advisories
into remediation playbooks that prefer non-patch mitigations feasible in
operational environments, with agreement statistics over the analyst
labels that back the derived fields.
"""

__version__ = "0.1.0"
