"""faultline: a differential RPKI conformance laboratory.

Encode and decode every RPKI object type, simulate publication points
with injected faults, validate repositories under interpretation
profiles that model how relying parties resolve RFC ambiguities, fuzz
objects to surface validation inconsistencies, and replay a scenario
corpus of known specification flaws with expected per-profile outcomes.
"""

__version__ = "0.1.0"
