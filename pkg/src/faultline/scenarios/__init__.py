"""Executable corpus of specification-flaw scenarios with expected
per-profile outcomes, plus the runner that checks them."""

from __future__ import annotations

import os
from typing import Dict, List, Optional, Sequence

from ..profiles import PROFILE_ORDER
from .corpus import build_corpus
from .model import (
    BuiltCase,
    CaseSpec,
    CaseVerdict,
    Expected,
    Scenario,
    UnknownScenario,
    run_case,
)

_CORPUS: Optional[Dict[str, Scenario]] = None


def corpus() -> Dict[str, Scenario]:
    global _CORPUS
    if _CORPUS is None:
        _CORPUS = build_corpus()
    return _CORPUS


def list_scenarios() -> List[Scenario]:
    return list(corpus().values())


def get_scenario(scenario_id: str) -> Scenario:
    try:
        return corpus()[scenario_id]
    except KeyError:
        raise UnknownScenario(scenario_id) from None


def build_scenario(scenario_id: str) -> List[BuiltCase]:
    """Materialize every case fixture of a scenario (fresh builds)."""
    scenario = get_scenario(scenario_id)
    return [case.build() for case in scenario.cases]


def run_scenario(scenario_id: str, profile_names: Sequence[str] = PROFILE_ORDER, *,
                 time_scale: float = 1.0, workers: int = 1) -> List[CaseVerdict]:
    scenario = get_scenario(scenario_id)
    verdicts: List[CaseVerdict] = []
    for case in scenario.cases:
        verdicts.extend(run_case(scenario, case, profile_names,
                                 time_scale=time_scale, workers=workers))
    return verdicts


def run_all(profile_names: Sequence[str] = PROFILE_ORDER, *, time_scale: float = 1.0,
            workers: int = 1, only: Optional[Sequence[str]] = None) -> List[CaseVerdict]:
    verdicts: List[CaseVerdict] = []
    for scenario_id in corpus():
        if only is not None and scenario_id not in only:
            continue
        verdicts.extend(run_scenario(scenario_id, profile_names,
                                     time_scale=time_scale, workers=workers))
    return verdicts


def dump_scenario(scenario_id: str, out_dir: str) -> List[str]:
    """Write every case's final repository files, TAL, fault plan, and
    expectation matrix for replay outside this package."""
    import json

    scenario = get_scenario(scenario_id)
    written: List[str] = []
    for case in scenario.cases:
        built = case.build()
        for phase in built.phases:
            phase()
        case_dir = os.path.join(out_dir, scenario.scenario_id, case.case_id)
        os.makedirs(case_dir, exist_ok=True)
        for host, mount in built.fixture.mounts.items():
            host_dir = os.path.join(case_dir, host.replace(":", "_"))
            os.makedirs(host_dir, exist_ok=True)
            for uri, data in mount.state.objects:
                filename = uri.rsplit("/", 1)[-1].replace("%", "_")
                with open(os.path.join(host_dir, filename), "wb") as fh:
                    fh.write(data)
            for name, data in mount.extra_files.items():
                with open(os.path.join(host_dir, name), "wb") as fh:
                    fh.write(data)
            if mount.plan.faults:
                with open(os.path.join(host_dir, "plan.json"), "w", encoding="utf-8") as fh:
                    fh.write(mount.plan.to_json())
        with open(os.path.join(case_dir, "trust-anchor.tal"), "w", encoding="utf-8") as fh:
            fh.write(built.tal.to_text())
        matrix = {name: exp.to_dict() for name, exp in case.expectations.items()}
        with open(os.path.join(case_dir, "expectations.json"), "w", encoding="utf-8") as fh:
            json.dump(matrix, fh, indent=2, sort_keys=True)
        written.append(case_dir)
    return written
