"""Recipe-driven repository generation and on-disk pubpoint state.

A recipe is a small JSON description (chain depth/breadth, ROA counts,
optional byte-level overrides); the output directory holds one folder
per publication point plus the trust anchor locator, and loads straight
back into the simulator.
"""

from __future__ import annotations

import json
import os
import urllib.parse
from typing import Dict, List, Optional, Tuple

from .asn1 import RawInteger
from .cabuild import Fixture
from .fetch import Mount
from .pubpoint import RepositoryState
from .rpkiobjects import Tal


class InvalidRecipe(ValueError):
    pass


_DEFAULTS = {
    "name": "lab",
    "depth": 1,
    "breadth": 1,
    "roas_per_ca": 1,
    "seed": 0,
    "as_id_hex": None,
    # When set (e.g. "https://127.0.0.1:8443"), SIA URIs point at the
    # endpoint that will serve this state instead of logical host names.
    "server_base": None,
}


def parse_recipe(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidRecipe(f"recipe is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidRecipe("recipe must be a JSON object")
    recipe = dict(_DEFAULTS)
    unknown = set(data) - set(_DEFAULTS)
    if unknown:
        raise InvalidRecipe(f"unknown recipe keys: {sorted(unknown)}")
    recipe.update(data)
    if recipe["depth"] < 1 or recipe["breadth"] < 1 or recipe["roas_per_ca"] < 0:
        raise InvalidRecipe("depth/breadth must be >= 1 and roas_per_ca >= 0")
    return recipe


def build_from_recipe(recipe: dict, notify_base=None, ta_cert_base=None) -> Tuple[Fixture, Tal]:
    base = recipe.get("server_base")
    if base and notify_base is None:
        notify_base = lambda host: f"{base}/{host}/notification.xml"  # noqa: E731
        ta_cert_base = lambda host: f"{base}/{host}/ta.cer"  # noqa: E731
    fixture = Fixture(seed=recipe["seed"], notify_base=notify_base,
                      ta_cert_base=ta_cert_base)
    ta = fixture.add_ta(recipe["name"])
    as_override: Optional[RawInteger] = None
    if recipe["as_id_hex"]:
        as_override = RawInteger(bytes.fromhex(recipe["as_id_hex"]))

    parents = [ta]
    first = True
    for level in range(recipe["depth"]):
        next_parents: List = []
        for parent in parents:
            width = recipe["breadth"] if parent is ta else 1
            for i in range(width):
                child = parent.add_child(f"{recipe['name']}-l{level + 1}n{i:03d}")
                for r in range(recipe["roas_per_ca"]):
                    asn = as_override if (as_override is not None and first) \
                        else fixture.next_asn()
                    first = False
                    child.add_roa(f"r{r}", asn, [str(fixture.next_prefix())])
                next_parents.append(child)
        parents = next_parents
    fixture.commit_all()
    return fixture, fixture.tal_for(ta)


# ---------------------------------------------------------------------------
# On-disk pubpoint state
# ---------------------------------------------------------------------------

def save_mounts(out_dir: str, mounts: Dict[str, Mount], tal: Optional[Tal] = None,
                tal_name: str = "trust-anchor") -> None:
    os.makedirs(out_dir, exist_ok=True)
    for host, mount in mounts.items():
        host_dir = os.path.join(out_dir, "pubpoints", host.replace(":", "+"))
        os.makedirs(os.path.join(host_dir, "repo"), exist_ok=True)
        files = {}
        for index, (uri, data) in enumerate(mount.state.objects):
            filename = f"{index:04d}_" + urllib.parse.quote(
                uri.rsplit("/", 1)[-1], safe=".-_")
            with open(os.path.join(host_dir, "repo", filename), "wb") as fh:
                fh.write(data)
            files[uri] = filename
        for name, data in mount.extra_files.items():
            with open(os.path.join(host_dir, name), "wb") as fh:
                fh.write(data)
        meta = {
            "host": host,
            "session_id": mount.state.session_id,
            "serial": mount.state.serial,
            "files": files,
            "extra_files": sorted(mount.extra_files),
        }
        with open(os.path.join(host_dir, "meta.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    if tal is not None:
        with open(os.path.join(out_dir, f"{tal_name}.tal"), "w", encoding="utf-8") as fh:
            fh.write(tal.to_text())


def load_mounts(state_dir: str) -> Dict[str, Mount]:
    """Rebuild mounts from a saved directory; the delta log restarts, so a
    freshly served state offers snapshot-only updates until mutated."""
    pubpoints = os.path.join(state_dir, "pubpoints")
    if not os.path.isdir(pubpoints):
        raise InvalidRecipe(f"{state_dir} does not contain a pubpoints/ directory")
    mounts: Dict[str, Mount] = {}
    for entry in sorted(os.listdir(pubpoints)):
        host_dir = os.path.join(pubpoints, entry)
        meta_path = os.path.join(host_dir, "meta.json")
        if not os.path.isfile(meta_path):
            continue
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        objects = []
        for uri, filename in sorted(meta["files"].items()):
            with open(os.path.join(host_dir, "repo", filename), "rb") as fh:
                objects.append((uri, fh.read()))
        extra = {}
        for name in meta.get("extra_files", []):
            with open(os.path.join(host_dir, name), "rb") as fh:
                extra[name] = fh.read()
        state = RepositoryState(
            host=meta["host"], session_id=meta["session_id"],
            serial=meta["serial"], objects=tuple(sorted(objects)))
        mounts[meta["host"]] = Mount(state, extra_files=extra)
    return mounts


def generate(recipe_text: str, out_dir: str) -> Tuple[str, List[str]]:
    """CLI entry: build the recipe and write it to disk. Returns the TAL
    path and the list of pubpoint hosts."""
    recipe = parse_recipe(recipe_text)
    fixture, tal = build_from_recipe(recipe)
    save_mounts(out_dir, fixture.mounts, tal=tal, tal_name=recipe["name"])
    return os.path.join(out_dir, f"{recipe['name']}.tal"), sorted(fixture.mounts)
