"""Bundled example inputs."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .datalog import Query, parse_program
from .relstore import Database, DomainOverrides, load_csv, parse_domain_overrides

NAMES = ("running_example", "airbnb")


@dataclass
class Fixture:
    name: str
    path: Path
    query: Query
    db: Database
    overrides: DomainOverrides

    @property
    def rules_path(self) -> Path:
        return self.path / "rules.dl"

    @property
    def schema_path(self) -> Path:
        return self.path / "schema.txt"

    @property
    def domains_path(self) -> Path | None:
        p = self.path / "domains.txt"
        return p if p.exists() else None


def fixture_dir(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name}; choose from {', '.join(NAMES)}")
    return Path(str(resources.files("provsumm") / "data" / name))


def load_fixture(name: str) -> Fixture:
    path = fixture_dir(name)
    query = parse_program((path / "rules.dl").read_text(encoding="utf-8"))
    db = load_csv(path, (path / "schema.txt").read_text(encoding="utf-8"))
    dom = path / "domains.txt"
    overrides = parse_domain_overrides(dom.read_text(encoding="utf-8")) if dom.exists() else DomainOverrides()
    return Fixture(name, path, query, db, overrides)
