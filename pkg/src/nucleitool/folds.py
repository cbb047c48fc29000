"""Leave-one-domain-out fold assignment."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import NucleiError

N_FOLDS = 5


class WrongDomainCount(NucleiError, ValueError):
    pass


@dataclass(frozen=True)
class FoldSpec:
    """Fold ``k`` holds every image of ``domains[k]``; folds are ordered by name."""

    domains: tuple[str, ...]
    folds: tuple[tuple[int, ...], ...]

    def train_indices(self, k: int) -> list[int]:
        return sorted(i for j, fold in enumerate(self.folds) if j != k for i in fold)

    def to_json(self) -> dict:
        return {
            "folds": [
                {"fold": k, "domain": d, "indices": list(f)}
                for k, (d, f) in enumerate(zip(self.domains, self.folds))
            ]
        }


def split_by_domain(domains: Sequence[str]) -> FoldSpec:
    """One fold per source domain, in lexicographic order of domain name.

    Raises:
        WrongDomainCount: unless exactly five distinct names occur.
    """
    names = sorted(set(domains))
    if len(names) != N_FOLDS:
        raise WrongDomainCount(f"expected {N_FOLDS} distinct domains, found {len(names)}: {names}")
    folds = tuple(tuple(i for i, d in enumerate(domains) if d == name) for name in names)
    return FoldSpec(domains=tuple(names), folds=folds)


def read_domains(path) -> list[str]:
    """One domain name per line; blank lines are ignored."""
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]
