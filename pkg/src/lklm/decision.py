"""Decision support for choosing a model family per manufacturing sector.

Two inputs drive the recommendation: a cross-sector dependency matrix
(how much a sector's instructions lean on knowledge of other sectors,
1..3 per pair) and a fixed attribute scorecard for the three model
families.  Scorecard attributes are burden ratings from 1 (best) to 4
(worst): a transparency of 4 means hardest to audit, a compute of 1
means cheapest to run.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import LklmError


class DecisionError(LklmError):
    pass


class UnknownSectorError(DecisionError):
    pass


class MatrixFormatError(DecisionError):
    pass


class ModelClass(enum.Enum):
    NLP = "NLP"
    KG = "KG"
    LLM = "LLM"
    HYBRID_LKLM = "HYBRID_LKLM"


@dataclass(frozen=True)
class ModelClassScores:
    size: int
    compute: int
    manual_effort: int
    contextual: int
    transparency: int
    domains: int
    reasoning: int

    def total(self) -> int:
        return (
            self.size
            + self.compute
            + self.manual_effort
            + self.contextual
            + self.transparency
            + self.domains
            + self.reasoning
        )


def model_class_scores() -> dict[ModelClass, ModelClassScores]:
    """Burden scorecard for the three base families.  The hybrid family
    is not scored separately; it inherits the generative row."""
    return {
        ModelClass.NLP: ModelClassScores(
            size=1, compute=1, manual_effort=2, contextual=4,
            transparency=1, domains=4, reasoning=4,
        ),
        ModelClass.KG: ModelClassScores(
            size=3, compute=2, manual_effort=4, contextual=2,
            transparency=1, domains=2, reasoning=3,
        ),
        ModelClass.LLM: ModelClassScores(
            size=4, compute=4, manual_effort=1, contextual=1,
            transparency=4, domains=1, reasoning=1,
        ),
    }


def _ranking_total(mc: ModelClass, scores: dict[ModelClass, ModelClassScores]) -> int:
    if mc is ModelClass.HYBRID_LKLM:
        return scores[ModelClass.LLM].total()
    return scores[mc].total()


def ranked_classes() -> list[ModelClass]:
    """All four families ordered by total burden, ties by declaration
    order."""
    scores = model_class_scores()
    order = list(ModelClass)
    return sorted(order, key=lambda mc: (_ranking_total(mc, scores), order.index(mc)))


TIER_LOW = "LOW"
TIER_MEDIUM = "MEDIUM"
TIER_HIGH = "HIGH"

LLM_COMPUTE_THRESHOLD_GB = 8.0


def tier_for_sum(total: int) -> str:
    if total <= 16:
        return TIER_LOW
    if total <= 22:
        return TIER_MEDIUM
    return TIER_HIGH


@dataclass
class SectorMatrix:
    sectors: list[str]
    cells: dict[tuple[str, str], int] = field(default_factory=dict)

    def strength(self, row: str, col: str) -> int:
        return self.cells[(row, col)]

    def row_sum(self, sector: str) -> int:
        if sector not in self.sectors:
            raise UnknownSectorError(f"unknown sector {sector!r}")
        return sum(v for (r, _), v in self.cells.items() if r == sector)

    def validate(self) -> None:
        names = set(self.sectors)
        if len(names) != len(self.sectors):
            raise MatrixFormatError("duplicate sector names")
        for (r, c), v in self.cells.items():
            if r not in names or c not in names:
                raise MatrixFormatError(f"cell ({r!r}, {c!r}) names an unknown sector")
            if r == c:
                raise MatrixFormatError(f"self-dependency cell for {r!r}")
            if v not in (1, 2, 3):
                raise MatrixFormatError(f"cell ({r!r}, {c!r}) strength {v!r} not in 1..3")
        for r in self.sectors:
            for c in self.sectors:
                if r != c and (r, c) not in self.cells:
                    raise MatrixFormatError(f"missing cell ({r!r}, {c!r})")


def matrix_to_dict(matrix: SectorMatrix) -> dict:
    return {
        "sectors": list(matrix.sectors),
        "cells": {f"{r}|{c}": v for (r, c), v in sorted(matrix.cells.items())},
    }


def matrix_from_dict(data: dict) -> SectorMatrix:
    try:
        sectors = list(data["sectors"])
        cells: dict[tuple[str, str], int] = {}
        for key, value in data["cells"].items():
            row, sep, col = key.partition("|")
            if not sep:
                raise MatrixFormatError(f"cell key {key!r} is not 'Row|Col'")
            cells[(row, col)] = int(value)
    except (KeyError, TypeError, ValueError) as exc:
        raise MatrixFormatError(f"bad matrix shape: {exc}") from exc
    matrix = SectorMatrix(sectors=sectors, cells=cells)
    matrix.validate()
    return matrix


def save_matrix(matrix: SectorMatrix, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(matrix_to_dict(matrix), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_matrix(path: str | Path) -> SectorMatrix:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MatrixFormatError(f"not valid JSON: {exc}") from exc
    return matrix_from_dict(data)


def default_matrix() -> SectorMatrix:
    text = resources.files("lklm.data").joinpath("sector_dependency.json").read_text(
        encoding="utf-8"
    )
    return matrix_from_dict(json.loads(text))


TRANSPARENCY_LEVELS = ("low", "high")


@dataclass
class Recommendation:
    sector: str
    dependency_sum: int
    tier: str
    model_class: ModelClass
    ranked: list[ModelClass]
    rationale: str
    warnings: list[str] = field(default_factory=list)


def recommend(
    sector: str,
    compute_gb: float,
    transparency: str,
    matrix: SectorMatrix | None = None,
) -> Recommendation:
    """Pick a model family for a sector given the available accelerator
    memory and how auditable the output must be."""
    if transparency not in TRANSPARENCY_LEVELS:
        raise DecisionError(f"transparency must be one of {TRANSPARENCY_LEVELS}, got {transparency!r}")
    if compute_gb < 0:
        raise DecisionError(f"compute budget must be >= 0, got {compute_gb}")
    matrix = matrix or default_matrix()
    total = matrix.row_sum(sector)
    tier = tier_for_sum(total)
    scores = model_class_scores()
    warnings: list[str] = []

    if tier == TIER_LOW:
        choice = ModelClass.NLP
        s = scores[choice]
        rationale = (
            f"dependency sum {total} is low; keyword retrieval has the smallest "
            f"footprint (size {s.size}, compute {s.compute}) and its weak points "
            f"(contextual adaptation {s.contextual}, reasoning {s.reasoning}) "
            f"matter least in a self-contained sector"
        )
    elif tier == TIER_MEDIUM:
        choice = ModelClass.KG
        s = scores[choice]
        rationale = (
            f"dependency sum {total} is moderate; a knowledge graph links the "
            f"neighbouring sectors explicitly while staying auditable "
            f"(transparency {s.transparency}), at the price of curation "
            f"(manual effort {s.manual_effort})"
        )
    elif compute_gb < LLM_COMPUTE_THRESHOLD_GB:
        choice = ModelClass.KG
        s = scores[choice]
        warnings.append("compute budget below LLM threshold")
        rationale = (
            f"dependency sum {total} is high, but {compute_gb:g} GB cannot hold a "
            f"generative model (compute {scores[ModelClass.LLM].compute}); the "
            f"knowledge graph is the strongest family that fits "
            f"(transparency {s.transparency})"
        )
    elif transparency == "low":
        choice = ModelClass.LLM
        s = scores[choice]
        rationale = (
            f"dependency sum {total} is high and {compute_gb:g} GB fits a "
            f"generative model; it adapts across sectors best "
            f"(contextual adaptation {s.contextual}, domains {s.domains}) and "
            f"opaque output is acceptable here"
        )
    else:
        choice = ModelClass.HYBRID_LKLM
        s = scores[ModelClass.LLM]
        rationale = (
            f"dependency sum {total} is high and output must be auditable; "
            f"grounding a generative model (contextual adaptation {s.contextual}) "
            f"in a curated graph (transparency "
            f"{scores[ModelClass.KG].transparency}) covers both"
        )

    ranked = [choice] + [mc for mc in ranked_classes() if mc is not choice]
    return Recommendation(
        sector=sector,
        dependency_sum=total,
        tier=tier,
        model_class=choice,
        ranked=ranked,
        rationale=rationale,
        warnings=warnings,
    )
