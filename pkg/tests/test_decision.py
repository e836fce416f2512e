from __future__ import annotations

import pytest

from lklm import decision as d

PUBLISHED_SUMS = {
    "Machinery": 24,
    "Automotive": 24,
    "Electronics": 23,
    "Chemical": 26,
    "Plastics": 26,
    "Metal Fabrication": 19,
    "Pharmaceutical": 17,
    "Aerospace": 21,
    "Wood": 15,
    "Furniture": 16,
    "Ceramics": 13,
    "Textile & Apparel": 14,
    "Food & Beverages": 16,
}


class TestScorecard:
    def test_spot_values(self):
        scores = d.model_class_scores()
        assert scores[d.ModelClass.NLP].compute == 1
        assert scores[d.ModelClass.LLM].transparency == 4
        assert scores[d.ModelClass.KG].manual_effort == 4

    def test_totals(self):
        scores = d.model_class_scores()
        assert scores[d.ModelClass.NLP].total() == 17
        assert scores[d.ModelClass.KG].total() == 17
        assert scores[d.ModelClass.LLM].total() == 16

    def test_ranked_order(self):
        assert d.ranked_classes() == [
            d.ModelClass.LLM,
            d.ModelClass.HYBRID_LKLM,
            d.ModelClass.NLP,
            d.ModelClass.KG,
        ]


class TestMatrix:
    def test_row_sums_match_published(self):
        matrix = d.default_matrix()
        assert set(matrix.sectors) == set(PUBLISHED_SUMS)
        for sector, want in PUBLISHED_SUMS.items():
            assert matrix.row_sum(sector) == want, sector

    def test_cell_bounds(self):
        matrix = d.default_matrix()
        assert all(v in (1, 2, 3) for v in matrix.cells.values())
        assert len(matrix.cells) == 13 * 12

    def test_unknown_sector(self):
        with pytest.raises(d.UnknownSectorError):
            d.default_matrix().row_sum("Garden Gnomes")

    def test_round_trip(self, tmp_path):
        matrix = d.default_matrix()
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        d.save_matrix(matrix, p1)
        d.save_matrix(d.load_matrix(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_validation_catches_bad_matrices(self, tmp_path):
        import json

        good = d.matrix_to_dict(d.default_matrix())
        bad = dict(good, cells=dict(good["cells"], **{"Machinery|Machinery": 2}))
        p = tmp_path / "m.json"
        p.write_text(json.dumps(bad))
        with pytest.raises(d.MatrixFormatError):
            d.load_matrix(p)
        bad = dict(good, cells=dict(good["cells"], **{"Machinery|Automotive": 9}))
        p.write_text(json.dumps(bad))
        with pytest.raises(d.MatrixFormatError):
            d.load_matrix(p)
        missing = dict(good, cells={k: v for k, v in good["cells"].items() if k != "Wood|Furniture"})
        p.write_text(json.dumps(missing))
        with pytest.raises(d.MatrixFormatError):
            d.load_matrix(p)


class TestTiers:
    def test_thresholds(self):
        assert d.tier_for_sum(12) == d.TIER_LOW
        assert d.tier_for_sum(16) == d.TIER_LOW
        assert d.tier_for_sum(17) == d.TIER_MEDIUM
        assert d.tier_for_sum(22) == d.TIER_MEDIUM
        assert d.tier_for_sum(23) == d.TIER_HIGH
        assert d.tier_for_sum(36) == d.TIER_HIGH


class TestRecommend:
    def test_high_tier_with_budget_low_transparency(self):
        rec = d.recommend("Automotive", 16, "low")
        assert rec.model_class is d.ModelClass.LLM
        assert rec.tier == d.TIER_HIGH
        assert rec.warnings == []

    def test_high_tier_with_budget_high_transparency(self):
        rec = d.recommend("Automotive", 16, "high")
        assert rec.model_class is d.ModelClass.HYBRID_LKLM

    def test_low_tier_picks_retrieval(self):
        for transparency in ("low", "high"):
            rec = d.recommend("Textile & Apparel", 16, transparency)
            assert rec.model_class is d.ModelClass.NLP
            assert rec.tier == d.TIER_LOW

    def test_medium_tier_picks_graph(self):
        rec = d.recommend("Metal Fabrication", 16, "low")
        assert rec.model_class is d.ModelClass.KG
        assert rec.tier == d.TIER_MEDIUM

    def test_high_tier_without_budget_warns(self):
        rec = d.recommend("Chemical", 4, "low")
        assert rec.model_class is d.ModelClass.KG
        assert "compute budget below LLM threshold" in rec.warnings

    def test_ranked_starts_with_choice_and_covers_all(self):
        rec = d.recommend("Automotive", 16, "high")
        assert rec.ranked[0] is rec.model_class
        assert set(rec.ranked) == set(d.ModelClass)
        assert len(rec.ranked) == 4

    def test_budget_monotonicity(self):
        for sector in PUBLISHED_SUMS:
            for transparency in ("low", "high"):
                recs = [d.recommend(sector, gb, transparency) for gb in (4, 16, 64)]
                # once the budget crosses the threshold the choice is stable
                assert recs[1].model_class is recs[2].model_class
                # a bigger budget never introduces a warning
                assert not recs[1].warnings and not recs[2].warnings

    def test_rationale_mentions_numbers_only(self):
        rec = d.recommend("Automotive", 16, "high")
        assert str(rec.dependency_sum) in rec.rationale

    def test_bad_inputs(self):
        with pytest.raises(d.DecisionError):
            d.recommend("Automotive", 16, "medium")
        with pytest.raises(d.DecisionError):
            d.recommend("Automotive", -1, "low")
        with pytest.raises(d.UnknownSectorError):
            d.recommend("Garden Gnomes", 16, "low")
