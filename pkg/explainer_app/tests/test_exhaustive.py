import numpy as np
from django.test import SimpleTestCase

from explainer_app.exceptions import ExhaustedError, ShapeError
from explainer_app.features import single_edit
from explainer_app.models import FeatureGrid
from explainer_app.nn.network import head_logprobs
from explainer_app.search.config import CandidateFilter
from explainer_app.search.exhaustive import best_edit_exhaustive, candidate_scores
from explainer_app.tests.helpers import linear_model, random_grid, random_head_model


def brute_force(model, grid, distractor, target, excluded=CandidateFilter()):
    """Plain double loop; strict > keeps the first (row-major) maximum."""
    allowed = excluded.allowed(grid.cells)
    best, best_score = None, -np.inf
    for i in range(grid.cells):
        for j in range(grid.cells):
            if not allowed[i, j]:
                continue
            score = head_logprobs(model, single_edit(grid, distractor, i, j))[target]
            if best is None or score > best_score:
                best, best_score = (i, j), score
    return best, best_score


class ExhaustiveSearchTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(21)

    def test_matches_brute_force_oracle(self):
        for _ in range(200):
            d = int(self.rng.integers(1, 5))
            classes = int(self.rng.integers(2, 5))
            model = random_head_model(self.rng, 3, 3, d, classes)
            grid, distractor = random_grid(self.rng, 3, 3, d), random_grid(self.rng, 3, 3, d)
            target = int(self.rng.integers(classes))
            found = best_edit_exhaustive(model, grid, distractor, target)
            (i, j), score = brute_force(model, grid, distractor, target)
            self.assertEqual((found.query_cell, found.source_cell), (i, j))
            self.assertAlmostEqual(found.score, score, places=12)

    def test_matches_oracle_under_exclusions(self):
        for _ in range(50):
            model = random_head_model(self.rng, 3, 3, 2, 3)
            grid, distractor = random_grid(self.rng, 3, 3, 2), random_grid(self.rng, 3, 3, 2)
            excluded = CandidateFilter(
                frozenset(int(c) for c in self.rng.choice(9, size=3, replace=False)),
                frozenset(int(c) for c in self.rng.choice(9, size=2, replace=False)),
                frozenset({(int(self.rng.integers(9)), int(self.rng.integers(9)))}),
            )
            found = best_edit_exhaustive(model, grid, distractor, 1, excluded)
            expected, _ = brute_force(model, grid, distractor, 1, excluded)
            self.assertEqual((found.query_cell, found.source_cell), expected)
            self.assertNotIn(found.query_cell, excluded.query_cells)
            self.assertNotIn(found.source_cell, excluded.source_cells)

    def test_constant_grids_tie_to_first_pair(self):
        # small integer weights keep every logit exact, so the tie is exact too
        model = linear_model(self.rng.integers(-3, 4, size=(2, 2, 3, 2)))
        grid = FeatureGrid.from_hwd(np.full((2, 2, 3), 0.5))
        scores, allowed = candidate_scores(model, grid, grid, 1)
        self.assertTrue(allowed.all())
        self.assertTrue(np.all(scores == scores[0, 0]))
        found = best_edit_exhaustive(model, grid, grid, 1)
        self.assertEqual((found.query_cell, found.source_cell), (0, 0))

    def test_single_cell_grid(self):
        model = random_head_model(self.rng, 1, 1, 2, 2)
        grid, distractor = random_grid(self.rng, 1, 1, 2), random_grid(self.rng, 1, 1, 2)
        found = best_edit_exhaustive(model, grid, distractor, 0)
        self.assertEqual((found.query_cell, found.source_cell), (0, 0))

    def test_all_excluded(self):
        model = random_head_model(self.rng, 2, 2, 1, 2)
        grid = random_grid(self.rng, 2, 2, 1)
        with self.assertRaises(ExhaustedError):
            best_edit_exhaustive(model, grid, grid, 0, CandidateFilter(query_cells=frozenset(range(4))))

    def test_workers_do_not_change_result(self):
        model = random_head_model(self.rng, 4, 4, 3, 3)
        grid, distractor = random_grid(self.rng, 4, 4, 3), random_grid(self.rng, 4, 4, 3)
        serial, _ = candidate_scores(model, grid, distractor, 2, workers=1)
        threaded, _ = candidate_scores(model, grid, distractor, 2, workers=4)
        np.testing.assert_array_equal(serial, threaded)
        self.assertEqual(best_edit_exhaustive(model, grid, distractor, 2, workers=1),
                         best_edit_exhaustive(model, grid, distractor, 2, workers=4))

    def test_geometry_mismatch(self):
        model = random_head_model(self.rng, 2, 2, 1, 2)
        with self.assertRaises(ShapeError):
            best_edit_exhaustive(model, random_grid(self.rng, 2, 2, 1), random_grid(self.rng, 2, 1, 1), 0)
