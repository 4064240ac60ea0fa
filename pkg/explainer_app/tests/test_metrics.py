import numpy as np
from django.test import SimpleTestCase

from explainer_app.data.annotations import AnnotationSet, ImageAnnotation
from explainer_app.data.shapes import gen_shapes
from explainer_app.exceptions import EvaluationError
from explainer_app.evaluation.metrics import (
    AgreementQuery, BestEditInstance, MetricReport, agreement_cross_class, agreement_same_class, avg_edit_count,
    region_annotation_hit_rate, relaxation_fidelity,
)
from explainer_app.evaluation.selection import agreement_queries
from explainer_app.models import Edit, EditList, ExplanationResult, ExplanationStatus, SearchStrategy
from explainer_app.nn.architectures import linear_head
from explainer_app.nn.trainer import TrainingConfig, predict_labels, train
from explainer_app.rendering.receptive_field import ReceptiveFieldMap
from explainer_app.search.config import CandidateFilter, RelaxOptConfig
from explainer_app.seeding import seeded_stream
from explainer_app.tests.helpers import linear_model, random_grid, random_head_model, random_result


def cell_image(cell, channel, h=3, w=3, d=3):
    image = np.zeros((h, w, d))
    image[cell[0], cell[1], channel] = 1.0
    return image


class EditCountTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(47)

    def flipped(self, edits):
        return random_result(self.rng, edits=edits, status=ExplanationStatus.FLIPPED)

    def test_mean_of_one_two_three(self):
        report = avg_edit_count([self.flipped(1), self.flipped(2), self.flipped(3)])
        self.assertEqual(report.value, 2.0)
        self.assertEqual(report.details["histogram"], {1: 1, 2: 1, 3: 1})
        self.assertEqual(report.details["flip_rate"], 1.0)

    def test_all_single_edits(self):
        report = avg_edit_count([self.flipped(1) for _ in range(5)])
        self.assertEqual(report.value, 1.0)
        self.assertEqual(report.details["median"], 1.0)

    def test_exhausted_results_only_count_toward_flip_rate(self):
        exhausted = random_result(self.rng, edits=9, status=ExplanationStatus.EXHAUSTED)
        report = avg_edit_count([self.flipped(2), exhausted])
        self.assertEqual(report.value, 2.0)
        self.assertEqual(report.details["flip_rate"], 0.5)
        self.assertEqual(report.sample_count, 2)

    def test_nothing_flipped_is_degenerate(self):
        report = avg_edit_count([random_result(self.rng, edits=3, status=ExplanationStatus.EXHAUSTED)])
        self.assertIsNone(report.value)
        self.assertEqual(len(report.notes), 1)

    def test_empty_input(self):
        with self.assertRaises(EvaluationError):
            avg_edit_count([])

    def test_report_validation(self):
        with self.assertRaises(EvaluationError):
            MetricReport("rate", 1.5, 3)
        with self.assertRaises(EvaluationError):
            MetricReport("rate", 0.5, 0)


class AgreementTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(53)

    def test_identical_distractors_agree(self):
        model = random_head_model(self.rng, 3, 3, 2, 3)
        query = random_grid(self.rng, 3, 3, 2).as_hwd()
        distractor = random_grid(self.rng, 3, 3, 2).as_hwd()
        queries = [AgreementQuery("q", query, ((1, distractor), (1, distractor), (1, distractor)))]
        report = agreement_same_class(model, queries)
        self.assertEqual(report.value, 1.0)
        self.assertEqual(report.sample_count, 3)

    def dominant_cell_model(self, sensitive):
        """Class k only reads channel k of cell ``sensitive[k]``; class 0 wins on an empty grid."""
        weights = np.zeros((3, 3, 3, 3))
        for klass, (row, col) in sensitive.items():
            weights[row, col, klass, klass] = 10.0
        return linear_model(weights, bias=[1.0, 0.0, 0.0])

    def test_dominant_cell_agrees_across_classes(self):
        model = self.dominant_cell_model({1: (1, 1), 2: (1, 1)})
        distractors = ((1, cell_image((0, 0), 1)), (1, cell_image((2, 1), 1)),
                       (2, cell_image((0, 2), 2)), (2, cell_image((2, 2), 2)))
        queries = [AgreementQuery("q", np.zeros((3, 3, 3)), distractors)]
        self.assertEqual(agreement_same_class(model, queries).value, 1.0)
        cross = agreement_cross_class(model, queries)
        self.assertEqual(cross.value, 1.0)
        self.assertEqual(cross.sample_count, 4)

    def test_disjoint_cells_never_agree(self):
        model = self.dominant_cell_model({1: (0, 0), 2: (2, 2)})
        distractors = ((1, cell_image((1, 1), 1)), (2, cell_image((1, 1), 2)))
        queries = [AgreementQuery("q", np.zeros((3, 3, 3)), distractors)]
        self.assertEqual(agreement_cross_class(model, queries).value, 0.0)

    def test_cross_class_needs_two_classes(self):
        model = self.dominant_cell_model({1: (0, 0), 2: (2, 2)})
        distractors = ((1, cell_image((1, 1), 1)), (1, cell_image((0, 1), 1)))
        with self.assertRaises(EvaluationError):
            agreement_cross_class(model, [AgreementQuery("q", np.zeros((3, 3, 3)), distractors)])

    def test_query_without_pairs_is_skipped(self):
        model = self.dominant_cell_model({1: (1, 1), 2: (1, 1)})
        queries = [
            AgreementQuery("alone", np.zeros((3, 3, 3)), ((1, cell_image((0, 0), 1)),)),
            AgreementQuery("pair", np.zeros((3, 3, 3)), ((1, cell_image((0, 0), 1)), (1, cell_image((0, 1), 1)))),
        ]
        report = agreement_same_class(model, queries)
        self.assertEqual(report.value, 1.0)
        self.assertEqual(len(report.notes), 1)


class FidelityTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(59)

    def instances(self, count, **kwargs):
        model = random_head_model(self.rng, 3, 3, 2, 3)
        return model, [
            BestEditInstance(random_grid(self.rng, 3, 3, 2), random_grid(self.rng, 3, 3, 2),
                             int(self.rng.integers(3)), **kwargs)
            for _ in range(count)
        ]

    def test_exhaustive_against_itself(self):
        model, instances = self.instances(10)
        report = relaxation_fidelity(model, instances, compare=SearchStrategy.EXHAUSTIVE)
        self.assertEqual(report.value, 1.0)
        self.assertEqual(report.details["probability_ratio"], 1.0)

    def test_single_candidate_relaxed_matches(self):
        model, instances = self.instances(5, excluded=CandidateFilter.only(9, 4, 7))
        report = relaxation_fidelity(model, instances, RelaxOptConfig(max_steps=10))
        self.assertEqual(report.value, 1.0)

    def test_relaxed_ratio_is_bounded(self):
        model, instances = self.instances(5)
        report = relaxation_fidelity(model, instances, RelaxOptConfig(max_steps=60))
        self.assertTrue(0.0 <= report.value <= 1.0)
        self.assertLessEqual(report.details["probability_ratio"], 1.0 + 1e-9)
        self.assertEqual(len(report.samples), 5)

    def test_no_instances(self):
        model, _ = self.instances(0)
        with self.assertRaises(EvaluationError):
            relaxation_fidelity(model, [])


class HitRateTests(SimpleTestCase):
    def setUp(self):
        self.rf = ReceptiveFieldMap.for_extractor((), (4, 4))
        edits = EditList(4, 4, (Edit(0, 0, 1, 1), Edit(2, 3, 3, 2)))
        self.result = ExplanationResult(edits, ((-0.1, -3.0), (-0.9, -0.6), (-2.0, -0.2)),
                                        ExplanationStatus.FLIPPED, 0, 1, "q", "d")
        self.annotations = AnnotationSet({
            "q": ImageAnnotation(np.ones((4, 4)), (("a", 0, 0, True), ("b", 3, 2, True))),
            "d": ImageAnnotation(np.zeros((4, 4)), (("a", 1, 1, True), ("b", 2, 3, True))),
        })

    def test_full_and_empty_masks(self):
        reports = region_annotation_hit_rate([self.result], self.annotations, self.rf)
        self.assertEqual(reports["segmentation_query"].value, 1.0)
        self.assertEqual(reports["segmentation_distractor"].value, 0.0)
        self.assertEqual(reports["segmentation_query"].sample_count, 2)

    def test_keypoints_at_field_centers(self):
        reports = region_annotation_hit_rate([self.result], self.annotations, self.rf, radius=0.0)
        self.assertEqual(reports["keypoint_query"].value, 1.0)
        self.assertEqual(reports["keypoint_distractor"].value, 1.0)
        self.assertEqual(reports["same_keypoint"].value, 1.0)

    def test_far_keypoints_miss(self):
        far = AnnotationSet({
            "q": ImageAnnotation(np.ones((4, 4)), (("a", 3, 3, True),)),
            "d": ImageAnnotation(np.zeros((4, 4)), (("a", 3, 0, False),)),
        })
        reports = region_annotation_hit_rate([self.result], far, self.rf, radius=0.5)
        self.assertEqual(reports["keypoint_query"].value, 0.0)
        self.assertNotIn("keypoint_distractor", reports)
        self.assertNotIn("same_keypoint", reports)

    def test_missing_annotation_is_noted(self):
        reports = region_annotation_hit_rate([self.result], AnnotationSet({"q": self.annotations["q"]}), self.rf)
        self.assertEqual(reports, {})

    def test_mask_of_another_size_is_skipped(self):
        other = ExplanationResult(self.result.edits, self.result.trajectory, ExplanationStatus.FLIPPED,
                                  0, 1, "q2", "d")
        annotations = AnnotationSet({"q": self.annotations["q"], "d": self.annotations["d"],
                                     "q2": ImageAnnotation(np.ones((5, 4)), ())})
        with self.assertLogs("explainer_app.evaluation.metrics", "WARNING"):
            reports = region_annotation_hit_rate([self.result, other], annotations, self.rf)
        report = reports["segmentation_query"]
        self.assertEqual(report.sample_count, 2)
        self.assertEqual(report.notes, ("q2: mask (5, 4) does not match image (4, 4), skipped",))


class TrainedAgreementTests(SimpleTestCase):
    """Agreement on a color-coded shapes set, with a linear head trained directly on pixels."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = gen_shapes(300, (10, 10), "color", seed=21)
        cls.model = train((), linear_head(3), cls.dataset, TrainingConfig(epochs=20, batch_size=20, seed=21))
        cls.predictions = predict_labels(cls.model, cls.dataset.images)

    def test_model_reads_the_color(self):
        self.assertGreaterEqual(self.model.metrics["train_accuracy"], 0.95)

    def test_same_class_agreement_beats_cross_class(self):
        same, cross = agreement_queries(self.dataset, self.predictions, 20, 5, seeded_stream(21, "agreement"))
        self.assertEqual(len(same), 20)
        self.assertTrue(all(len(query.distractors) == 5 for query in same))
        same_report = agreement_same_class(self.model, same)
        cross_report = agreement_cross_class(self.model, cross)
        self.assertEqual(same_report.sample_count, 200)
        self.assertGreater(same_report.value, cross_report.value)
