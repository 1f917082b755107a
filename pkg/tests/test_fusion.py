import json
import random

import pytest

from centerfuse import (
    Box,
    Branch,
    Detection,
    DetectorIdCollision,
    EmptyFusionPolicy,
    Provenance,
    UnknownImage,
    fuse_dataset,
    fuse_image,
    parse_detections_json,
    provenance_sidecar,
    serialize_detections,
    serialize_provenance,
    to_detection_set,
)
from conftest import make_detections, make_manifest
from oracles import fusion_rule_oracle


def dets(*boxes):
    return [Detection(box=Box(*b), score=0.9) for b in boxes]


class TestFuseImage:
    def test_retained_with_witness(self):
        fused, branch = fuse_image(dets((0, 0, 10, 10)), dets((2, 2, 8, 8)))
        assert branch is Branch.BOTH
        assert len(fused) == 1
        fb = fused[0]
        assert fb.detection.box == Box(0, 0, 10, 10)
        assert fb.provenance is Provenance.A_RETAINED
        assert fb.witness_index == 0

    def test_unwitnessed_box_discarded(self):
        fused, branch = fuse_image(
            dets((0, 0, 10, 10), (20, 20, 30, 30)), dets((2, 2, 8, 8))
        )
        assert branch is Branch.BOTH
        assert [fb.detection.box for fb in fused] == [Box(0, 0, 10, 10)]

    def test_b_fallback_verbatim(self):
        b = dets((1, 1, 2, 2))
        fused, branch = fuse_image([], b)
        assert branch is Branch.ONLY_B
        assert [fb.detection for fb in fused] == b
        assert all(fb.provenance is Provenance.B_FALLBACK for fb in fused)

    def test_a_all_verbatim(self):
        a = dets((1, 1, 2, 2), (3, 3, 4, 4))
        fused, branch = fuse_image(a, [])
        assert branch is Branch.ONLY_A
        assert [fb.detection for fb in fused] == a
        assert all(fb.provenance is Provenance.A_ALL for fb in fused)

    def test_both_empty(self):
        fused, branch = fuse_image([], [])
        assert branch is Branch.NEITHER
        assert fused == ()

    def test_smallest_witness_wins(self):
        fused, _ = fuse_image(
            dets((0, 0, 10, 10)), dets((4, 4, 6, 6), (3, 3, 7, 7))
        )
        assert fused[0].witness_index == 0

    def test_one_b_center_can_justify_many_a_boxes(self):
        fused, _ = fuse_image(
            dets((0, 0, 10, 10), (2, 2, 12, 12)), dets((4, 4, 6, 6))
        )
        assert len(fused) == 2

    def test_duplicates_preserved_independently(self):
        fused, _ = fuse_image(
            dets((0, 0, 10, 10), (0, 0, 10, 10)), dets((2, 2, 8, 8))
        )
        assert len(fused) == 2
        assert fused[0].source_index == 0 and fused[1].source_index == 1

    def test_boundary_center_counts(self):
        # b's center (10, 5) lies on a's right edge: closed bounds keep it
        fused, _ = fuse_image(dets((0, 0, 10, 10)), dets((8, 0, 12, 10)))
        assert len(fused) == 1

    def test_scores_never_consulted(self):
        low = [Detection(box=Box(0, 0, 10, 10), score=0.0)]
        fused, _ = fuse_image(low, dets((2, 2, 8, 8)))
        assert fused[0].detection.score == 0.0


class TestFuseDataset:
    def test_per_image_independence(self):
        manifest = make_manifest(
            {"img1": ("normal", [(10, 10, 20, 20)]), "img2": ("normal", [(10, 10, 20, 20)])}
        )
        a = make_detections("a", {"img1": [(0, 0, 10, 10)]})
        b = make_detections("b", {"img2": [(0, 0, 10, 10)]})
        fused = fuse_dataset(a, b, manifest)
        assert fused.per_image["img1"].branch is Branch.ONLY_A
        assert fused.per_image["img2"].branch is Branch.ONLY_B

    def test_literal_policy_empties_image(self):
        manifest = make_manifest({"img1": ("normal", [(10, 10, 20, 20)])}, size=(40, 40))
        a = make_detections("a", {"img1": [(0, 0, 4, 4)]})
        b = make_detections("b", {"img1": [(20, 20, 30, 30)]})
        fused = fuse_dataset(a, b, manifest, policy=EmptyFusionPolicy.LITERAL)
        assert fused.per_image["img1"].branch is Branch.BOTH
        assert fused.per_image["img1"].boxes == ()

    def test_b_fallback_policy_substitutes(self):
        manifest = make_manifest({"img1": ("normal", [(10, 10, 20, 20)])}, size=(40, 40))
        a = make_detections("a", {"img1": [(0, 0, 4, 4)]})
        b = make_detections("b", {"img1": [(20, 20, 30, 30)]})
        fused = fuse_dataset(a, b, manifest, policy=EmptyFusionPolicy.B_FALLBACK)
        image = fused.per_image["img1"]
        assert image.branch is Branch.BOTH
        assert [fb.detection.box for fb in image.boxes] == [Box(20, 20, 30, 30)]
        assert image.boxes[0].provenance is Provenance.B_FALLBACK

    def test_detector_id_collision(self):
        manifest = make_manifest({"img1": ("normal", [(10, 10, 20, 20)])})
        a = make_detections("same", {"img1": [(0, 0, 10, 10)]})
        b = make_detections("same", {"img1": [(0, 0, 10, 10)]})
        with pytest.raises(DetectorIdCollision):
            fuse_dataset(a, b, manifest)

    def test_unknown_image_rejected(self):
        manifest = make_manifest({"img1": ("normal", [(10, 10, 20, 20)])})
        a = make_detections("a", {"ghost": [(0, 0, 10, 10)]})
        b = make_detections("b", {})
        with pytest.raises(UnknownImage):
            fuse_dataset(a, b, manifest)

    def test_manifest_image_missing_from_both(self):
        manifest = make_manifest({"img1": ("normal", [(10, 10, 20, 20)])})
        fused = fuse_dataset(
            make_detections("a", {}), make_detections("b", {}), manifest
        )
        assert fused.per_image["img1"].branch is Branch.NEITHER

    def test_workers_do_not_change_result(self):
        rng = random.Random(11)
        images = {}
        a_map, b_map = {}, {}
        for i in range(30):
            images[f"img{i:02d}"] = ("normal", [(50, 50, 100, 100)])
            a_map[f"img{i:02d}"] = [
                _rand_box(rng) for _ in range(rng.randint(0, 4))
            ]
            b_map[f"img{i:02d}"] = [
                _rand_box(rng) for _ in range(rng.randint(0, 4))
            ]
        manifest = make_manifest(images, size=(300, 300))
        a = make_detections("a", a_map)
        b = make_detections("b", b_map)
        serial = fuse_dataset(a, b, manifest, workers=1)
        parallel = fuse_dataset(a, b, manifest, workers=4)
        assert serial == parallel


def _rand_box(rng: random.Random):
    x1 = rng.uniform(0, 250)
    y1 = rng.uniform(0, 250)
    return (x1, y1, x1 + rng.uniform(1, 50), y1 + rng.uniform(1, 50))


def _rand_instance(rng: random.Random, max_boxes=6, span=256):
    def boxes():
        out = []
        for _ in range(rng.randint(0, max_boxes)):
            x1, x2 = sorted(rng.uniform(0, span) for _ in range(2))
            y1, y2 = sorted(rng.uniform(0, span) for _ in range(2))
            if x1 == x2:
                x2 += 1.0
            if y1 == y2:
                y2 += 1.0
            out.append((x1, y1, x2, y2))
        return out

    return boxes(), boxes()


class TestRuleOracle:
    def test_matches_brute_force_restatement(self):
        rng = random.Random(2024)
        for _ in range(300):
            a_tuples, b_tuples = _rand_instance(rng)
            fused, branch = fuse_image(dets(*a_tuples), dets(*b_tuples))
            expected_boxes, expected_branch, expected_prov = fusion_rule_oracle(
                a_tuples, b_tuples
            )
            assert branch.value == expected_branch
            assert [fb.detection.box.as_tuple() for fb in fused] == expected_boxes
            assert [fb.provenance.value for fb in fused] == expected_prov


class TestAlgebraicInvariants:
    def test_fallback_idempotence(self):
        rng = random.Random(7)
        for _ in range(200):
            a_tuples, b_tuples = _rand_instance(rng)
            a, b = dets(*a_tuples), dets(*b_tuples)
            fused_a, _ = fuse_image(a, [])
            assert [fb.detection for fb in fused_a] == a
            fused_b, _ = fuse_image([], b)
            assert [fb.detection for fb in fused_b] == b

    def test_subset_property(self):
        rng = random.Random(8)
        for _ in range(200):
            a_tuples, b_tuples = _rand_instance(rng)
            fused, _ = fuse_image(dets(*a_tuples), dets(*b_tuples))
            pool = set(a_tuples) | set(b_tuples)
            for fb in fused:
                assert fb.detection.box.as_tuple() in pool

    def test_b_permutation_leaves_retained_set(self):
        rng = random.Random(9)
        for _ in range(200):
            a_tuples, b_tuples = _rand_instance(rng)
            if not a_tuples or not b_tuples:
                continue
            fused, _ = fuse_image(dets(*a_tuples), dets(*b_tuples))
            shuffled = list(b_tuples)
            rng.shuffle(shuffled)
            fused_shuffled, _ = fuse_image(dets(*a_tuples), dets(*shuffled))
            geometry = [fb.detection.box for fb in fused]
            assert geometry == [fb.detection.box for fb in fused_shuffled]

    def test_self_fusion_retains_everything(self):
        rng = random.Random(10)
        for _ in range(200):
            a_tuples, _ = _rand_instance(rng)
            if not a_tuples:
                continue
            a = dets(*a_tuples)
            fused, branch = fuse_image(a, a)
            assert branch is Branch.BOTH
            assert [fb.detection for fb in fused] == a

    def test_monotone_retention(self):
        rng = random.Random(12)
        for _ in range(200):
            a_tuples, b_tuples = _rand_instance(rng)
            if not a_tuples or not b_tuples:
                continue
            before, _ = fuse_image(dets(*a_tuples), dets(*b_tuples))
            extra = b_tuples + [_rand_box(rng)]
            after, _ = fuse_image(dets(*a_tuples), dets(*extra))
            retained_before = {fb.source_index for fb in before}
            retained_after = {fb.source_index for fb in after}
            assert retained_before <= retained_after


class TestSerializationSurface:
    def _fused(self):
        manifest = make_manifest(
            {"img1": ("normal", [(10, 10, 20, 20)]), "img2": ("normal", [(10, 10, 20, 20)])}
        )
        a = make_detections("a", {"img1": [(0, 0, 10, 10)]})
        b = make_detections("b", {"img1": [(2, 2, 8, 8)], "img2": [(1, 1, 3, 3)]})
        return fuse_dataset(a, b, manifest)

    def test_to_detection_set(self):
        det_set = to_detection_set(self._fused())
        assert det_set.detector_id == "fusion"
        assert det_set.detections_for("img1")[0].box == Box(0, 0, 10, 10)
        round_tripped = parse_detections_json(serialize_detections(det_set))
        assert round_tripped == det_set

    def test_provenance_sidecar_shape(self):
        sidecar = provenance_sidecar(self._fused())
        assert sidecar["img1"] == [
            {
                "provenance": "a_retained",
                "witness_index": 0,
                "branch": "both",
                "source_index": 0,
            }
        ]
        assert sidecar["img2"][0]["provenance"] == "b_fallback"
        assert sidecar["img2"][0]["branch"] == "only_b"
        parsed = json.loads(serialize_provenance(self._fused()))
        assert parsed == sidecar
