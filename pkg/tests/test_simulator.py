import math

import pytest

from centerfuse import (
    Box,
    Branch,
    ClassifierProfile,
    DatasetManifest,
    DetectorProfile,
    ImageRecord,
    InvariantViolation,
    Label,
    PlacementExhausted,
    SimConfig,
    SpuriousPlacement,
    center,
    contains,
    fuse_dataset,
    generate_dataset,
    run_experiment,
    simulate_detector,
    simulate_labels,
)

IDENTITY = ClassifierProfile.identity()


def small_config(**overrides) -> SimConfig:
    params = dict(
        n_images=20,
        image_size=(128, 128),
        gt_box_scale=0.25,
        label_prior=(0.4, 0.3, 0.3),
        profile_a=DetectorProfile(),
        profile_b=DetectorProfile(),
        classifier=IDENTITY,
        seed=7,
    )
    params.update(overrides)
    return SimConfig(**params)


class TestProfileValidation:
    def test_bad_miss_rate(self):
        with pytest.raises(InvariantViolation):
            DetectorProfile(miss_rate=1.5)

    def test_negative_jitter(self):
        with pytest.raises(InvariantViolation):
            DetectorProfile(jitter_sigma=-1)

    def test_confusion_rows_must_be_stochastic(self):
        with pytest.raises(InvariantViolation):
            ClassifierProfile(
                on_target_confusion=((0.5, 0.2, 0.2), (0, 1, 0), (0, 0, 1)),
                background_label_distribution=(1 / 3, 1 / 3, 1 / 3),
            )

    def test_prior_must_sum_to_one(self):
        with pytest.raises(InvariantViolation):
            small_config(label_prior=(0.5, 0.5, 0.5))

    def test_scale_bounds(self):
        with pytest.raises(InvariantViolation):
            small_config(gt_box_scale=1.0)

    def test_seed_range(self):
        with pytest.raises(InvariantViolation):
            small_config(seed=2**64)


class TestGenerateDataset:
    def test_empty(self):
        manifest = generate_dataset(small_config(n_images=0))
        assert manifest.images == ()

    def test_degenerate_prior(self):
        manifest = generate_dataset(
            small_config(n_images=100, label_prior=(1.0, 0.0, 0.0))
        )
        assert all(rec.true_label is Label.NORMAL for rec in manifest.images)

    def test_deterministic(self):
        cfg = small_config(n_images=50)
        assert generate_dataset(cfg) == generate_dataset(cfg)

    def test_one_gt_box_inside_image(self):
        cfg = small_config(n_images=50)
        side = cfg.gt_box_scale * min(cfg.image_size)
        for rec in generate_dataset(cfg).images:
            assert len(rec.gt_boxes) == 1
            gt = rec.gt_boxes[0]
            assert gt.width == pytest.approx(side)
            assert 0 <= gt.x_min and gt.x_max <= rec.width
            assert 0 <= gt.y_min and gt.y_max <= rec.height


class TestSimulateDetector:
    def test_always_missing_gives_empty(self):
        manifest = generate_dataset(small_config())
        dets = simulate_detector(DetectorProfile(miss_rate=1.0), manifest, "d", 1)
        assert all(not v for v in dets.per_image.values())

    def test_noiseless_reproduces_ground_truth(self):
        manifest = generate_dataset(small_config())
        dets = simulate_detector(DetectorProfile(), manifest, "d", 1)
        for rec in manifest.images:
            assert tuple(d.box for d in dets.detections_for(rec.image_id)) == rec.gt_boxes

    def test_deterministic(self):
        manifest = generate_dataset(small_config())
        profile = DetectorProfile(jitter_sigma=3, miss_rate=0.1, spurious_rate=0.4)
        assert simulate_detector(profile, manifest, "d", 5) == simulate_detector(
            profile, manifest, "d", 5
        )

    def test_distinct_streams_differ(self):
        manifest = generate_dataset(small_config())
        profile = DetectorProfile(jitter_sigma=3)
        d1 = simulate_detector(profile, manifest, "one", 5)
        d2 = simulate_detector(profile, manifest, "two", 5)
        assert {k: tuple(x.box for x in v) for k, v in d1.per_image.items()} != {
            k: tuple(x.box for x in v) for k, v in d2.per_image.items()
        }

    def test_boxes_valid_and_inside_image(self):
        manifest = generate_dataset(small_config(n_images=60))
        profile = DetectorProfile(
            jitter_sigma=40, miss_rate=0.1, spurious_rate=1.0,
            spurious_placement=SpuriousPlacement.NEAR_GT,
        )
        dets = simulate_detector(profile, manifest, "d", 9)
        for rec in manifest.images:
            for det in dets.detections_for(rec.image_id):
                b = det.box
                assert 0 <= b.x_min < b.x_max <= rec.width
                assert 0 <= b.y_min < b.y_max <= rec.height
                assert 0.5 <= det.score <= 1.0

    def test_spurious_count_poisson_concentration(self):
        # miss everything so every detection is a spurious box
        manifest = generate_dataset(small_config(n_images=1000, seed=13))
        profile = DetectorProfile(miss_rate=1.0, spurious_rate=0.3)
        dets = simulate_detector(profile, manifest, "d", 13)
        total = sum(len(v) for v in dets.per_image.values())
        mean, sigma = 300, math.sqrt(300)
        assert abs(total - mean) <= 3 * sigma

    def test_background_spurious_centers_outside_gt(self):
        manifest = generate_dataset(small_config(n_images=200, seed=3))
        profile = DetectorProfile(miss_rate=1.0, spurious_rate=0.5)
        dets = simulate_detector(profile, manifest, "d", 3)
        for rec in manifest.images:
            for det in dets.detections_for(rec.image_id):
                assert not any(contains(gt, center(det.box)) for gt in rec.gt_boxes)

    def test_placement_exhausted_when_gt_covers_image(self):
        manifest = DatasetManifest(
            images=(
                ImageRecord(
                    image_id="full",
                    width=50,
                    height=50,
                    true_label=Label.NORMAL,
                    gt_boxes=(Box(0, 0, 50, 50),),
                ),
            )
        )
        profile = DetectorProfile(miss_rate=1.0, spurious_rate=10.0)
        with pytest.raises(PlacementExhausted):
            simulate_detector(profile, manifest, "d", 1)


class TestSimulateLabels:
    def test_identity_on_target(self):
        cfg = small_config(n_images=30)
        manifest = generate_dataset(cfg)
        dets = simulate_detector(DetectorProfile(), manifest, "d", cfg.seed)
        box_labels, image_labels = simulate_labels(IDENTITY, manifest, dets, cfg.seed)
        for rec in manifest.images:
            assert box_labels[(rec.image_id, 0)] is rec.true_label
            assert image_labels[rec.image_id] is rec.true_label

    def test_degenerate_background_distribution(self):
        cfg = small_config(n_images=50)
        manifest = generate_dataset(cfg)
        profile = DetectorProfile(miss_rate=1.0, spurious_rate=0.5)
        dets = simulate_detector(profile, manifest, "d", cfg.seed)
        classifier = ClassifierProfile.identity(background=(0.0, 0.0, 1.0))
        box_labels, _ = simulate_labels(classifier, manifest, dets, cfg.seed)
        assert box_labels  # some spurious boxes exist at this seed
        assert all(label is Label.MALIGNANT for label in box_labels.values())

    def test_label_depends_on_geometry_not_container(self):
        # the same box must draw the same label in any detection set
        cfg = small_config(n_images=40)
        manifest = generate_dataset(cfg)
        profile = DetectorProfile(jitter_sigma=4, spurious_rate=0.5)
        dets = simulate_detector(profile, manifest, "d", cfg.seed)
        fused = fuse_dataset(
            dets,
            simulate_detector(DetectorProfile(jitter_sigma=6), manifest, "e", cfg.seed),
            manifest,
        )
        classifier = ClassifierProfile(
            on_target_confusion=((0.6, 0.3, 0.1), (0.2, 0.6, 0.2), (0.1, 0.3, 0.6)),
            background_label_distribution=(0.2, 0.4, 0.4),
        )
        direct, _ = simulate_labels(classifier, manifest, dets, cfg.seed)
        via_fusion, _ = simulate_labels(classifier, manifest, fused, cfg.seed)
        boxes_direct = {
            (image_id, det.box): direct[(image_id, k)]
            for image_id, dets_i in dets.per_image.items()
            for k, det in enumerate(dets_i)
        }
        for image_id, fusion in fused.per_image.items():
            for k, fb in enumerate(fusion.boxes):
                key = (image_id, fb.detection.box)
                if key in boxes_direct:
                    assert via_fusion[(image_id, k)] is boxes_direct[key]


class TestRunExperiment:
    def test_noiseless_closure(self):
        report = run_experiment(small_config(n_images=30))
        for arm in report.arms.values():
            assert arm.detection.precision == 1.0
            assert arm.detection.recall == 1.0
            assert arm.detection.miou == 1.0
            assert arm.classification.acc == 1.0

    def test_deterministic(self):
        cfg = small_config(
            n_images=40,
            profile_a=DetectorProfile(jitter_sigma=2, miss_rate=0.05, spurious_rate=0.3),
            profile_b=DetectorProfile(jitter_sigma=6, miss_rate=0.05),
        )
        assert run_experiment(cfg).as_dict() == run_experiment(cfg).as_dict()

    def test_config_echo_present(self):
        cfg = small_config(n_images=5)
        doc = run_experiment(cfg).as_dict()
        assert doc["config"]["seed"] == cfg.seed
        assert doc["config"]["n_images"] == 5
        assert set(doc["arms"]) == {"a_only", "b_only", "fusion"}

    def test_spurious_suppression(self):
        cfg = small_config(
            n_images=200,
            profile_a=DetectorProfile(jitter_sigma=2, spurious_rate=0.5),
            profile_b=DetectorProfile(jitter_sigma=6),
            seed=21,
        )
        manifest = generate_dataset(cfg)
        det_a = simulate_detector(cfg.profile_a, manifest, "detector_a", cfg.seed)
        det_b = simulate_detector(cfg.profile_b, manifest, "detector_b", cfg.seed)
        fused = fuse_dataset(det_a, det_b, manifest)
        for rec in manifest.images:
            fusion = fused.per_image[rec.image_id]
            if fusion.branch is not Branch.BOTH:
                continue
            fused_geometry = {fb.detection.box for fb in fusion.boxes}
            b_centers = [center(d.box) for d in det_b.detections_for(rec.image_id)]
            for det in det_a.detections_for(rec.image_id):
                witnessed = any(contains(det.box, c) for c in b_centers)
                if not witnessed:
                    assert det.box not in fused_geometry
