import logging
import math

import pytest
import torch

from src.facedetail.common.errors import ConfigurationError, ShapeMismatchError, ZeroEmbeddingError
from src.facedetail.losses import (
    LossReport,
    LossWeights,
    builtin_extractor,
    canonical_term,
    coarse_regularizers,
    cosine_identity_loss,
    detail_consistency_loss,
    detail_regularizer,
    detail_report,
    eye_closure_loss,
    identity_loss,
    idmrf_loss,
    landmark_loss,
    landmark_weight_table,
    mrf_similarity_loss,
    photometric_loss,
    shape_consistency_loss,
    symmetry_loss,
)

F64 = torch.float64


def _landmarks(seed: int = 0) -> torch.Tensor:
    return 50.0 * torch.rand(68, 2, generator=torch.Generator().manual_seed(seed), dtype=F64)


class TestLandmarkLoss:
    """
    Tests the weighted L1 landmark loss.
    - Identical landmarks give 0.
    - One landmark off by (3, 4) gives 7, and 21 on a mouth corner weighted 3.
    """
    def test_zero(self):
        k = _landmarks()
        assert landmark_loss(k, k.clone()).item() == 0.0

    def test_offset(self):
        k = _landmarks()
        moved = k.clone()
        moved[10] += torch.tensor([3.0, 4.0], dtype=F64)
        assert landmark_loss(k, moved).item() == pytest.approx(7.0, abs=1e-12)

    def test_mouth_corner_weight(self):
        table = landmark_weight_table()
        assert table[48].item() == 3.0 and table[54].item() == 3.0 and table[30].item() == 3.0
        assert table[0].item() == 1.0
        k = _landmarks()
        moved = k.clone()
        moved[48] += torch.tensor([3.0, -4.0], dtype=F64)
        assert landmark_loss(k, moved, table).item() == pytest.approx(21.0, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            landmark_loss(torch.zeros(68, 2), torch.zeros(67, 2))


class TestEyeClosureLoss:
    """
    Tests the eyelid-distance loss.
    - Projected eyelid offsets equal to the target offsets give 0.
    - A discrepancy of (1, -2) on one pair gives 3.
    - Translating the target landmarks leaves the loss unchanged.
    """
    pairs = ((37, 41), (38, 40))

    def _setup(self):
        points_3d = torch.cat([_landmarks(1) / 100.0, torch.zeros(68, 1, dtype=F64)], dim=1)
        scale = torch.tensor(100.0, dtype=F64)
        target = scale * points_3d[:, :2]
        return target, points_3d, scale

    def test_matching_offsets(self):
        target, points_3d, scale = self._setup()
        assert eye_closure_loss(target, points_3d, self.pairs, scale).item() == pytest.approx(0.0, abs=1e-12)

    def test_discrepancy(self):
        target, points_3d, scale = self._setup()
        target = target.clone()
        target[37] += torch.tensor([1.0, -2.0], dtype=F64)
        assert eye_closure_loss(target, points_3d, self.pairs, scale).item() == pytest.approx(3.0, abs=1e-9)

    def test_translation_invariance(self):
        target, points_3d, scale = self._setup()
        target = target + 0.3 * torch.randn(68, 2, dtype=F64)
        base = eye_closure_loss(target, points_3d, self.pairs, scale)
        shifted = eye_closure_loss(target + torch.tensor([17.0, -5.0], dtype=F64), points_3d, self.pairs, scale)
        assert shifted.item() == pytest.approx(base.item(), abs=1e-9)

    def test_no_pairs(self):
        target, points_3d, scale = self._setup()
        assert eye_closure_loss(target, points_3d, (), scale).item() == 0.0


class TestPhotometricLoss:
    """
    Tests the masked L1 photometric loss.
    - Identical images or an empty mask give 0.
    - One masked pixel off by 0.5 in one channel gives 0.5.
    """
    def test_identical(self):
        image = torch.rand(8, 8, 3, dtype=F64)
        assert photometric_loss(image, image.clone(), torch.ones(8, 8, dtype=torch.bool)).item() == 0.0

    def test_empty_mask(self):
        assert photometric_loss(torch.rand(8, 8, 3), torch.rand(8, 8, 3, dtype=F64), torch.zeros(8, 8)).item() == 0.0

    def test_one_pixel(self):
        image = torch.rand(8, 8, 3, dtype=F64)
        rendered = image.clone()
        rendered[3, 4, 1] += 0.5
        mask = torch.ones(8, 8, dtype=torch.bool)
        assert photometric_loss(image, rendered, mask).item() == pytest.approx(0.5, abs=1e-12)

    def test_size_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            photometric_loss(torch.zeros(8, 8, 3), torch.zeros(4, 4, 3), torch.ones(8, 8))


class TestIdentityLoss:
    """
    Tests the cosine identity loss.
    - Equal, orthogonal and opposite embeddings give 0, 1 and 2.
    - Identical images give 0 through the built-in extractor.
    - A zero embedding is flagged.
    """
    def test_cosine_cases(self):
        a = torch.tensor([1.0, 0.0], dtype=F64)
        assert cosine_identity_loss(a, 3.0 * a).item() == pytest.approx(0.0, abs=1e-15)
        assert cosine_identity_loss(a, torch.tensor([0.0, 2.0], dtype=F64)).item() == pytest.approx(1.0)
        assert cosine_identity_loss(a, -a).item() == pytest.approx(2.0)

    def test_zero_embedding(self):
        with pytest.raises(ZeroEmbeddingError):
            cosine_identity_loss(torch.zeros(3), torch.ones(3))

    def test_identical_images(self):
        image = torch.rand(32, 32, 3, dtype=F64)
        assert identity_loss(builtin_extractor(), image, image.clone()).item() == 0.0


class TestRegularizers:
    """
    Tests the squared-norm code regularizers.
    - beta = 0 gives 0, beta = (3, 4) gives 25 and doubling the code quadruples it.
    """
    def test_values(self):
        zero = coarse_regularizers(torch.zeros(2), torch.zeros(2), torch.zeros(2))
        assert all(v.item() == 0.0 for v in zero.values())
        beta = torch.tensor([3.0, 4.0], dtype=F64)
        terms = coarse_regularizers(beta, beta, beta)
        assert terms["shape_reg"].item() == 25.0
        assert coarse_regularizers(2 * beta, beta, beta)["shape_reg"].item() == 100.0


class TestMrfLoss:
    """
    Tests the ID-MRF relative-similarity loss.
    - Every target patch with an exclusive exact match gives 0.
    - Targets {p, q} against generated {p, p} give ln 2.
    - A perturbed image never scores below the image itself.
    - An empty mask gives 0 with a warning.
    """
    p = torch.tensor([1.0, 0.0], dtype=F64)
    q = torch.tensor([0.0, 1.0], dtype=F64)

    def test_exact_matches(self):
        target = torch.stack([self.p, self.q], dim=1)
        assert mrf_similarity_loss(target.clone(), target).item() == pytest.approx(0.0, abs=1e-12)

    def test_half_matched(self):
        target = torch.stack([self.p, self.q], dim=1)
        generated = torch.stack([self.p, self.p], dim=1)
        assert mrf_similarity_loss(generated, target).item() == pytest.approx(math.log(2.0), abs=1e-12)

    def test_self_matching_bound(self):
        image = torch.rand(32, 32, 3, dtype=F64)
        extractor = builtin_extractor()
        own = idmrf_loss(extractor, image, image.clone())
        perturbed = idmrf_loss(extractor, image, (image + 0.2 * torch.rand(32, 32, 3, dtype=F64)).clamp(0, 1))
        assert own.item() <= perturbed.item() + 1e-12

    def test_empty_mask(self, caplog):
        image = torch.rand(32, 32, 3, dtype=F64)
        with caplog.at_level(logging.WARNING):
            loss = idmrf_loss(builtin_extractor(), image, image, torch.zeros(32, 32, dtype=torch.bool))
        assert loss.item() == 0.0
        assert "empty" in caplog.text


class TestSymmetryAndDetailRegularizer:
    """
    Tests the UV symmetry loss and the displacement regularizer.
    - A left-right symmetric map gives 0; so does an empty mask.
    - A single off-axis texel of 0.01 gives 0.02.
    - A uniform 0.01 map on 256 x 256 texels gives 655.36.
    """
    def test_symmetric(self):
        half = torch.rand(8, 4, dtype=F64)
        displacement = torch.cat([half, torch.flip(half, dims=[1])], dim=1)
        assert symmetry_loss(displacement, torch.ones(8, 8)).item() == 0.0

    def test_single_texel(self):
        displacement = torch.zeros(8, 8, dtype=F64)
        displacement[2, 1] = 0.01
        assert symmetry_loss(displacement, torch.ones(8, 8)).item() == pytest.approx(0.02, abs=1e-15)

    def test_empty_mask(self):
        assert symmetry_loss(torch.rand(8, 8, dtype=F64), torch.zeros(8, 8)).item() == 0.0

    def test_regularizer(self):
        assert detail_regularizer(torch.zeros(4, 4)).item() == 0.0
        uniform = torch.full((256, 256), 0.01, dtype=F64)
        assert detail_regularizer(uniform).item() == pytest.approx(655.36, rel=1e-12)
        assert detail_regularizer(-3 * uniform).item() == pytest.approx(3 * 655.36, rel=1e-12)


class TestFeatureExtractor:
    """
    Tests the built-in gradient-histogram extractor.
    - Identical images give identical features.
    - A constant image still has a unit embedding thanks to the floor.
    - Shifting the image by one cell shifts the interior cell features by one.
    """
    def test_identical(self):
        image = torch.rand(32, 32, 3, dtype=F64)
        a = builtin_extractor().patch_features(image)
        b = builtin_extractor().patch_features(image.clone())
        assert all(torch.equal(x.features, y.features) for x, y in zip(a, b))

    def test_constant_image(self):
        embedding = builtin_extractor().embedding(torch.full((32, 32, 3), 0.5, dtype=F64))
        assert torch.isfinite(embedding).all()
        assert torch.linalg.norm(embedding).item() == pytest.approx(1.0)

    def test_shift(self):
        extractor = builtin_extractor()
        image = torch.rand(64, 64, 3, dtype=F64)
        shifted = torch.roll(image, shifts=extractor.cell, dims=1)
        original = extractor.patch_features(image)[0].features
        moved = extractor.patch_features(shifted)[0].features
        assert torch.allclose(moved[..., 2:-1], original[..., 1:-2], atol=1e-12)


class TestLossWeights:
    """
    Tests loss weights and reports.
    - Negative weights and unknown term names are rejected.
    - Aliases resolve to canonical names; the landmark stage switches image terms off.
    - The report total is the weighted sum of its terms.
    """
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            LossWeights(photometric=-1.0)
        with pytest.raises(ConfigurationError):
            canonical_term("wrinkles")

    def test_aliases(self):
        assert canonical_term("lmk") == "landmark"
        assert canonical_term("regD") == "detail_reg"
        assert LossWeights().without("dc").detail_consistency == 0.0

    def test_landmark_only(self):
        weights = LossWeights().landmark_only()
        assert weights.photometric == 0.0 and weights.identity == 0.0 and weights.shape_consistency == 0.0
        assert weights.landmark == 1.0

    def test_report_total(self):
        report = LossReport({"a": torch.tensor(2.0, dtype=F64), "b": torch.tensor(3.0, dtype=F64)}, {"a": 0.5, "b": 2.0})
        assert report.total.item() == 7.0
        assert report.values()["total"] == 7.0
        merged = report.merged(report, prefix="image1/")
        assert merged.total.item() == 14.0


class TestConsistencyLosses:
    """
    Tests the swap-based consistency losses on rendered codes.
    - Swapping in one's own beta or delta equals the unswapped loss.
    - Swapping in a different beta raises the loss of a perfectly explained image.
    """
    def test_no_op_shape_swap(self, renderer, zero_code):
        weights = LossWeights()
        image = renderer.render(zero_code.replace(albedo=0.5 * torch.ones(zero_code.albedo.shape[0], dtype=F64))).image
        mask = torch.ones(image.shape[:2], dtype=torch.bool)
        rendered = renderer.render(zero_code).image
        expected = weights.photometric * photometric_loss(image, rendered, mask) + weights.identity * identity_loss(
            builtin_extractor(), image, rendered
        )
        swapped = shape_consistency_loss(renderer, zero_code, zero_code.shape, image, mask, builtin_extractor(), weights)
        assert swapped.item() == expected.item()

    def test_different_shape_swap(self, renderer, zero_code):
        with torch.no_grad():
            result = renderer.render(zero_code)
            mask = result.coverage
            own = shape_consistency_loss(renderer, zero_code, zero_code.shape, result.image, mask, builtin_extractor())
            other = 3.0 * torch.randn(zero_code.shape.shape[0], dtype=F64)
            swapped = shape_consistency_loss(renderer, zero_code, other, result.image, mask, builtin_extractor())
        assert own.item() == pytest.approx(0.0, abs=1e-12)
        assert swapped.item() > own.item()

    def test_no_op_detail_swap(self, renderer, zero_code, small_decoder):
        weights = LossWeights()
        delta = torch.randn(small_decoder.spec.n_detail, dtype=F64)
        with torch.no_grad():
            displacement = small_decoder(delta, zero_code.expression, zero_code.jaw_pose)
            result = renderer.render_detail(zero_code, displacement)
            image = (result.image + 0.05).clamp(0, 1)
            mask = result.coverage
            expected = detail_report(
                weights=weights,
                extractor=builtin_extractor(),
                image=image,
                mask=mask,
                rendered=result.image,
                displacement=displacement,
                uv_mask=result.uv_mask,
            ).total
            swapped = detail_consistency_loss(
                renderer, zero_code, delta, small_decoder, image, mask, builtin_extractor(), weights
            )
        assert swapped.item() == expected.item()
