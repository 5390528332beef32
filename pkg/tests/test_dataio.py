import numpy as np
import pytest
from scipy.ndimage import binary_dilation
from scipy.stats import spearmanr

from pathflow.core.exceptions import (
    ConfigurationError, DecodeError, ManifestError, ManifestParseError, NoTissueError,
    PatchCacheError, TaxonomyError,
)
from pathflow.core.seeding import make_rng
from pathflow.dataio.manifest import (
    MANIFEST_COLUMNS, Grade, Sex, SlideRecord, Subtype, class_counts, load_manifest, molecular_subtype,
    write_manifest,
)
from pathflow.dataio.patch_cache import decode_patch_set, encode_patch_set, read_patch_set, write_patch_set
from pathflow.dataio.patches import extract_patches
from pathflow.dataio.raster import ImageRaster, decode_image, encode_image
from pathflow.dataio.synth import CorpusSpec, render_slide, sample_survival, synth_corpus
from pathflow.dataio.tissue import DEFAULT_WINDOW, tissue_mask

HEADER = ",".join(MANIFEST_COLUMNS)


def write_csv(path, rows):
    path.write_text("\n".join([HEADER] + rows) + "\n", encoding="utf-8")
    return path


class TestManifest:
    def test_cohort_class_counts(self, tmp_path, record_factory):
        records = [record_factory(i, idh=0 if i < 333 else 1) for i in range(663)]
        write_manifest(records, tmp_path / "m.csv")
        loaded = load_manifest(tmp_path / "m.csv")
        assert len(loaded) == 663
        assert class_counts(loaded, "idh") == {0: 333, 1: 330}

    def test_round_trip_keeps_fields(self, tmp_path):
        record = SlideRecord("S1", "P1", "a.png", idh=1, codel=1, grade=Grade.II,
                             os_days=812.5, event=0, sex=Sex.FEMALE, age_years=44.0)
        write_manifest([record], tmp_path / "m.csv")
        assert load_manifest(tmp_path / "m.csv") == [record]

    def test_grade_is_required(self):
        with pytest.raises(TypeError):
            SlideRecord("S1", "P1", "a.png", idh=0)

    @pytest.mark.parametrize("idh,codel,expected", [
        (0, None, Subtype.IDH_WILDTYPE),
        (1, 0, Subtype.IDH_MUTANT),
        (1, 1, Subtype.OLIGODENDROGLIOMA),
        (1, None, None),
        (None, None, None),
    ])
    def test_molecular_subtype(self, idh, codel, expected):
        assert molecular_subtype(idh, codel) is expected
        assert SlideRecord("S1", "P1", "a.png", Grade.II, idh=idh, codel=codel).subtype is expected

    def test_empty_data_section(self, tmp_path):
        assert load_manifest(write_csv(tmp_path / "m.csv", [])) == []

    def test_taxonomy_error_row(self, tmp_path):
        path = write_csv(tmp_path / "m.csv", [
            "S1,P1,a.png,1,0,II,100,1,M,40",
            "S2,P2,b.png,0,1,IV,100,1,F,60",
        ])
        with pytest.raises(TaxonomyError) as info:
            load_manifest(path)
        assert info.value.row == 3

    def test_duplicate_slide_id(self, tmp_path):
        path = write_csv(tmp_path / "m.csv", [
            "S1,P1,a.png,0,NA,IV,100,1,M,40",
            "S1,P2,b.png,0,NA,IV,100,1,F,60",
        ])
        with pytest.raises(ManifestError) as info:
            load_manifest(path)
        assert info.value.row == 3

    def test_missing_slide_id(self, tmp_path):
        path = write_csv(tmp_path / "m.csv", [",P1,a.png,0,NA,IV,100,1,M,40"])
        with pytest.raises(ManifestError) as info:
            load_manifest(path)
        assert info.value.row == 2

    @pytest.mark.parametrize("row", [
        "S1,P1,a.png,2,NA,IV,100,1,M,40",
        "S1,P1,a.png,0,NA,V,100,1,M,40",
        "S1,P1,a.png,0,NA,IV,abc,1,M,40",
        "S1,P1,a.png,0,NA,IV,-5,1,M,40",
    ])
    def test_parse_errors(self, tmp_path, row):
        with pytest.raises(ManifestParseError):
            load_manifest(write_csv(tmp_path / "m.csv", [row]))

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("slide_id,patient_id\nS1,P1\n", encoding="utf-8")
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_na_values(self, tmp_path):
        path = write_csv(tmp_path / "m.csv", ["S1,P1,a.png,NA,NA,III,NA,NA,NA,NA"])
        record = load_manifest(path)[0]
        assert record.idh is None and record.os_days is None and record.sex is Sex.UNKNOWN


class TestRaster:
    def test_white_image(self, tmp_path):
        path = encode_image(ImageRaster(np.ones((2, 2, 3))), tmp_path / "w.png")
        np.testing.assert_array_equal(decode_image(path).pixels, np.ones((2, 2, 3)))

    def test_scaling(self, tmp_path):
        path = encode_image(ImageRaster(np.full((1, 1, 3), 128 / 255)), tmp_path / "g.ppm")
        assert decode_image(path).pixels[0, 0, 0] == pytest.approx(128 / 255)
        assert decode_image(path).pixels[0, 0, 0] == pytest.approx(0.50196, abs=1e-5)

    def test_synthetic_round_trip(self, tmp_path):
        spec = CorpusSpec(image_size=32)
        raster, _ = render_slide(0.7, False, make_rng(0, "synth", "x"), spec)
        for suffix in ("png", "ppm"):
            decoded = decode_image(encode_image(raster, tmp_path / f"s.{suffix}"))
            assert np.max(np.abs(decoded.pixels - raster.pixels)) <= 1 / 255

    def test_unsupported_and_truncated(self, tmp_path):
        bogus = tmp_path / "x.png"
        bogus.write_bytes(b"not an image")
        with pytest.raises(DecodeError):
            decode_image(bogus)
        good = encode_image(ImageRaster(np.zeros((16, 16, 3))), tmp_path / "t.png")
        truncated = tmp_path / "cut.png"
        truncated.write_bytes(good.read_bytes()[:40])
        with pytest.raises(DecodeError):
            decode_image(truncated)
        with pytest.raises(DecodeError):
            decode_image(tmp_path / "absent.png")

    def test_rejects_out_of_range(self):
        with pytest.raises(DecodeError):
            ImageRaster(np.full((2, 2, 3), 1.5))


class TestTissue:
    def test_white_is_empty(self):
        assert not tissue_mask(ImageRaster(np.ones((32, 32, 3)))).any()

    def test_dark_textured_is_full(self, rng):
        pixels = np.clip(0.3 + 0.2 * rng.standard_normal((32, 32, 3)), 0, 1)
        assert tissue_mask(ImageRaster(pixels)).all()

    def test_disc_coverage(self):
        spec = CorpusSpec(image_size=128, discs_per_slide=1)
        raster, disc = render_slide(0.4, False, make_rng(1, "synth", "disc"), spec)
        mask = tissue_mask(raster)
        # pixels whose window never reaches the disc
        far = ~binary_dilation(disc, structure=np.ones((DEFAULT_WINDOW + 1, DEFAULT_WINDOW + 1)))
        assert mask[disc].mean() >= 0.95
        assert mask[far].mean() <= 0.01

    def test_monotone_in_white_threshold(self):
        rng = np.random.default_rng(17)
        thresholds = np.linspace(0.05, 0.95, 10)
        for _ in range(20):
            brightness = rng.uniform(0.2, 1.0, (48, 48, 1))
            raster = ImageRaster(np.clip(brightness + 0.05 * rng.standard_normal((48, 48, 3)), 0, 1))
            masks = [tissue_mask(raster, white_thresh=t) for t in thresholds]
            for lower, higher in zip(masks, masks[1:]):
                assert not (lower & ~higher).any()

    def test_threshold_validation(self):
        with pytest.raises(ConfigurationError):
            tissue_mask(ImageRaster(np.ones((4, 4, 3))), white_thresh=1.2)


class TestPatches:
    def test_hundred_distinct(self, rng):
        img = ImageRaster(rng.random((64, 64, 3)))
        patch_set = extract_patches(img, np.ones((64, 64), bool), 100, 8, seed=1, slide_id="S")
        assert len(patch_set) == 100
        assert len(set(patch_set.origin_list())) == 100
        assert not patch_set.with_replacement
        for i, (x, y) in enumerate(patch_set.origin_list()):
            assert 0 <= x <= 56 and 0 <= y <= 56
            np.testing.assert_array_equal(patch_set.patches[i], img.pixels[y:y + 8, x:x + 8].transpose(2, 0, 1))

    def test_single_position_with_replacement(self, rng):
        img = ImageRaster(rng.random((8, 8, 3)))
        mask = np.zeros((8, 8), bool)
        mask[4, 4] = True
        patch_set = extract_patches(img, mask, 4, 4, seed=0)
        assert patch_set.with_replacement
        assert patch_set.origin_list() == [(2, 2)] * 4
        assert all(np.array_equal(patch_set.patches[0], p) for p in patch_set.patches)

    def test_deterministic(self, rng):
        img = ImageRaster(rng.random((32, 32, 3)))
        mask = np.ones((32, 32), bool)
        a = extract_patches(img, mask, 10, 8, seed=9)
        b = extract_patches(img, mask, 10, 8, seed=9)
        np.testing.assert_array_equal(a.patches, b.patches)
        np.testing.assert_array_equal(a.origins, b.origins)

    def test_no_tissue(self):
        with pytest.raises(NoTissueError) as info:
            extract_patches(ImageRaster(np.ones((16, 16, 3))), np.zeros((16, 16), bool), 5, 4, 0,
                            slide_id="S-9")
        assert info.value.details["slide_id"] == "S-9"

    def test_bad_arguments(self):
        img = ImageRaster(np.ones((16, 16, 3)))
        with pytest.raises(ConfigurationError):
            extract_patches(img, np.ones((16, 16), bool), 0, 4, 0)
        with pytest.raises(ConfigurationError):
            extract_patches(img, np.ones((16, 16), bool), 4, 32, 0)


class TestPatchCache:
    def test_round_trip_is_fp32(self, rng, tmp_path):
        img = ImageRaster(rng.random((32, 32, 3)))
        patch_set = extract_patches(img, np.ones((32, 32), bool), 6, 8, seed=2, slide_id="S")
        loaded = read_patch_set(write_patch_set(patch_set, tmp_path / "S.pfps"), slide_id="S")
        np.testing.assert_array_equal(loaded.patches, patch_set.patches.astype(np.float32))
        np.testing.assert_array_equal(loaded.origins, patch_set.origins)
        assert loaded.with_replacement == patch_set.with_replacement

    def test_corrupt_payloads(self, rng):
        img = ImageRaster(rng.random((16, 16, 3)))
        payload = encode_patch_set(extract_patches(img, np.ones((16, 16), bool), 2, 4, seed=0))
        with pytest.raises(PatchCacheError):
            decode_patch_set(b"XXXX" + payload[4:])
        with pytest.raises(PatchCacheError):
            decode_patch_set(payload[:-3])
        with pytest.raises(PatchCacheError):
            decode_patch_set(payload[:-1] + b"\x07")


class TestSynth:
    def test_balanced_manifest(self, small_corpus):
        records = load_manifest(small_corpus.manifest_path)
        assert len(records) == 16
        assert class_counts(records, "idh") == {0: 8, 1: 8}
        assert all(r.codel is None for r in records if r.idh == 0)
        for record in records:
            assert (small_corpus.manifest_path.parent / record.image_path).exists()

    def test_idh_groups_split_theta(self, small_corpus):
        for record in small_corpus.records:
            theta = small_corpus.thetas[record.slide_id]
            assert (theta < 0.5) == (record.idh == 1)

    def test_no_censoring(self, tmp_path):
        corpus = synth_corpus(CorpusSpec(slides_per_class=3, image_size=32, censor_prob=0.0), 0, tmp_path)
        assert all(r.event == 1 for r in corpus.records)

    def test_theta_drives_survival(self):
        spec = CorpusSpec()
        rng = make_rng(0, "law")
        theta = rng.uniform(0.0, 1.0, size=10_000)
        os_days, _ = sample_survival(theta, rng, spec)
        assert spearmanr(theta, os_days)[0] <= -0.5

    def test_deterministic(self, tmp_path):
        spec = CorpusSpec(slides_per_class=2, image_size=32)
        a = synth_corpus(spec, 4, tmp_path / "a")
        b = synth_corpus(spec, 4, tmp_path / "b")
        assert a.records == b.records
        assert (tmp_path / "a" / "manifest.csv").read_bytes() == (tmp_path / "b" / "manifest.csv").read_bytes()

    def test_corpus_settings_validation(self):
        with pytest.raises(ConfigurationError):
            CorpusSpec(image_format="tiff")
        with pytest.raises(ConfigurationError):
            CorpusSpec.from_mapping({"slides": 3})
