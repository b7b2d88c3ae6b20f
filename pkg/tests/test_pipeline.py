import json
from importlib import resources

import jsonschema
import pytest

from raterlens import AnalysisConfig, CohortManifest, ManifestError, analyze_cohort


@pytest.fixture(scope="module")
def report(mini_cohort, tmp_path_factory):
    out = tmp_path_factory.mktemp("analysis")
    doc = analyze_cohort(mini_cohort, out, AnalysisConfig(threads=2))
    return doc, out


def _schema():
    ref = resources.files("raterlens") / "schemas" / "report.schema.json"
    return json.loads(ref.read_text())


class TestReportContents:
    def test_validates_against_schema(self, report):
        doc, out = report
        jsonschema.validate(doc, _schema())
        on_disk = json.loads((out / "report.json").read_text())
        jsonschema.validate(on_disk, _schema())
        assert on_disk == doc

    def test_cohort_counts(self, report, mini_cohort):
        doc, _ = report
        assert doc["num_images"] == mini_cohort.num_images
        assert doc["num_raters"] == 3
        assert doc["num_classes"] == 5
        assert set(doc["sources"]) == {"tta", "ttd", "ensemble"}

    def test_all_table_analogs_present(self, report):
        doc, _ = report
        # brier per class, dice, pr auc, correlations, variance partition
        assert len(doc["brier"]["per_class"]) == 5
        assert len(doc["dice"]["per_class_mean"]) == 5
        assert set(doc["auc_pr"]) == {"tta", "ttd", "ensemble"}
        assert "prediction_entropy" in doc["correlations"]
        assert "ttd" in doc["correlations"]
        assert "ttd" in doc["variance_partition"]
        assert "ensemble" in doc["variance_partition"]

    def test_per_image_entries(self, report):
        doc, _ = report
        assert len(doc["per_image"]) == doc["num_images"]
        first = doc["per_image"][0]
        assert "id" in first and "gt_entropy_mean" in first
        assert first["misclassification_rate"] >= 0.0

    def test_artifact_files_written(self, report):
        _, out = report
        for name in (
            "report.json",
            "brier.csv",
            "brier_foreground.csv",
            "dice.csv",
            "pr_ttd.csv",
            "pr_tta.csv",
            "pr_ensemble.csv",
            "plot_prediction_entropy_vs_gt.svg",
            "plot_prediction_entropy_vs_gt.csv",
            "plot_epistemic_ttd_vs_gt.svg",
            "plot_epistemic_ttd_vs_gt.csv",
        ):
            assert (out / name).exists(), name

    def test_svg_is_wellformed_xml(self, report):
        import xml.etree.ElementTree as ET

        _, out = report
        tree = ET.parse(out / "plot_prediction_entropy_vs_gt.svg")
        assert tree.getroot().tag.endswith("svg")


class TestConfigVariants:
    def test_granularity_modes_differ(self, mini_cohort, tmp_path):
        a = analyze_cohort(mini_cohort, tmp_path / "img", AnalysisConfig(granularity="per_image"))
        b = analyze_cohort(mini_cohort, tmp_path / "vox", AnalysisConfig(granularity="per_voxel"))
        jsonschema.validate(a, _schema())
        jsonschema.validate(b, _schema())
        ra = a["correlations"]["ttd"]["r"]
        rb = b["correlations"]["ttd"]["r"]
        assert ra != rb
        assert b["correlations"]["ttd"]["n"] > a["correlations"]["ttd"]["n"]

    def test_fusion_from_manifest(self, mini_cohort, tmp_path):
        doc = analyze_cohort(mini_cohort, tmp_path / "m", AnalysisConfig(fusion_method="manifest"))
        # simulator writes majority fusion, so results must agree
        base = analyze_cohort(mini_cohort, tmp_path / "j", AnalysisConfig())
        assert doc["misclassification_rate"] == base["misclassification_rate"]

    def test_normalized_entropy_bounds(self, mini_cohort, tmp_path):
        doc = analyze_cohort(
            mini_cohort, tmp_path / "n", AnalysisConfig(normalized_entropy=True)
        )
        for img in doc["per_image"]:
            assert 0.0 <= img["gt_entropy_mean"] <= 1.0

    def test_missing_required_source_named(self, mini_cohort, tmp_path):
        stripped = CohortManifest(
            num_classes=mini_cohort.num_classes,
            class_names=mini_cohort.class_names,
            images=[
                type(im)(
                    id=im.id,
                    rater_mask_paths=im.rater_mask_paths,
                    fused_gt_path=im.fused_gt_path,
                    sample_stack_paths={
                        k: v for k, v in im.sample_stack_paths.items() if k != "tta"
                    },
                    prediction_path=im.prediction_path,
                )
                for im in mini_cohort.images
            ],
            root=mini_cohort.root,
        )
        with pytest.raises(ManifestError, match="'tta'"):
            analyze_cohort(stripped, tmp_path / "x", AnalysisConfig(require=("tta",)))

    def test_bad_config_values(self):
        with pytest.raises(ManifestError):
            AnalysisConfig(region="everywhere")
        with pytest.raises(ManifestError):
            AnalysisConfig(granularity="per_slice")
        with pytest.raises(ManifestError):
            AnalysisConfig(require=("bootstrap",))

    def test_threaded_analysis_identical(self, mini_cohort, tmp_path):
        a = analyze_cohort(mini_cohort, tmp_path / "t1", AnalysisConfig(threads=1))
        b = analyze_cohort(mini_cohort, tmp_path / "t4", AnalysisConfig(threads=4))
        assert (tmp_path / "t1" / "report.json").read_bytes() == (
            tmp_path / "t4" / "report.json"
        ).read_bytes()
        assert a == b
