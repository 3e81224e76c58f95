import numpy as np
import pytest

from raildet.cli import main
from raildet.dataio import read_detections_csv, read_split_manifest
from raildet.evaluation import Detection
from raildet.geometry import BBox
from raildet.ppm import read_ppm, write_ppm
from raildet.dataio import write_detections_csv


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scenes")
    assert run("synth", "--out", str(out), "--count", "3", "--seed", "100") == 0
    return out


class TestSynth:
    def test_outputs_and_manifest(self, scene_dir):
        ppms = sorted(p.name for p in scene_dir.glob("*.ppm"))
        assert ppms == ["scene_000100.ppm", "scene_000101.ppm", "scene_000102.ppm"]
        assert len(list(scene_dir.glob("*.xml"))) == 3
        ds = read_split_manifest(scene_dir / "split.txt")
        assert sorted(ds.train + ds.val) == ppms
        assert (scene_dir / "manifest.txt").exists()

    def test_deterministic(self, scene_dir, tmp_path):
        again = tmp_path / "again"
        assert run("synth", "--out", str(again), "--count", "3", "--seed", "100") == 0
        for name in ("scene_000100.ppm", "scene_000100.xml", "split.txt"):
            assert (again / name).read_bytes() == (scene_dir / name).read_bytes()

    def test_count_zero(self, tmp_path):
        out = tmp_path / "empty"
        assert run("synth", "--out", str(out), "--count", "0") == 0
        ds = read_split_manifest(out / "split.txt")
        assert ds.train == () and ds.val == ()


class TestPreprocess:
    def test_roundtrips_preprocessed_scenes(self, scene_dir, tmp_path):
        out = tmp_path / "prep"
        assert run("preprocess", "--in", str(scene_dir), "--out", str(out)) == 0
        for p in out.glob("*.ppm"):
            assert read_ppm(p, grayscale=True).shape == (1000, 800)
        assert len(list(out.glob("*.ppm"))) == 3

    def test_missing_dir(self, tmp_path):
        assert run("preprocess", "--in", str(tmp_path / "nope"), "--out", str(tmp_path / "o")) == 1

    def test_empty_dir(self, tmp_path, capsys):
        src = tmp_path / "src"
        src.mkdir()
        assert run("preprocess", "--in", str(src), "--out", str(tmp_path / "o")) == 0
        assert "0 images processed" in capsys.readouterr().err

    def test_corrupt_xml_named(self, scene_dir, tmp_path, capsys):
        src = tmp_path / "src"
        src.mkdir()
        name = "scene_000100"
        (src / f"{name}.ppm").write_bytes((scene_dir / f"{name}.ppm").read_bytes())
        (src / f"{name}.xml").write_bytes(b"<annotation><broken")
        assert run("preprocess", "--in", str(src), "--out", str(tmp_path / "o")) == 1
        assert name in capsys.readouterr().err

    def test_keep_going(self, scene_dir, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        for name in ("scene_000100", "scene_000101"):
            (src / f"{name}.ppm").write_bytes((scene_dir / f"{name}.ppm").read_bytes())
            (src / f"{name}.xml").write_bytes((scene_dir / f"{name}.xml").read_bytes())
        (src / "scene_000100.xml").write_bytes(b"<annotation><broken")
        out = tmp_path / "o"
        assert run("preprocess", "--in", str(src), "--out", str(out), "--keep-going") == 1
        assert (out / "scene_000101.ppm").exists()


class TestDetectEval:
    def test_detect_then_eval_perfect(self, scene_dir, tmp_path, capsys):
        dets = tmp_path / "dets.csv"
        assert run("detect", "--images", str(scene_dir), "--out", str(dets)) == 0
        rows = read_detections_csv(dets)
        assert rows
        assert run("eval", "--dets", str(dets), "--gt", str(scene_dir)) == 0
        out = capsys.readouterr().out
        assert "mean" in out
        assert out.count("100.00%") == 10

    def test_eval_csv_twin(self, scene_dir, tmp_path):
        dets = tmp_path / "dets.csv"
        run("detect", "--images", str(scene_dir), "--out", str(dets))
        csv_out = tmp_path / "report.csv"
        assert run("eval", "--dets", str(dets), "--gt", str(scene_dir),
                   "--csv", str(csv_out)) == 0
        lines = csv_out.read_text().splitlines()
        assert lines[0] == "category,precision,recall"
        assert lines[-1] == "mean,1.000000,1.000000"

    def test_eval_empty_detections(self, scene_dir, tmp_path, capsys):
        dets = tmp_path / "none.csv"
        write_detections_csv(dets, [])
        assert run("eval", "--dets", str(dets), "--gt", str(scene_dir)) == 0
        out = capsys.readouterr().out
        mean = out.splitlines()[-1].split()
        assert mean[1] == "100.00%"  # vacuous precision
        assert mean[2] == "0.00%"  # nothing recalled

    def test_eval_unknown_image_rejected(self, scene_dir, tmp_path):
        dets = tmp_path / "bad.csv"
        write_detections_csv(
            dets, [("nonexistent.ppm", Detection("V", BBox(0, 0, 10, 10), 0.9))]
        )
        assert run("eval", "--dets", str(dets), "--gt", str(scene_dir)) == 1

    def test_detect_missing_image(self, tmp_path):
        assert run("detect", "--image", str(tmp_path / "gone.ppm"),
                   "--out", str(tmp_path / "d.csv")) == 1


class TestPropose:
    def test_writes_rois(self, scene_dir, tmp_path):
        out = tmp_path / "rois.csv"
        img = next(iter(sorted(scene_dir.glob("*.ppm"))))
        assert run("propose", "--image", str(img), "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "image,class,score,xmin,ymin,xmax,ymax"
        assert all(",roi," in ln for ln in lines[1:])
        assert len(lines) > 1


class TestConfigHandling:
    def test_bad_config_exit_2(self, scene_dir, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("proposal.post_nms_topp=50\n")
        assert run("detect", "--images", str(scene_dir), "--config", str(cfg),
                   "--out", str(tmp_path / "d.csv")) == 2

    def test_config_respected(self, scene_dir, tmp_path, capsys):
        cfg = tmp_path / "small.cfg"
        cfg.write_text("proposal.post_nms_top=50\n")
        img = next(iter(sorted(scene_dir.glob("*.ppm"))))
        out = tmp_path / "rois.csv"
        assert run("propose", "--image", str(img), "--config", str(cfg),
                   "--out", str(out)) == 0
        assert len(out.read_text().splitlines()) <= 51

    def test_show_config(self, capsys):
        assert run("show-config") == 0
        assert "proposal.post_nms_top=300" in capsys.readouterr().out


class TestBench:
    def test_two_budgets(self, capsys):
        assert run("bench", "--rois", "300,50", "--repeat", "2") == 0
        out = capsys.readouterr().out
        assert "300" in out and "50" in out
        ratio = float(out.splitlines()[-1].split()[-1].rstrip("x"))
        assert ratio > 1.0

    def test_single_repeat_iqr_na(self, capsys):
        assert run("bench", "--rois", "100", "--repeat", "1") == 0
        assert "n/a" in capsys.readouterr().out


class TestRender:
    def _one_scene(self, scene_dir):
        return next(iter(sorted(scene_dir.glob("*.ppm"))))

    def test_zero_detections_identity(self, scene_dir, tmp_path):
        img = self._one_scene(scene_dir)
        dets = tmp_path / "none.csv"
        write_detections_csv(dets, [])
        out = tmp_path / "out.ppm"
        assert run("render", "--image", str(img), "--dets", str(dets),
                   "--out", str(out)) == 0
        assert out.read_bytes() == img.read_bytes()

    def test_single_detection_recolors_edges_only(self, scene_dir, tmp_path):
        img = self._one_scene(scene_dir)
        dets = tmp_path / "one.csv"
        write_detections_csv(
            dets, [(img.name, Detection("V", BBox(100, 100, 132, 132), 0.9))]
        )
        out = tmp_path / "out.ppm"
        assert run("render", "--image", str(img), "--dets", str(dets),
                   "--out", str(out)) == 0
        before = read_ppm(img)
        after = read_ppm(out)
        diff = np.any(before != after, axis=2)
        ys, xs = np.nonzero(diff)
        assert ys.size > 0
        assert set(np.unique(ys)) <= set(range(100, 132))
        assert set(np.unique(xs)) <= set(range(100, 132))
        # every changed pixel lies on one of the four box edges
        on_edge = (ys == 100) | (ys == 131) | (xs == 100) | (xs == 131)
        assert np.all(on_edge)

    def test_out_of_bounds_detection(self, scene_dir, tmp_path):
        img = self._one_scene(scene_dir)
        dets = tmp_path / "oob.csv"
        write_detections_csv(
            dets, [(img.name, Detection("V", BBox(700, 900, 900, 1100), 0.9))]
        )
        assert run("render", "--image", str(img), "--dets", str(dets),
                   "--out", str(tmp_path / "o.ppm")) == 1

    def test_missing_image(self, tmp_path):
        dets = tmp_path / "d.csv"
        write_detections_csv(dets, [])
        assert run("render", "--image", str(tmp_path / "gone.ppm"),
                   "--dets", str(dets), "--out", str(tmp_path / "o.ppm")) == 1


class TestMakeWeights:
    def test_oracle_file_round_trips(self, scene_dir, tmp_path):
        w = tmp_path / "w.bin"
        assert run("make-weights", "--mode", "oracle", "--out", str(w)) == 0
        img = next(iter(sorted(scene_dir.glob("*.ppm"))))
        dets = tmp_path / "dets.csv"
        assert run("detect", "--image", str(img), "--weights", str(w),
                   "--out", str(dets)) == 0
        assert read_detections_csv(dets)

    def test_missing_weights_file(self, scene_dir, tmp_path):
        img = next(iter(sorted(scene_dir.glob("*.ppm"))))
        assert run("detect", "--image", str(img), "--weights",
                   str(tmp_path / "none.bin"), "--out", str(tmp_path / "d.csv")) == 1
