import json

import numpy as np
import pytest
import torch

from src.facedetail.assets import read_obj, read_pfm, write_landmarks, write_obj
from src.facedetail.cli import main
from src.facedetail.detail import load_decoder
from src.facedetail.model_core import icosphere
from src.facedetail.pipeline import LatentCode
from src.facedetail.pipeline.synthetic import default_scale

SMALL_RUN = "[render]\nimage_size = 32\nuv_size = 32\nn_albedo = 5\n"


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_RUN)
    return path


def _code_file(model, path, seed=None):
    code = LatentCode.zeros(model, 5, scale=default_scale(32), translation=(16.0, 16.0))
    if seed is not None:
        rng = np.random.default_rng(seed)
        code = code.replace(expression=rng.normal(size=model.n_expression), detail=rng.normal(size=128))
    return code.to_json(path)


class TestMakeToyModel:
    """
    Tests the toy-model writer.
    - The same seed writes byte-identical containers.
    - The written path is printed.
    """
    def test_deterministic(self, tmp_path, small_config, capsys):
        for name in ("a", "b"):
            argv = ["make-toy-model", "--seed", "7", "--config", str(small_config), "--out", str(tmp_path / name)]
            assert main(argv) == 0
        printed = capsys.readouterr().out.split()
        assert printed == [str(tmp_path / "a"), str(tmp_path / "b")]
        for file in ("manifest.json", "tensors.bin"):
            assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()


class TestDecodeAndRender:
    """
    Tests the code-to-output commands.
    - Decoding the zero code writes the template mesh exactly.
    - A decoder adds the detail mesh; render writes the image and coverage.
    - Retargeting writes the code, displacement and detail mesh.
    """
    def test_zero_code(self, tmp_path, small_config, toy_model):
        assert main(["decode", "--config", str(small_config), "--out", str(tmp_path)]) == 0
        vertices, triangles, uv = read_obj(tmp_path / "mesh.obj")
        assert np.array_equal(vertices, toy_model.template.numpy())
        assert np.array_equal(triangles, toy_model.triangles.numpy())
        assert uv is not None

    def test_render(self, tmp_path, small_config, toy_model):
        code = _code_file(toy_model, tmp_path / "code.json", seed=1)
        argv = ["render", "--config", str(small_config), "--code", str(code), "--out", str(tmp_path / "r")]
        assert main(argv) == 0
        assert (tmp_path / "r" / "render.png").is_file()
        assert (tmp_path / "r" / "coverage.png").is_file()

    def test_retarget(self, tmp_path, small_config, toy_model):
        identity = _code_file(toy_model, tmp_path / "identity.json", seed=2)
        expression = _code_file(toy_model, tmp_path / "expression.json", seed=3)
        argv = ["retarget", "--config", str(small_config), "--identity", str(identity)]
        argv += ["--expression", str(expression), "--out", str(tmp_path / "t")]
        assert main(argv) == 0
        code = LatentCode.from_json(tmp_path / "t" / "code.json")
        assert np.array_equal(code.expression.numpy(), LatentCode.from_json(expression).expression.numpy())
        assert read_pfm(tmp_path / "t" / "displacement.pfm").shape == (32, 32)
        assert (tmp_path / "t" / "mesh_detail.obj").is_file()


class TestFitCommand:
    """
    Tests the fitting command on a synthetic target with a tiny schedule.
    """
    def test_synthetic(self, tmp_path, small_config):
        argv = ["fit", "--config", str(small_config), "--synthetic", "3", "--iterations", "2", "1"]
        assert main(argv + ["--out", str(tmp_path)]) == 0
        for name in ("code.json", "trace.csv", "report.json", "mesh.obj", "render.png", "target_code.json"):
            assert (tmp_path / name).is_file(), name
        assert len((tmp_path / "trace.csv").read_text().splitlines()) == 1 + 3 + 2


class TestReproducibility:
    """
    Tests that a fixed --seed reproduces a run bit for bit.
    - Two synthetic fits write identical code, trace, report and render files.
    - Two decoder trainings write identical traces, details, swap losses and weights.
    """
    def test_fit(self, tmp_path, small_config):
        argv = ["fit", "--config", str(small_config), "--synthetic", "3", "--iterations", "3", "2", "--seed", "5"]
        for name in ("a", "b"):
            assert main(argv + ["--out", str(tmp_path / name)]) == 0
        for file in ("code.json", "trace.csv", "report.json", "render.png"):
            assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes(), file

    def test_train_decoder(self, tmp_path, small_config):
        argv = ["train-decoder", "--config", str(small_config), "--fixture", "--n-subjects", "2"]
        argv += ["--n-expressions", "2", "--iterations", "2", "--seed", "5"]
        for name in ("a", "b"):
            assert main(argv + ["--out", str(tmp_path / name)]) == 0
        for file in ("trace.csv", "details.json", "swap.json"):
            assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes(), file
        first = load_decoder(tmp_path / "a" / "decoder.pt").state_dict()
        second = load_decoder(tmp_path / "b" / "decoder.pt").state_dict()
        assert first.keys() == second.keys()
        assert all(torch.equal(first[k], second[k]) for k in first)


class TestEvalCommand:
    """
    Tests scan evaluation from files.
    - A sphere scan 1 mm outside the mesh reports a mean of about 1 mm.
    - Statistics, distances and the curve are written.
    """
    def test_offset_sphere(self, tmp_path, capsys):
        vertices, faces = icosphere(4)
        directions = np.random.default_rng(0).normal(size=(300, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        write_obj(tmp_path / "mesh.obj", 0.1 * vertices, faces)
        write_obj(tmp_path / "scan.obj", 0.101 * directions, np.zeros((0, 3), dtype=np.int64))
        argv = ["eval", "--scan", str(tmp_path / "scan.obj"), "--mesh", str(tmp_path / "mesh.obj")]
        argv += ["--unit-scale", "1000", "--out", str(tmp_path / "eval")]
        assert main(argv) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["mean"] == pytest.approx(1.0, abs=0.1)
        assert stats["count"] == 300
        for name in ("stats.json", "distances.csv", "curve.csv"):
            assert (tmp_path / "eval" / name).is_file()


class TestFilterLandmarksCommand:
    """
    Tests the landmark filter command.
    - The decision is printed as JSON.
    """
    def test_decision(self, tmp_path, capsys):
        k1 = np.random.default_rng(1).integers(0, 100, size=(68, 2)).astype(np.float64)
        k2 = k1.copy()
        k2[5] += [30.0, 0.0]
        write_landmarks(tmp_path / "k1.txt", k1)
        write_landmarks(tmp_path / "k2.txt", k2)
        argv = ["filter-landmarks", "--k1", str(tmp_path / "k1.txt"), "--k2", str(tmp_path / "k2.txt")]
        assert main(argv + ["--bbox", "100", "100"]) == 0
        assert json.loads(capsys.readouterr().out) == {"keep": False, "score": pytest.approx(0.3), "worst": 5}


class TestErrors:
    """
    Tests exit codes and error reporting.
    - Usage errors exit with 2.
    - Library errors exit with 1 and print JSON with --error-json.
    - Malformed subject lists and corrupt decoder files are reported the same way.
    """
    def test_usage(self):
        assert main(["decode", "--no-such-flag"]) == 2
        assert main([]) == 2

    def test_error_json(self, tmp_path, capsys):
        write_landmarks(tmp_path / "k.txt", np.zeros((68, 2)))
        argv = ["filter-landmarks", "--k1", str(tmp_path / "k.txt"), "--k2", str(tmp_path / "k.txt")]
        assert main(argv + ["--bbox", "0", "10", "--error-json"]) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "invalid_configuration"
        assert error["type"] == "ConfigurationError"

    def test_unknown_term(self, tmp_path):
        assert main(["decode", "--disable-term", "wrinkles", "--out", str(tmp_path)]) == 1

    def test_missing_model(self, tmp_path):
        assert main(["decode", "--model", str(tmp_path / "missing.fdm"), "--out", str(tmp_path)]) == 1

    @pytest.mark.parametrize("subjects", [{"subjects": [{"images": []}]}, {"subjects": [5]}])
    def test_malformed_subjects(self, tmp_path, small_config, capsys, subjects):
        path = tmp_path / "subjects.json"
        path.write_text(json.dumps(subjects))
        argv = ["train-decoder", "--config", str(small_config), "--subjects", str(path), "--error-json"]
        assert main(argv + ["--out", str(tmp_path / "out")]) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "invalid_configuration"

    def test_corrupt_decoder(self, tmp_path, small_config, capsys):
        path = tmp_path / "decoder.pt"
        path.write_text("not a decoder")
        argv = ["render", "--config", str(small_config), "--decoder", str(path), "--error-json"]
        assert main(argv + ["--out", str(tmp_path / "out")]) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "malformed_asset"
        assert error["type"] == "AssetFormatError"
