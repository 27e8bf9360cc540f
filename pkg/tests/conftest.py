import pytest
import torch

from src.facedetail.appearance import synthesize_toy_albedo
from src.facedetail.common.settings import Settings
from src.facedetail.detail import DecoderSpec, DetailDecoder
from src.facedetail.model_core import synthesize_toy_model
from src.facedetail.pipeline import FaceRenderer, LatentCode
from src.facedetail.pipeline.synthetic import default_scale

IMAGE_SIZE = 64
UV_SIZE = 64
N_ALBEDO = 10


@pytest.fixture(scope="session")
def toy_model():
    return synthesize_toy_model(seed=0)


@pytest.fixture(scope="session")
def toy_albedo():
    return synthesize_toy_albedo(0, size=UV_SIZE, n_albedo=N_ALBEDO)


@pytest.fixture(scope="session")
def renderer(toy_model, toy_albedo):
    return FaceRenderer(toy_model, toy_albedo, IMAGE_SIZE)


@pytest.fixture
def zero_code(toy_model):
    return LatentCode.zeros(
        toy_model,
        N_ALBEDO,
        scale=default_scale(IMAGE_SIZE),
        translation=(IMAGE_SIZE / 2.0, IMAGE_SIZE / 2.0),
    )


@pytest.fixture
def small_decoder(toy_model):
    spec = DecoderSpec(n_expression=toy_model.n_expression, size=UV_SIZE, base=16, width=16)
    return DetailDecoder(spec, seed=0)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Every test starts from environment-derived settings"""
    for name in ("FACEDETAIL_ASSET_DIR", "FACEDETAIL_THREADS", "FACEDETAIL_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    Settings.drop_instance()
    torch.manual_seed(0)
    yield
    Settings.drop_instance()
