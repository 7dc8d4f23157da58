import numpy as np
import pytest

from votelearn.errors import ParseError
from votelearn.nn.checkpoint import MAGIC, load_checkpoint, read_tensors, save_checkpoint, write_tensors
from votelearn.nn.models import ModelConfig, build_model
from votelearn.nn.optim import make_optimizer


@pytest.mark.parametrize("arch", ["deepsets", "gin", "set_transformer", "mlp"])
@pytest.mark.parametrize("precision", ["float64", "float32"])
def test_roundtrip_bit_exact(tmp_path, arch, precision):
    cfg = ModelConfig(architecture=arch, hidden_width=16, precision=precision, heads=2, d_kq=4)
    model = build_model(cfg, seed=4)
    opt = make_optimizer("lookahead", model.params, 1e-3)
    x = np.random.default_rng(0).random((3, 4, 25))
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model, opt, {"step": 3})
    loaded, opt_state, meta = load_checkpoint(path)
    assert meta == {"step": 3}
    for k, p in model.params.items():
        assert p.data.dtype == loaded.params[k].data.dtype
        assert p.data.tobytes() == loaded.params[k].data.tobytes()
    assert model.logits(x).tobytes() == loaded.logits(x).tobytes()
    for k, v in opt.state().items():
        assert np.asarray(v, dtype=np.float64).tobytes() == opt_state[k].tobytes()


def test_layout(tmp_path):
    path = tmp_path / "t.ckpt"
    write_tensors(path, {"a": 1}, {"w": np.arange(6.0).reshape(2, 3)})
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    assert raw[-48:] == np.arange(6.0).astype("<f8").tobytes()
    config, tensors = read_tensors(path)
    assert config == {"a": 1} and tensors["w"].shape == (2, 3)


def test_corruption_detected(tmp_path):
    path = tmp_path / "t.ckpt"
    write_tensors(path, {}, {"w": np.ones(4)})
    raw = path.read_bytes()
    for bad in (b"XXXXXXXX" + raw[8:], raw[:-3], raw + b"\x00"):
        path.write_bytes(bad)
        with pytest.raises(ParseError):
            read_tensors(path)
