"""Set-input voting networks: DeepSets, fully-connected GIN, Set Transformer, and an MLP baseline.

Every model maps a batch of encoded elections of shape (B, n, D) to candidate
logits of shape (B, m_max). The three set-input models are invariant to the
order of the n voter rows by construction; the MLP consumes a voter-padded,
flattened input and therefore has a hard voter capacity.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import CapacityError, InvalidParameterError
from . import tensor as T
from .tensor import Tensor

ARCHITECTURES = ("deepsets", "set_transformer", "gin", "mlp")
PRECISIONS = {"float64": np.float64, "float32": np.float32}


@dataclass(frozen=True)
class ModelConfig:
    architecture: str = "deepsets"
    input_dim: int = 25
    output_dim: int = 5
    hidden_width: int = 112
    activation: str = ""  # "" -> architecture default (leaky_relu for DeepSets, relu elsewhere)
    precision: str = "float64"
    # DeepSets
    encoder_layers: int = 5
    decoder_layers: int = 5
    pooling: str = "sum"
    # GIN
    gin_layers: int = 3
    # Set Transformer
    sab_layers: int = 4
    heads: int = 4
    d_kq: int = 16
    n_seeds: int = 1
    # MLP
    mlp_layers: int = 5
    n_max: int = 20

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise InvalidParameterError(f"unknown architecture {self.architecture!r}")
        if self.precision not in PRECISIONS:
            raise InvalidParameterError(f"precision must be one of {sorted(PRECISIONS)}")
        if not self.activation:
            object.__setattr__(self, "activation", "leaky_relu" if self.architecture == "deepsets" else "relu")
        if self.activation not in ("relu", "leaky_relu"):
            raise InvalidParameterError(f"unknown activation {self.activation!r}")
        if self.pooling not in ("sum", "mean", "max"):
            raise InvalidParameterError(f"unknown pooling {self.pooling!r}")
        for f in ("input_dim", "output_dim", "hidden_width", "encoder_layers", "decoder_layers",
                  "gin_layers", "sab_layers", "heads", "d_kq", "n_seeds", "mlp_layers", "n_max"):
            if getattr(self, f) < 1:
                raise InvalidParameterError(f"{f} must be positive")
        if self.encoder_layers < 1 or self.decoder_layers < 1:
            raise InvalidParameterError("DeepSets needs at least one encoder and decoder layer")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


class Model:
    """Base class: a named, ordered parameter collection plus ``forward``."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self._rng = rng
        self._act = T.leaky_relu if config.activation == "leaky_relu" else T.relu

    # -- parameter registration -------------------------------------------
    def _param(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise InvalidParameterError(f"duplicate parameter {name}")
        t = Tensor(np.ascontiguousarray(value, dtype=self.config.dtype), requires_grad=True)
        self.params[name] = t
        return t

    def _linear(self, name: str, din: int, dout: int):
        bound = 1.0 / math.sqrt(din)
        w = self._param(f"{name}.weight", self._rng.uniform(-bound, bound, size=(din, dout)))
        b = self._param(f"{name}.bias", self._rng.uniform(-bound, bound, size=(dout,)))
        return w, b

    def _norm(self, name: str, d: int):
        return self._param(f"{name}.gain", np.ones(d)), self._param(f"{name}.offset", np.zeros(d))

    def _stack(self, prefix: str, dims: list[int], plain_last: bool = True) -> list:
        """Fully connected stack; every layer but (optionally) the last is linear -> LayerNorm -> act."""
        layers = []
        for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
            lin = self._linear(f"{prefix}.{i}", din, dout)
            norm = None if (plain_last and i == len(dims) - 2) else self._norm(f"{prefix}.{i}.norm", dout)
            layers.append((lin, norm))
        return layers

    def _run_stack(self, layers, x: Tensor) -> Tensor:
        for (w, b), norm in layers:
            x = T.linear(x, w, b)
            if norm is not None:
                x = self._act(T.layer_norm(x, *norm))
        return x

    # -- public API ---------------------------------------------------------
    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def n_params(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def _check_input(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.config.dtype))
        if x.ndim != 3:
            raise InvalidParameterError(f"expected input of shape (B, n, D), got {x.shape}")
        if x.shape[-1] != self.config.input_dim:
            raise InvalidParameterError(
                f"encoded row width {x.shape[-1]} does not match model input_dim {self.config.input_dim}")
        if x.shape[1] < 1:
            raise InvalidParameterError("an election needs at least one voter")
        return x

    def forward(self, x) -> Tensor:
        raise NotImplementedError

    def logits(self, x) -> np.ndarray:
        """Forward pass without keeping the autodiff graph."""
        x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=self.config.dtype)
        return self.forward(Tensor(x)).data

    def predict(self, enc) -> np.ndarray:
        """Logits (length m_max) for one :class:`~votelearn.encoding.EncodedElection`."""
        rows = enc.rows[enc.voter_mask]
        return self.logits(rows[None])[0]


class DeepSets(Model):
    def __init__(self, config, rng):
        super().__init__(config, rng)
        w = config.hidden_width
        self.encoder = self._stack("encoder", [config.input_dim] + [w] * config.encoder_layers)
        self.decoder = self._stack("decoder", [w] * config.decoder_layers + [config.output_dim])

    def pooled(self, x) -> Tensor:
        h = self._run_stack(self.encoder, self._check_input(x))
        if self.config.pooling == "sum":
            return h.sum(axis=1)
        if self.config.pooling == "mean":
            return h.mean(axis=1)
        return T.tmax(h, axis=1)

    def forward(self, x) -> Tensor:
        return self._run_stack(self.decoder, self.pooled(x))


class GIN(Model):
    """Graph isomorphism network on the complete graph over voters.

    The neighbour sum of node v is the total over all nodes minus v itself, so
    one layer is ``MLP((1 + eps) * h_v + (sum_u h_u - h_v))``.
    """

    def __init__(self, config, rng):
        super().__init__(config, rng)
        w = config.hidden_width
        self.layers = []
        din = config.input_dim
        for k in range(config.gin_layers):
            eps = self._param(f"gin.{k}.eps", np.zeros(1))
            mlp = self._stack(f"gin.{k}.mlp", [din, w, w], plain_last=False)
            self.layers.append((eps, mlp))
            din = w
        self.head = self._linear("head", w * config.gin_layers, config.output_dim)

    def node_embeddings(self, x) -> list[Tensor]:
        h = self._check_input(x)
        out = []
        for eps, mlp in self.layers:
            total = T.broadcast_to(h.sum(axis=1, keepdims=True), h.shape)
            agg = h * (eps + 1.0) + (total - h)
            h = self._run_stack(mlp, agg)
            out.append(h)
        return out

    def graph_embedding(self, x) -> Tensor:
        return T.concat([h.mean(axis=1) for h in self.node_embeddings(x)], axis=-1)

    def forward(self, x) -> Tensor:
        return T.linear(self.graph_embedding(x), *self.head)


def qkv_attention(q: Tensor, k: Tensor, v: Tensor, normalizer: str = "softmax", scale: float = 1.0) -> Tensor:
    """``normalizer(scale * Q K^T) V`` over the last two axes."""
    if q.shape[-1] != k.shape[-1]:
        raise InvalidParameterError(f"query/key widths differ: {q.shape[-1]} vs {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise InvalidParameterError("keys and values must have the same number of rows")
    if normalizer != "softmax":
        raise InvalidParameterError(f"unsupported attention normalizer {normalizer!r}")
    scores = T.matmul(q, k.swapaxes(-1, -2))
    if scale != 1.0:
        scores = scores * scale
    return T.matmul(T.softmax(scores, axis=-1), v)


class SetTransformer(Model):
    """Pre-LayerNorm Set Transformer: SAB^L -> PMA_k -> SAB -> rFF head."""

    def __init__(self, config, rng):
        super().__init__(config, rng)
        d = config.hidden_width
        self.embed = self._linear("embed", config.input_dim, d)
        self.sabs = [self._mab(f"sab.{i}") for i in range(config.sab_layers)]
        self.seeds = self._param("pma.seeds", self._rng.uniform(-1, 1, size=(config.n_seeds, d)) / math.sqrt(d))
        self.pma_ff = self._stack("pma.ff", [d, d, d], plain_last=True)
        self.pma = self._mab("pma.mab")
        self.dec_sab = self._mab("dec_sab")
        self.final_norm = self._norm("final_norm", d)
        self.head = [self._linear("head.0", d * config.n_seeds, d), self._linear("head.1", d, config.output_dim)]

    def _mab(self, prefix):
        d = self.config.hidden_width
        width = self.config.heads * self.config.d_kq
        return {
            "q": self._linear(f"{prefix}.q", d, width),
            "k": self._linear(f"{prefix}.k", d, width),
            "v": self._linear(f"{prefix}.v", d, width),
            "o": self._linear(f"{prefix}.o", width, d),
            "norm_x": self._norm(f"{prefix}.norm_x", d),
            "norm_y": self._norm(f"{prefix}.norm_y", d),
            "norm_h": self._norm(f"{prefix}.norm_h", d),
            "ff1": self._linear(f"{prefix}.ff1", d, d),
            "ff2": self._linear(f"{prefix}.ff2", d, d),
        }

    def multihead(self, blk, xq: Tensor, xkv: Tensor) -> Tensor:
        h, dk = self.config.heads, self.config.d_kq
        B, nq, nk = xq.shape[0], xq.shape[1], xkv.shape[1]

        def split(t, n):
            return t.reshape(B, n, h, dk).swapaxes(1, 2)  # (B, h, n, dk)

        q = split(T.linear(xq, *blk["q"]), nq)
        k = split(T.linear(xkv, *blk["k"]), nk)
        v = split(T.linear(xkv, *blk["v"]), nk)
        o = qkv_attention(q, k, v, scale=1.0 / math.sqrt(dk))
        return T.linear(o.swapaxes(1, 2).reshape(B, nq, h * dk), *blk["o"])

    def mab(self, blk, x: Tensor, y: Tensor) -> Tensor:
        hid = x + self.multihead(blk, T.layer_norm(x, *blk["norm_x"]), T.layer_norm(y, *blk["norm_y"]))
        ff = T.linear(T.relu(T.linear(T.layer_norm(hid, *blk["norm_h"]), *blk["ff1"])), *blk["ff2"])
        return hid + ff

    def sab(self, blk, x: Tensor) -> Tensor:
        return self.mab(blk, x, x)

    def encode(self, x) -> Tensor:
        z = T.linear(self._check_input(x), *self.embed)
        for blk in self.sabs:
            z = self.sab(blk, z)
        return z

    def pool(self, z: Tensor) -> Tensor:
        B = z.shape[0]
        s = T.broadcast_to(self.seeds, (B,) + self.seeds.shape)
        return self.mab(self.pma, s, self._run_stack(self.pma_ff, z))

    def forward(self, x) -> Tensor:
        p = self.sab(self.dec_sab, self.pool(self.encode(x)))
        p = T.layer_norm(p, *self.final_norm)
        B = p.shape[0]
        flat = p.reshape(B, -1)
        return T.linear(T.relu(T.linear(flat, *self.head[0])), *self.head[1])


class MLP(Model):
    """Fixed-size baseline: zero-pads the voter axis to ``n_max`` and flattens."""

    def __init__(self, config, rng):
        super().__init__(config, rng)
        w = config.hidden_width
        dims = [config.n_max * config.input_dim] + [w] * (config.mlp_layers - 1) + [config.output_dim]
        self.net = self._stack("mlp", dims)

    def forward(self, x) -> Tensor:
        x = self._check_input(x)
        B, n, D = x.shape
        if n > self.config.n_max:
            raise CapacityError(f"MLP input holds at most n_max={self.config.n_max} voters, got {n}")
        data = x.data
        if n < self.config.n_max:
            pad = np.zeros((B, self.config.n_max - n, D), dtype=data.dtype)
            x = T.concat([x, Tensor(pad)], axis=1)
        return self._run_stack(self.net, x.reshape(B, self.config.n_max * D))


_REGISTRY = {"deepsets": DeepSets, "gin": GIN, "set_transformer": SetTransformer, "mlp": MLP}


def build_model(config: ModelConfig, seed: int = 0) -> Model:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(11,))))
    return _REGISTRY[config.architecture](config, rng)
