"""Attention-based state-value network over the robot-centric joint state.

Per-human interaction embeddings are pooled with softmax attention and fed,
together with the robot's own features, into a value head. Forward pass,
analytic reverse-mode gradients, coarse local maps, and a versioned
checkpoint format all live here. Everything is float64 numpy; parameter
objects are immutable snapshots, safe to share across workers.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .domain import JointState, RotatedState

ROBOT_FEATURES = 4   # d_g, v_pref, theta_rel, radius
HUMAN_FEATURES = 7


class CheckpointError(Exception):
    pass


class CheckpointParseError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


@dataclass(frozen=True)
class LocalMapConfig:
    grid_side: int = 4
    cell_size: float = 1.0

    CHANNELS = 3  # occupancy count, mean vx, mean vy

    def __post_init__(self):
        if self.grid_side < 1 or self.cell_size <= 0:
            raise ValueError("grid_side must be >= 1 and cell_size > 0")


@dataclass(frozen=True)
class NetworkConfig:
    """All dimensions are configuration, not contract."""

    embed_dims: tuple = (150, 100)
    attn_dims: tuple = (100, 100, 1)
    head_dims: tuple = (150, 100, 100, 1)
    grid_side: int = 4
    cell_size: float = 1.0
    attn_global: bool = True  # attention score sees the mean embedding too

    def __post_init__(self):
        object.__setattr__(self, "embed_dims", tuple(self.embed_dims))
        object.__setattr__(self, "attn_dims", tuple(self.attn_dims))
        object.__setattr__(self, "head_dims", tuple(self.head_dims))
        if self.attn_dims[-1] != 1 or self.head_dims[-1] != 1:
            raise ValueError("attention and head networks must end in one unit")

    @property
    def map_config(self) -> LocalMapConfig:
        return LocalMapConfig(self.grid_side, self.cell_size)

    @property
    def map_features(self) -> int:
        return self.grid_side * self.grid_side * LocalMapConfig.CHANNELS

    @property
    def embed_input(self) -> int:
        return ROBOT_FEATURES + HUMAN_FEATURES + self.map_features

    @property
    def embed_size(self) -> int:
        return self.embed_dims[-1]

    @property
    def attn_input(self) -> int:
        return self.embed_size * 2 if self.attn_global else self.embed_size

    @property
    def head_input(self) -> int:
        return ROBOT_FEATURES + self.embed_size

    def to_dict(self):
        return {"embed_dims": list(self.embed_dims),
                "attn_dims": list(self.attn_dims),
                "head_dims": list(self.head_dims),
                "grid_side": self.grid_side,
                "cell_size": self.cell_size,
                "attn_global": self.attn_global}

    @classmethod
    def from_dict(cls, d):
        return cls(embed_dims=tuple(d["embed_dims"]),
                   attn_dims=tuple(d["attn_dims"]),
                   head_dims=tuple(d["head_dims"]),
                   grid_side=int(d["grid_side"]),
                   cell_size=float(d["cell_size"]),
                   attn_global=bool(d["attn_global"]))


@dataclass(frozen=True)
class ValueNetParams:
    """Weight/bias snapshots for the three MLPs. Arrays are never mutated in
    place; optimizer steps build a new snapshot."""

    config: NetworkConfig
    embed: tuple   # of (W, b), W shape (in, out)
    attn: tuple
    head: tuple

    def layers(self):
        """(group, index, W, b) in the documented order."""
        for name, group in (("embed", self.embed), ("attn", self.attn),
                            ("head", self.head)):
            for i, (w, b) in enumerate(group):
                yield name, i, w, b

    def check_finite(self):
        for name, i, w, b in self.layers():
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"non-finite values in {name} layer {i}")


@dataclass(frozen=True)
class ForwardTrace:
    embeddings: np.ndarray        # (n, embed_size)
    attention_logits: np.ndarray  # (n,)
    attention_weights: np.ndarray  # (n,), non-negative, sums to 1
    context: np.ndarray           # (embed_size,)
    value: float


def _layer_sizes(d_in, dims):
    sizes = []
    for d_out in dims:
        sizes.append((d_in, d_out))
        d_in = d_out
    return sizes


def init_params(cfg: NetworkConfig, rng: np.random.Generator) -> ValueNetParams:
    """Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] init, deterministic given rng."""
    def make(d_in, dims):
        layers = []
        for fan_in, fan_out in _layer_sizes(d_in, dims):
            bound = 1.0 / math.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-bound, bound, size=(fan_out,))
            layers.append((w, b))
        return tuple(layers)

    return ValueNetParams(config=cfg,
                          embed=make(cfg.embed_input, cfg.embed_dims),
                          attn=make(cfg.attn_input, cfg.attn_dims),
                          head=make(cfg.head_input, cfg.head_dims))


def build_local_maps(state: JointState, cfg: LocalMapConfig) -> np.ndarray:
    """One coarse grid per human, centered on that human and axis-aligned to
    its heading (velocity direction; world x-axis when standing still).
    Channels: neighbor count, mean neighbor velocity (in the same frame).
    Neighbors outside the grid are dropped; the robot is not a neighbor.

    Returns an (n_humans, grid_side, grid_side, 3) array; grid index 0 is the
    most negative cell along each axis.
    """
    n = len(state.humans)
    g = cfg.grid_side
    maps = np.zeros((n, g, g, LocalMapConfig.CHANNELS))
    half = g // 2
    for i, hi in enumerate(state.humans):
        speed = math.hypot(hi.vx, hi.vy)
        if speed > 1e-12:
            ch, sh = hi.vx / speed, hi.vy / speed
        else:
            ch, sh = 1.0, 0.0
        counts = maps[i, :, :, 0]
        sums = maps[i, :, :, 1:]
        for j, hj in enumerate(state.humans):
            if j == i:
                continue
            ox = hj.px - hi.px
            oy = hj.py - hi.py
            rx = ch * ox + sh * oy
            ry = -sh * ox + ch * oy
            ix = math.floor(rx / cfg.cell_size + 0.5) + half
            iy = math.floor(ry / cfg.cell_size + 0.5) + half
            if 0 <= ix < g and 0 <= iy < g:
                counts[ix, iy] += 1.0
                sums[ix, iy, 0] += ch * hj.vx + sh * hj.vy
                sums[ix, iy, 1] += -sh * hj.vx + ch * hj.vy
        occupied = counts > 0
        sums[occupied] /= counts[occupied, None]
    return maps


def input_matrix(rotated: RotatedState, maps: np.ndarray) -> np.ndarray:
    """Per-human embedding inputs: robot part + human 7-tuple + flat map."""
    n = len(rotated.humans)
    robot = np.array([rotated.d_g, rotated.v_pref, rotated.theta_rel,
                      rotated.radius])
    if n == 0:
        map_features = int(np.prod(maps.shape[1:])) if maps.ndim == 4 else 0
        return np.zeros((0, ROBOT_FEATURES + HUMAN_FEATURES + map_features))
    humans = np.array(rotated.humans)
    flat_maps = maps.reshape(n, -1)
    return np.hstack([np.tile(robot, (n, 1)), humans, flat_maps])


def _mlp_forward(layers, x, relu_last):
    """Returns (output, cache) where cache holds inputs/pre-activations."""
    pre_list = []
    in_list = []
    h = x
    last = len(layers) - 1
    for k, (w, b) in enumerate(layers):
        in_list.append(h)
        z = h @ w + b
        pre_list.append(z)
        h = np.maximum(z, 0.0) if (k < last or relu_last) else z
    return h, (in_list, pre_list, relu_last)


def _mlp_backward(layers, cache, dout):
    """Returns (grads, dx). grads is a list of (dW, db)."""
    in_list, pre_list, relu_last = cache
    grads = [None] * len(layers)
    last = len(layers) - 1
    d = dout
    for k in range(last, -1, -1):
        w, _ = layers[k]
        if k < last or relu_last:
            d = d * (pre_list[k] > 0.0)
        grads[k] = (in_list[k].T @ d, d.sum(axis=0))
        d = d @ w.T
    return grads, d


def forward(params: ValueNetParams, rotated: RotatedState, maps: np.ndarray,
            *, _keep_caches=False):
    """Value estimate plus the attention trace. Zero humans pool to a zero
    context vector. Permutation of the human list leaves the value unchanged."""
    cfg = params.config
    n = len(rotated.humans)
    robot = np.array([rotated.d_g, rotated.v_pref, rotated.theta_rel,
                      rotated.radius])
    if n == 0:
        e = np.zeros((0, cfg.embed_size))
        logits = np.zeros(0)
        weights = np.zeros(0)
        context = np.zeros(cfg.embed_size)
        caches = (None, None, None, None)
    else:
        x = input_matrix(rotated, maps)
        e, embed_cache = _mlp_forward(params.embed, x, relu_last=True)
        if cfg.attn_global:
            mean_e = e.mean(axis=0)
            a_in = np.hstack([e, np.tile(mean_e, (n, 1))])
        else:
            a_in = e
        scores, attn_cache = _mlp_forward(params.attn, a_in, relu_last=False)
        logits = scores[:, 0]
        shifted = np.exp(logits - logits.max())
        weights = shifted / shifted.sum()
        context = weights @ e
        caches = (x, embed_cache, attn_cache, e)
    head_in = np.concatenate([robot, context])[None, :]
    out, head_cache = _mlp_forward(params.head, head_in, relu_last=False)
    value = float(out[0, 0])
    trace = ForwardTrace(embeddings=e, attention_logits=logits,
                         attention_weights=weights, context=context,
                         value=value)
    if _keep_caches:
        return value, trace, (caches, head_cache)
    return value, trace


def gradient(params: ValueNetParams, rotated: RotatedState, maps: np.ndarray,
             target: float):
    """d/dtheta of (value - target)^2; same structure as the parameters.
    Returns (grads, value)."""
    value, trace, ((x, embed_cache, attn_cache, e), head_cache) = forward(
        params, rotated, maps, _keep_caches=True)
    cfg = params.config
    dvalue = 2.0 * (value - target)

    head_grads, dhead_in = _mlp_backward(params.head, head_cache,
                                         np.array([[dvalue]]))
    n = len(rotated.humans)
    if n == 0:
        zero = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.embed]
        zero_a = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.attn]
        grads = ValueNetParams(cfg, tuple(zero), tuple(zero_a),
                               tuple(head_grads))
        return grads, value

    dcontext = dhead_in[0, ROBOT_FEATURES:]
    w_attn = trace.attention_weights
    # context = weights @ e
    de = np.outer(w_attn, dcontext)
    dweights = e @ dcontext
    # softmax
    dlogits = w_attn * (dweights - float(w_attn @ dweights))
    attn_grads, da_in = _mlp_backward(params.attn, attn_cache,
                                      dlogits[:, None])
    de += da_in[:, :cfg.embed_size]
    if cfg.attn_global:
        dmean = da_in[:, cfg.embed_size:].sum(axis=0)
        de += dmean[None, :] / n
    embed_grads, _ = _mlp_backward(params.embed, embed_cache, de)
    grads = ValueNetParams(cfg, tuple(embed_grads), tuple(attn_grads),
                           tuple(head_grads))
    return grads, value


def params_to_vector(params: ValueNetParams) -> np.ndarray:
    return np.concatenate([a.ravel() for _, _, w, b in params.layers()
                           for a in (w, b)])


def vector_to_params(cfg: NetworkConfig, vec: np.ndarray) -> ValueNetParams:
    template = init_params(cfg, np.random.default_rng(0))
    out = {"embed": [], "attn": [], "head": []}
    pos = 0
    for name, _, w, b in template.layers():
        nw, nb = w.size, b.size
        out[name].append((vec[pos:pos + nw].reshape(w.shape).copy(),
                          vec[pos + nw:pos + nw + nb].copy()))
        pos += nw + nb
    if pos != vec.size:
        raise CheckpointDimensionError(
            f"vector has {vec.size} entries, network needs {pos}")
    return ValueNetParams(cfg, tuple(out["embed"]), tuple(out["attn"]),
                          tuple(out["head"]))


CHECKPOINT_FORMAT = "socnav-valuenet"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: ValueNetParams, path):
    """Single file: one JSON header line (format, version, network config,
    array manifest) followed by the raw little-endian float64 arrays in the
    documented order (embed, attn, head; per layer W row-major then b)."""
    arrays = []
    blobs = []
    for name, i, w, b in params.layers():
        arrays.append([f"{name}.{i}.W", list(w.shape)])
        blobs.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        arrays.append([f"{name}.{i}.b", list(b.shape)])
        blobs.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    header = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
              "net": params.config.to_dict(), "arrays": arrays}
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path, expect_config: NetworkConfig = None) -> ValueNetParams:
    """Bit-exact inverse of save_checkpoint. Version and dimension problems
    raise distinct errors; malformed files raise a parse error."""
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CheckpointParseError(f"unreadable checkpoint header: {exc}")
        if not isinstance(header, dict) or header.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointParseError("not a value-network checkpoint")
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"checkpoint version {header.get('version')}, "
                f"expected {CHECKPOINT_VERSION}")
        try:
            cfg = NetworkConfig.from_dict(header["net"])
            manifest = header["arrays"]
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointParseError(f"malformed checkpoint header: {exc}")
        if expect_config is not None and cfg != expect_config:
            raise CheckpointDimensionError(
                f"checkpoint network {cfg.to_dict()} does not match the "
                f"configured network {expect_config.to_dict()}")
        groups = {"embed": [], "attn": [], "head": []}
        pending = {}
        for name, shape in manifest:
            count = int(np.prod(shape))
            blob = f.read(count * 8)
            if len(blob) != count * 8:
                raise CheckpointParseError(f"checkpoint truncated at {name}")
            arr = np.frombuffer(blob, dtype="<f8").reshape(shape).copy()
            group, idx, kind = name.split(".")
            pending.setdefault((group, int(idx)), {})[kind] = arr
        for (group, idx) in sorted(pending):
            entry = pending[(group, idx)]
            if "W" not in entry or "b" not in entry:
                raise CheckpointParseError(f"incomplete layer {group}.{idx}")
            groups[group].append((entry["W"], entry["b"]))
    params = ValueNetParams(cfg, tuple(groups["embed"]), tuple(groups["attn"]),
                            tuple(groups["head"]))
    _check_dimensions(params)
    return params


def _check_dimensions(params: ValueNetParams):
    cfg = params.config
    expected = {
        "embed": _layer_sizes(cfg.embed_input, cfg.embed_dims),
        "attn": _layer_sizes(cfg.attn_input, cfg.attn_dims),
        "head": _layer_sizes(cfg.head_input, cfg.head_dims),
    }
    for name, group in (("embed", params.embed), ("attn", params.attn),
                        ("head", params.head)):
        sizes = expected[name]
        if len(group) != len(sizes):
            raise CheckpointDimensionError(
                f"{name} net has {len(group)} layers, expected {len(sizes)}")
        for i, ((w, b), (d_in, d_out)) in enumerate(zip(group, sizes)):
            if w.shape != (d_in, d_out) or b.shape != (d_out,):
                raise CheckpointDimensionError(
                    f"{name} layer {i} shaped {w.shape}/{b.shape}, "
                    f"expected {(d_in, d_out)}/{(d_out,)}")
