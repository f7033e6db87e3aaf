"""Learned graph-pair similarity regressor that approximates CED similarity.

Node labels are feature-hashed, refined by three mean-aggregation layers,
pooled with context attention, compared through a neural tensor layer and
squashed to (0, 1) by a small MLP. Gradients are analytic; ``grad_check``
verifies them against central differences.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .harg import HARG

log = logging.getLogger(__name__)

PARAM_ORDER = ("W0", "b0", "W1", "b1", "W2", "b2", "Wc", "Wt", "V", "bt", "M1", "c1", "M2", "c2")


@dataclass
class ScorerConfig:
    hash_dim: int = 32
    hidden: int = 16
    layers: int = 3
    k: int = 8
    mlp_hidden: int = 8
    seed: int = 0


@dataclass
class TrainConfig:
    lr: float = 0.01
    epochs: int = 200
    batch_size: int = 256
    seed: int = 0
    log_every: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


def _glorot(rng, shape):
    fan_in, fan_out = shape[-1], shape[-2]
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape)


@dataclass
class ScorerModel:
    config: ScorerConfig = field(default_factory=ScorerConfig)
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, config: ScorerConfig | None = None) -> "ScorerModel":
        cfg = config or ScorerConfig()
        rng = np.random.default_rng(cfg.seed)
        h, k = cfg.hidden, cfg.k
        p = {}
        dims = [cfg.hash_dim] + [h] * cfg.layers
        for l in range(cfg.layers):
            p[f"W{l}"] = _glorot(rng, (dims[l + 1], dims[l]))
            p[f"b{l}"] = np.zeros(dims[l + 1])
        p["Wc"] = _glorot(rng, (h, h))
        p["Wt"] = rng.normal(0.0, 1.0 / h, size=(k, h, h))
        p["V"] = _glorot(rng, (k, 2 * h))
        p["bt"] = np.full(k, 0.1)
        p["M1"] = _glorot(rng, (cfg.mlp_hidden, k))
        p["c1"] = np.full(cfg.mlp_hidden, 0.1)
        p["M2"] = _glorot(rng, (1, cfg.mlp_hidden))
        p["c2"] = np.zeros(1)
        return cls(cfg, p)

    def names(self) -> list[str]:
        return [n for n in PARAM_ORDER if n in self.params]

    # -- persistence -------------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "format": "femmir-scorer/1",
            "config": self.config.__dict__,
            "params": {
                n: {"shape": list(self.params[n].shape), "data": self.params[n].ravel().tolist()}
                for n in self.names()
            },
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScorerModel":
        doc = json.loads(text)
        if doc.get("format") != "femmir-scorer/1":
            raise ValueError("not a femmir scorer model file")
        cfg = ScorerConfig(**doc["config"])
        params = {}
        for name, spec in doc["params"].items():
            arr = np.array(spec["data"], dtype=float)
            params[name] = arr.reshape(spec["shape"])
        expected = ScorerModel.init(cfg)
        for name, arr in expected.params.items():
            if name not in params or params[name].shape != arr.shape:
                raise ValueError(f"parameter {name} missing or mis-shaped")
        return cls(cfg, params)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ScorerModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _hash_index(text: str, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    return value % dim, 1.0 if (value >> 63) & 1 == 0 else -1.0


@dataclass
class GraphInput:
    """Hashed features and normalized adjacency for one HARG."""

    x: np.ndarray
    adj: np.ndarray
    key: str


def graph_input(g: HARG, dim: int) -> GraphInput:
    n = len(g.nodes)
    incoming = g.incoming_label()
    x = np.zeros((n, dim))
    for node in g.nodes:
        idx, sign = _hash_index(f"{incoming.get(node.id, '')}:{node.label.casefold()}", dim)
        x[node.id, idx] += sign
    a = np.eye(n)
    for e in g.edges:
        a[e.src, e.dst] = a[e.dst, e.src] = 1.0
    a /= a.sum(axis=1, keepdims=True)
    return GraphInput(x, a, g.canonical_json())


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def embed_forward(gi: GraphInput, p, layers: int):
    hs, zs, ps = [gi.x], [], []
    h = gi.x
    for l in range(layers):
        agg = gi.adj @ h
        z = agg @ p[f"W{l}"].T + p[f"b{l}"]
        h = np.maximum(z, 0.0)
        ps.append(agg)
        zs.append(z)
        hs.append(h)
    mean = h.mean(axis=0)
    ctx = np.tanh(p["Wc"] @ mean)
    att = _sigmoid(h @ ctx)
    pooled = att @ h
    cache = (hs, zs, ps, mean, ctx, att)
    return pooled, cache


def embed_backward(gi: GraphInput, p, layers: int, cache, dpooled, grads) -> None:
    hs, zs, ps, mean, ctx, att = cache
    h = hs[-1]
    n = h.shape[0]
    dh = np.outer(att, dpooled)
    datt = h @ dpooled
    dlogit = datt * att * (1.0 - att)
    dh += np.outer(dlogit, ctx)
    dctx = h.T @ dlogit
    dpre = dctx * (1.0 - ctx ** 2)
    grads["Wc"] += np.outer(dpre, mean)
    dh += (p["Wc"].T @ dpre) / n
    for l in reversed(range(layers)):
        dz = dh * (zs[l] > 0)
        grads[f"W{l}"] += dz.T @ ps[l]
        grads[f"b{l}"] += dz.sum(axis=0)
        if l:
            dh = gi.adj.T @ (dz @ p[f"W{l}"])


def encode_nodes(g: HARG, m: ScorerModel) -> np.ndarray:
    gi = graph_input(g, m.config.hash_dim)
    _, cache = embed_forward(gi, m.params, m.config.layers)
    return cache[0][-1]


def pool_graph(node_vectors: np.ndarray, m: ScorerModel) -> np.ndarray:
    h = np.atleast_2d(node_vectors)
    ctx = np.tanh(m.params["Wc"] @ h.mean(axis=0))
    return _sigmoid(h @ ctx) @ h


def ntn_interaction(hq: np.ndarray, hc: np.ndarray, m: ScorerModel) -> np.ndarray:
    return _head_forward(np.atleast_2d(hq), np.atleast_2d(hc), m.params)[0][0]


def _head_forward(hq, hc, p):
    """Batched NTN + MLP. hq, hc: (P, h)."""
    bil = np.einsum("pi,kij,pj->pk", hq, p["Wt"], hc)
    lin = np.concatenate([hq, hc], axis=1) @ p["V"].T
    pre = bil + lin + p["bt"]
    s = np.maximum(pre, 0.0)
    z1 = s @ p["M1"].T + p["c1"]
    u1 = np.maximum(z1, 0.0)
    out = (u1 @ p["M2"].T + p["c2"])[:, 0]
    yhat = _sigmoid(out)
    return s, (pre, z1, u1, yhat)


def _head_backward(hq, hc, p, s, cache, dyhat, grads):
    pre, z1, u1, yhat = cache
    dout = dyhat * yhat * (1.0 - yhat)
    grads["M2"] += dout[None, :] @ u1
    grads["c2"] += np.array([dout.sum()])
    dz1 = np.outer(dout, p["M2"][0]) * (z1 > 0)
    grads["M1"] += dz1.T @ s
    grads["c1"] += dz1.sum(axis=0)
    dpre = (dz1 @ p["M1"]) * (pre > 0)
    grads["bt"] += dpre.sum(axis=0)
    grads["V"] += dpre.T @ np.concatenate([hq, hc], axis=1)
    grads["Wt"] += np.einsum("pk,pi,pj->kij", dpre, hq, hc)
    h = hq.shape[1]
    dhq = np.einsum("pk,kij,pj->pi", dpre, p["Wt"], hc) + dpre @ p["V"][:, :h]
    dhc = np.einsum("pk,kij,pi->pj", dpre, p["Wt"], hq) + dpre @ p["V"][:, h:]
    return dhq, dhc


def predict_similarity(gq: HARG, gc: HARG, m: ScorerModel) -> float:
    return float(predict_pairs([(gq, gc)], m)[0])


class EmbeddingCache:
    """Pooled graph vectors for a frozen model, keyed by canonical graph."""

    def __init__(self, m: ScorerModel):
        self.m = m
        self._vecs: dict[str, np.ndarray] = {}

    def vector(self, g: HARG) -> np.ndarray:
        gi = graph_input(g, self.m.config.hash_dim)
        if gi.key not in self._vecs:
            self._vecs[gi.key] = embed_forward(gi, self.m.params, self.m.config.layers)[0]
        return self._vecs[gi.key]


def predict_pairs(pairs, m: ScorerModel, cache: EmbeddingCache | None = None) -> np.ndarray:
    cache = cache or EmbeddingCache(m)
    if not pairs:
        return np.zeros(0)
    hq = np.stack([cache.vector(a) for a, _ in pairs])
    hc = np.stack([cache.vector(b) for _, b in pairs])
    return _head_forward(hq, hc, m.params)[1][3]


class _Batch:
    """Deduplicated graphs plus pair indices for one set of training pairs."""

    def __init__(self, pairs, dim):
        self.inputs: list[GraphInput] = []
        index: dict[str, int] = {}
        qi, ci, y = [], [], []
        for gq, gc, label in pairs:
            ids = []
            for g in (gq, gc):
                gi = graph_input(g, dim)
                if gi.key not in index:
                    index[gi.key] = len(self.inputs)
                    self.inputs.append(gi)
                ids.append(index[gi.key])
            qi.append(ids[0])
            ci.append(ids[1])
            y.append(label)
        self.qi = np.array(qi, dtype=int)
        self.ci = np.array(ci, dtype=int)
        self.y = np.array(y, dtype=float)


def loss_and_grads(m: ScorerModel, batch: _Batch, rows=None, need_grad: bool = True):
    """Mean squared error over ``rows`` of ``batch`` and its parameter gradients."""
    p, layers = m.params, m.config.layers
    rows = np.arange(len(batch.y)) if rows is None else np.asarray(rows)
    qi, ci, y = batch.qi[rows], batch.ci[rows], batch.y[rows]
    used = np.unique(np.concatenate([qi, ci]))
    pooled = np.zeros((len(batch.inputs), m.config.hidden))
    caches = {}
    for g in used:
        pooled[g], caches[g] = embed_forward(batch.inputs[g], p, layers)
    hq, hc = pooled[qi], pooled[ci]
    s, cache = _head_forward(hq, hc, p)
    err = cache[3] - y
    loss = float(np.mean(err ** 2))
    if not need_grad:
        return loss, None
    grads = {n: np.zeros_like(v) for n, v in p.items()}
    dhq, dhc = _head_backward(hq, hc, p, s, cache, 2.0 * err / len(y), grads)
    dpooled = np.zeros_like(pooled)
    np.add.at(dpooled, qi, dhq)
    np.add.at(dpooled, ci, dhc)
    for g in used:
        embed_backward(batch.inputs[g], p, layers, caches[g], dpooled[g], grads)
    return loss, grads


def make_batch(pairs, m: ScorerModel) -> _Batch:
    return _Batch(pairs, m.config.hash_dim)


@dataclass
class TrainReport:
    initial_loss: float
    final_loss: float
    history: list[tuple[int, float]]


def train(pairs, cfg: TrainConfig | None = None, model: ScorerModel | None = None,
          scorer_config: ScorerConfig | None = None) -> tuple[ScorerModel, TrainReport]:
    """Fit the scorer to (HARG, HARG, sim) triples with Adam on the MSE loss."""
    cfg = cfg or TrainConfig()
    if not pairs:
        raise ValueError("need at least one training pair")
    for _, _, label in pairs:
        if not 0.0 <= label <= 1.0:
            raise ValueError(f"labels must lie in [0, 1], got {label}")
    if model is None:
        sc = scorer_config or ScorerConfig(seed=cfg.seed)
        model = ScorerModel.init(sc)
    else:
        model = ScorerModel(model.config, {n: v.copy() for n, v in model.params.items()})
    batch = make_batch(pairs, model)
    rng = np.random.default_rng(cfg.seed)
    n = len(batch.y)
    initial = loss_and_grads(model, batch, need_grad=False)[0]
    history = [(0, initial)]
    mom = {k: np.zeros_like(v) for k, v in model.params.items()}
    vel = {k: np.zeros_like(v) for k, v in model.params.items()}
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(model, batch, rows)
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, step {step}")
            step += 1
            for k, g in grads.items():
                mom[k] = b1 * mom[k] + (1 - b1) * g
                vel[k] = b2 * vel[k] + (1 - b2) * g * g
                mhat = mom[k] / (1 - b1 ** step)
                vhat = vel[k] / (1 - b2 ** step)
                model.params[k] -= cfg.lr * mhat / (np.sqrt(vhat) + eps)
        if cfg.log_every and epoch % cfg.log_every == 0 or epoch == cfg.epochs:
            full = loss_and_grads(model, batch, need_grad=False)[0]
            history.append((epoch, full))
            log.info("epoch %d loss %.6f", epoch, full)
    final = history[-1][1]
    return model, TrainReport(initial, final, history)


def grad_check(m: ScorerModel, pairs, step: float = 1e-5) -> dict[str, float]:
    """Relative error per parameter array between analytic and central-difference gradients.

    A difference is accepted once it agrees with the one at a tenth of the
    step; disagreement means the interval straddles a ReLU kink.
    """
    batch = make_batch(pairs, m)
    _, grads = loss_and_grads(m, batch)

    def at(arr, idx, value):
        orig = arr[idx]
        arr[idx] = value
        out = loss_and_grads(m, batch, need_grad=False)[0]
        arr[idx] = orig
        return out

    errors = {}
    for name in m.names():
        arr = m.params[name]
        numeric = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            x = arr[idx]

            def central(h):
                return (at(arr, idx, x + h) - at(arr, idx, x - h)) / (2 * h)

            h = step
            coarse = central(h)
            for _ in range(4):
                fine = central(h / 10)
                if abs(coarse - fine) <= 1e-6 * max(abs(coarse), abs(fine)) + 1e-9:
                    break
                h, coarse = h / 10, fine
            numeric[idx] = fine
        scale = max(np.linalg.norm(grads[name]), np.linalg.norm(numeric))
        diff = np.linalg.norm(grads[name] - numeric)
        errors[name] = 0.0 if scale < 1e-12 else float(diff / scale)
    return errors
