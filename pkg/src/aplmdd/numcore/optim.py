"""Parameter updates: plain gradient descent and adaptive moments (Adam)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    mode: str = "adaptive-moments"
    clip_norm: float = 0.0  # 0 disables global-norm clipping


@dataclass
class Optimizer:
    cfg: OptimConfig
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def update(self, params: dict, grads: dict) -> float:
        """Apply one in-place update; returns the (pre-clip) global grad norm."""
        if self.cfg.mode not in ("plain", "adaptive-moments"):
            raise ValueError(f"unknown optimizer mode {self.cfg.mode!r}")
        for name, g in grads.items():
            if params[name].shape != g.shape:
                raise ValueError(f"{name}: parameter {params[name].shape} vs gradient {g.shape}")
        norm = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values())))
        scale = 1.0
        if self.cfg.clip_norm > 0 and norm > self.cfg.clip_norm:
            scale = self.cfg.clip_norm / norm
        self.step += 1
        lr = self.cfg.lr
        for name in sorted(grads):
            p, g = params[name], grads[name] * scale
            if self.cfg.mode == "plain":
                p -= (lr * g).astype(p.dtype)
                continue
            b1, b2 = self.cfg.beta1, self.cfg.beta2
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.step)
            vhat = v / (1 - b2 ** self.step)
            p -= (lr * mhat / (np.sqrt(vhat) + self.cfg.eps)).astype(p.dtype)
        return norm

    def state_arrays(self) -> dict:
        out = {"opt/step": np.array([self.step], dtype=np.float64)}
        for name in sorted(self.m):
            out[f"opt/m/{name}"] = self.m[name]
            out[f"opt/v/{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict, dtype) -> None:
        self.step = int(arrays.get("opt/step", np.zeros(1))[0])
        self.m = {k[len("opt/m/"):]: v.astype(dtype) for k, v in arrays.items() if k.startswith("opt/m/")}
        self.v = {k[len("opt/v/"):]: v.astype(dtype) for k, v in arrays.items() if k.startswith("opt/v/")}


def sgd_update(params: dict, grads: dict, cfg: OptimConfig, state: Optimizer | None = None) -> Optimizer:
    """Functional wrapper: update ``params`` in place and return the optimizer state."""
    opt = state or Optimizer(cfg)
    opt.update(params, grads)
    return opt
