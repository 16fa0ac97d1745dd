"""Adam with bias correction over named parameter arrays."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from shared.errors import ShapeError

from ..tensor.engine import Matrix


@dataclass
class AdamState:
    """First and second moment estimates keyed by parameter name.

    :ivar step: Number of updates applied so far.
    """

    step: int = 0
    m: Dict[str, Matrix] = field(default_factory=dict)
    v: Dict[str, Matrix] = field(default_factory=dict)


def init_adam_state(params: Mapping[str, Matrix]) -> AdamState:
    return AdamState(
        step=0,
        m={k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()},
        v={k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()},
    )


def adam_step(
    params: Mapping[str, Matrix],
    grads: Mapping[str, Matrix],
    state: AdamState,
    lr: float,
    wd: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    decoupled: bool = False,
) -> Tuple[Dict[str, Matrix], AdamState]:
    """Apply one Adam update and return new parameters and state.

    Weight decay is coupled by default (``grad += wd * param`` before the
    moment update); with ``decoupled`` it is applied as
    ``param -= lr * wd * param`` alongside the Adam step. Parameters missing
    from ``grads`` are treated as having a zero gradient. Inputs are not
    modified.

    :raises ShapeError: If a gradient or moment shape differs from its
                        parameter.
    """
    t = state.step + 1
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    new_params: Dict[str, Matrix] = {}
    new_m: Dict[str, Matrix] = {}
    new_v: Dict[str, Matrix] = {}
    for name in params:
        p = np.asarray(params[name], dtype=np.float64)
        g = np.asarray(grads[name], dtype=np.float64) if name in grads else np.zeros_like(p)
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        if g.shape != p.shape or m.shape != p.shape or v.shape != p.shape:
            raise ShapeError(
                f"adam_step: parameter {name} {p.shape} vs gradient {g.shape} / "
                f"moments {m.shape}, {v.shape}"
            )
        if wd and not decoupled:
            g = g + wd * p
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        if wd and decoupled:
            update = update + lr * wd * p
        new_params[name] = p - update
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(step=t, m=new_m, v=new_v)
