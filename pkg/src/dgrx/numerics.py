"""Dense float64 kernels with hand-derived backward passes.

Forward ops are recorded on a linear Tape; Tape.backward replays the records
in exact reverse execution order, accumulating gradients into each operand.
Everything runs in 64-bit precision so the finite-difference checker has
headroom; 32-bit exists only as a storage option in the embedding cache.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, LabelError, PoolError, ShapeError


class Tensor:
    """A dense float64 array plus a lazily allocated gradient accumulator."""

    __slots__ = ("data", "grad")

    def __init__(self, data) -> None:
        self.data = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, delta: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += delta

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


def softmax(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a 1-D array."""
    shifted = x - np.max(x)
    e = np.exp(shifted)
    return e / e.sum()


class Tape:
    """Ordered record of executed ops with the saved state their backward needs."""

    def __init__(self) -> None:
        self._steps: list[Callable[[], None]] = []

    def _record(self, step: Callable[[], None]) -> None:
        self._steps.append(step)

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        """C = A @ B. Backward: dA = dC @ B^T, dB = A^T @ dC."""
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
        if a.data.shape[1] != b.data.shape[0]:
            raise ShapeError(f"matmul inner dims differ: {a.shape} vs {b.shape}")
        out = Tensor(a.data @ b.data)

        def backward() -> None:
            g = out.grad
            if g is None:
                return
            a.accumulate(g @ b.data.T)
            b.accumulate(a.data.T @ g)

        self._record(backward)
        return out

    def matmul_nt(self, a: Tensor, b: Tensor) -> Tensor:
        """C = A @ B^T, so row i of C is B applied to row i of A.

        Backward: dA = dC @ B, dB = dC^T @ A.
        """
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise ShapeError(f"matmul_nt expects 2-D operands, got {a.shape} and {b.shape}")
        if a.data.shape[1] != b.data.shape[1]:
            raise ShapeError(f"matmul_nt inner dims differ: {a.shape} vs {b.shape}")
        out = Tensor(a.data @ b.data.T)

        def backward() -> None:
            g = out.grad
            if g is None:
                return
            a.accumulate(g @ b.data)
            b.accumulate(g.T @ a.data)

        self._record(backward)
        return out

    def matvec(self, w: Tensor, x: Tensor) -> Tensor:
        """y = W @ x for a 1-D x. Backward: dW = outer(dy, x), dx = W^T @ dy."""
        if w.data.ndim != 2 or x.data.ndim != 1:
            raise ShapeError(f"matvec expects (2-D, 1-D), got {w.shape} and {x.shape}")
        if w.data.shape[1] != x.data.shape[0]:
            raise ShapeError(f"matvec inner dims differ: {w.shape} vs {x.shape}")
        out = Tensor(w.data @ x.data)

        def backward() -> None:
            g = out.grad
            if g is None:
                return
            w.accumulate(np.outer(g, x.data))
            x.accumulate(w.data.T @ g)

        self._record(backward)
        return out

    def add_bias(self, x: Tensor, b: Tensor) -> Tensor:
        """Broadcast b across the rows of x (or add elementwise for 1-D x).

        Backward: dx = dY, db = column sum of dY.
        """
        if b.data.ndim != 1:
            raise ShapeError(f"bias must be 1-D, got {b.shape}")
        if x.data.ndim not in (1, 2) or x.data.shape[-1] != b.data.shape[0]:
            raise ShapeError(f"add_bias shapes incompatible: {x.shape} and {b.shape}")
        out = Tensor(x.data + b.data)

        def backward() -> None:
            g = out.grad
            if g is None:
                return
            x.accumulate(g)
            b.accumulate(g if g.ndim == 1 else g.sum(axis=0))

        self._record(backward)
        return out

    def relu(self, x: Tensor) -> Tensor:
        """Elementwise max(x, 0). Backward passes through strictly positive inputs."""
        out = Tensor(np.maximum(x.data, 0.0))
        mask = x.data > 0.0

        def backward() -> None:
            g = out.grad
            if g is None:
                return
            x.accumulate(g * mask)

        self._record(backward)
        return out

    def masked_max_pool(self, x: Tensor, mask: Sequence[bool]) -> tuple[Tensor, np.ndarray]:
        """Column-wise max over the rows of x where mask is true.

        Returns the pooled vector and the winning row index per column. Ties
        break to the lowest row index so backward is deterministic; backward
        routes each output gradient to its argmax row only.
        """
        if x.data.ndim != 2:
            raise ShapeError(f"masked_max_pool expects a 2-D input, got {x.shape}")
        m = np.asarray(mask, dtype=bool)
        if m.shape != (x.data.shape[0],):
            raise ShapeError(f"mask length {m.shape} does not match {x.data.shape[0]} rows")
        rows = np.flatnonzero(m)
        if rows.size == 0:
            raise PoolError("masked_max_pool over an empty mask")
        sub = x.data[rows]
        winners = rows[np.argmax(sub, axis=0)]
        cols = np.arange(x.data.shape[1])
        out = Tensor(x.data[winners, cols])

        def backward() -> None:
            g = out.grad
            if g is None:
                return
            delta = np.zeros_like(x.data)
            delta[winners, cols] = g
            x.accumulate(delta)

        self._record(backward)
        return out, winners

    def concat(self, parts: Sequence[Tensor]) -> Tensor:
        """Concatenate 1-D tensors. Backward splits the gradient at recorded offsets."""
        if not parts:
            raise ShapeError("concat of zero parts")
        for p in parts:
            if p.data.ndim != 1:
                raise ShapeError(f"concat expects 1-D parts, got {p.shape}")
        sizes = [p.data.shape[0] for p in parts]
        offsets = np.cumsum([0] + sizes)
        out = Tensor(np.concatenate([p.data for p in parts]))

        def backward() -> None:
            g = out.grad
            if g is None:
                return
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                p.accumulate(g[lo:hi])

        self._record(backward)
        return out

    def softmax_xent(self, logits: Tensor, gold: int) -> Tensor:
        """Cross-entropy of softmax(logits) against a gold class index.

        loss = logsumexp(logits) - logits[gold], computed with max subtraction.
        Backward: dlogits = softmax(logits) - onehot(gold).
        """
        if logits.data.ndim != 1:
            raise ShapeError(f"softmax_xent expects 1-D logits, got {logits.shape}")
        k = logits.data.shape[0]
        if not isinstance(gold, (int, np.integer)) or not 0 <= int(gold) < k:
            raise LabelError(f"gold index {gold!r} outside [0, {k})")
        gold = int(gold)
        m = np.max(logits.data)
        lse = m + np.log(np.sum(np.exp(logits.data - m)))
        out = Tensor(lse - logits.data[gold])
        probs = softmax(logits.data)

        def backward() -> None:
            g = out.grad
            if g is None:
                return
            d = probs.copy()
            d[gold] -= 1.0
            logits.accumulate(float(g) * d)

        self._record(backward)
        return out

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss) = 1 and replay records in reverse execution order."""
        if loss.data.shape != ():
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        loss.grad = np.ones_like(loss.data)
        for step in reversed(self._steps):
            step()


LossFn = Callable[[Mapping[str, Tensor]], tuple[Tape, Tensor]]


def grad_check(loss_fn: LossFn, params: Mapping[str, Tensor], eps: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences.

    loss_fn must build a fresh Tape on every call and return (tape, loss); it
    may close over the same Tensor objects that appear in params, which is how
    coordinate perturbations reach it. Returns the worst relative error over
    all parameter coordinates, with denominator max(|analytic|, |numeric|, 1e-8).
    """
    if eps <= 0:
        raise ConfigError(f"grad_check eps must be > 0, got {eps}")

    for t in params.values():
        t.zero_grad()
    tape, loss = loss_fn(params)
    tape.backward(loss)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in params.items()
    }

    worst = 0.0
    for name, t in params.items():
        flat = t.data.reshape(-1)
        ana = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            _, up = loss_fn(params)
            flat[i] = orig - eps
            _, down = loss_fn(params)
            flat[i] = orig
            numeric = (float(up.data) - float(down.data)) / (2.0 * eps)
            rel = abs(ana[i] - numeric) / max(abs(ana[i]), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
