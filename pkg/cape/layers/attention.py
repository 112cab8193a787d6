"""Multi-head self-attention and bilateral multi-view cross-attention.

Maps are laid out query-major: a logit map for one head and view has shape
``[M x I]`` (one row per query, one column per key pixel).
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from cape.autodiff import Linear, Module, Tensor, ops
from cape.exceptions import ShapeMismatchError


@dataclass(frozen=True, eq=False)
class AttentionRecord:
    """Captured cross-attention maps of one layer, each ``[h x N x M x I]``.

    ``local`` is the positional term, ``global_`` the content term, both already
    scaled, and ``overall = local + global_`` elementwise is exactly the logit
    tensor the softmax consumed. Non-bilateral attention has no decomposition,
    so ``local`` and ``global_`` are ``None`` there.
    """

    overall: np.ndarray
    softmax: np.ndarray
    local: np.ndarray | None = None
    global_: np.ndarray | None = None
    per_view_softmax: bool = False

    @property
    def num_heads(self) -> int:
        return int(self.overall.shape[0])

    @property
    def num_views(self) -> int:
        return int(self.overall.shape[1])

    def maps(self) -> dict[str, np.ndarray]:
        """Available maps keyed by kind."""
        out = {"overall": self.overall, "softmax": self.softmax}
        if self.local is not None and self.global_ is not None:
            out["local"] = self.local
            out["global"] = self.global_
        return out


def _head_rows(x: Tensor, head: int, head_dim: int) -> Tensor:
    return x[head * head_dim : (head + 1) * head_dim]


def _check_views(
    features: Sequence[Tensor], key_pes: Sequence[Tensor], query_pes: Sequence[Tensor]
) -> None:
    if not features:
        raise ShapeMismatchError("cross_attention", (0,), detail="at least one view required")
    if not len(features) == len(key_pes) == len(query_pes):
        raise ShapeMismatchError(
            "cross_attention",
            (len(features),),
            (len(key_pes),),
            (len(query_pes),),
            detail="view counts of features, key PEs and query PEs differ",
        )
    pixels = features[0].shape
    for x, p in zip(features, key_pes, strict=True):
        if x.shape != pixels or p.shape != pixels:
            raise ShapeMismatchError(
                "cross_attention", x.shape, p.shape, pixels, detail="views must share extents"
            )


class SelfAttention(Module):
    """Multi-head self-attention where queries and keys carry a positional term."""

    def __init__(self, channels: int, num_heads: int, rng: np.random.Generator) -> None:
        self.num_heads = num_heads
        self.head_dim = channels // num_heads
        self.query = Linear(channels, channels, rng)
        self.key = Linear(channels, channels, rng)
        self.value = Linear(channels, channels, rng)
        self.out = Linear(channels, channels, rng)

    def attend(self, embeddings: Tensor, position: Tensor) -> Tensor:
        """Return the attention update (before the residual) for ``[C x M]`` input."""
        tokens = embeddings + position
        q, k, v = self.query(tokens), self.key(tokens), self.value(embeddings)
        scale = 1.0 / np.sqrt(self.head_dim)
        heads = []
        for h in range(self.num_heads):
            qh = _head_rows(q, h, self.head_dim)
            kh = _head_rows(k, h, self.head_dim)
            weights = ops.softmax((qh.T @ kh) * scale, axis=1)
            heads.append(_head_rows(v, h, self.head_dim) @ weights.T)
        return self.out(ops.concat(heads, axis=0))

    def __call__(self, embeddings: Tensor, position: Tensor) -> Tensor:
        return embeddings + self.attend(embeddings, position)


class BilateralCrossAttention(Module):
    """Cross-attention from object queries to all camera views.

    Bilateral logits per head and view are
    ``(Wc O)^T (Wc X_n) + (Wp G_n)^T (Wp P_n)`` scaled by ``1/sqrt(C/h)``: the
    content stream and the positional stream never mix. The non-bilateral
    (additive) form uses ``(W (O + G_n))^T (W (X_n + P_n))``.
    """

    def __init__(
        self,
        channels: int,
        num_heads: int,
        rng: np.random.Generator,
        bilateral: bool = True,
        per_view_softmax: bool = False,
    ) -> None:
        if channels % num_heads:
            raise ShapeMismatchError(
                "cross_attention", (channels,), (num_heads,), detail="heads must divide channels"
            )
        self.channels = channels
        self.num_heads = num_heads
        self.head_dim = channels // num_heads
        self.bilateral = bilateral
        self.per_view_softmax = per_view_softmax
        self.content_query = Linear(channels, channels, rng)
        self.content_key = Linear(channels, channels, rng)
        self.position_query = Linear(channels, channels, rng) if bilateral else None
        self.position_key = Linear(channels, channels, rng) if bilateral else None
        self.value = Linear(channels, channels, rng)
        self.out = Linear(channels, channels, rng)

    @property
    def scale(self) -> float:
        return float(1.0 / np.sqrt(self.head_dim))

    def _logits(
        self,
        embeddings: Tensor,
        features: Sequence[Tensor],
        key_pes: Sequence[Tensor],
        query_pes: Sequence[Tensor],
    ) -> list[tuple[list[Tensor], list[Tensor] | None, list[Tensor] | None]]:
        """Per head: overall logits per view, and the local/global parts when bilateral."""
        num_views = len(features)
        pixels = features[0].shape[1]
        scale = self.scale
        per_head: list[tuple[list[Tensor], list[Tensor] | None, list[Tensor] | None]] = []

        if self.bilateral:
            assert self.position_query is not None and self.position_key is not None
            content_q = self.content_query(embeddings)
            content_k = self.content_key(ops.concat(list(features), axis=1))
            position_q = [self.position_query(g) for g in query_pes]
            position_k = self.position_key(ops.concat(list(key_pes), axis=1))
            for h in range(self.num_heads):
                content = (_head_rows(content_q, h, self.head_dim).T
                           @ _head_rows(content_k, h, self.head_dim)) * scale
                local, global_, overall = [], [], []
                for n in range(num_views):
                    cols = slice(n * pixels, (n + 1) * pixels)
                    pk = _head_rows(position_k, h, self.head_dim)[:, cols]
                    pos = (_head_rows(position_q[n], h, self.head_dim).T @ pk) * scale
                    glob = content[:, cols]
                    local.append(pos)
                    global_.append(glob)
                    overall.append(pos + glob)
                per_head.append((overall, local, global_))
            return per_head

        queries = [self.content_query(embeddings + g) for g in query_pes]
        keys = self.content_key(
            ops.concat([x + p for x, p in zip(features, key_pes, strict=True)], axis=1)
        )
        for h in range(self.num_heads):
            overall = []
            kh = _head_rows(keys, h, self.head_dim)
            for n in range(num_views):
                cols = slice(n * pixels, (n + 1) * pixels)
                overall.append((_head_rows(queries[n], h, self.head_dim).T @ kh[:, cols]) * scale)
            per_head.append((overall, None, None))
        return per_head

    def attend(
        self,
        embeddings: Tensor,
        features: Sequence[Tensor],
        key_pes: Sequence[Tensor],
        query_pes: Sequence[Tensor],
        record: bool = False,
    ) -> tuple[Tensor, AttentionRecord | None]:
        """Attention update ``OutProj(sum_n V(X_n) w_n)`` for ``[C x M]`` embeddings.

        Args:
            embeddings: Decoder embeddings ``O``.
            features: Per-view content keys ``X_n`` ``[C x I]``.
            key_pes: Per-view key position embeddings ``P_n`` ``[C x I]``.
            query_pes: Per-view query position embeddings ``G_n`` ``[C x M]``.
            record: Capture the attention maps.

        Raises:
            ShapeMismatchError: If view counts or extents disagree.
        """
        _check_views(features, key_pes, query_pes)
        num_views = len(features)
        pixels = features[0].shape[1]
        values = self.value(ops.concat(list(features), axis=1))

        heads: list[Tensor] = []
        captured: list[tuple[list[np.ndarray], ...]] = []
        for h, (overall, local, global_) in enumerate(
            self._logits(embeddings, features, key_pes, query_pes)
        ):
            vh = _head_rows(values, h, self.head_dim)
            if self.per_view_softmax:
                weights = [ops.softmax(logits, axis=1) for logits in overall]
                mixed = ops.total(
                    [
                        vh[:, n * pixels : (n + 1) * pixels] @ weights[n].T
                        for n in range(num_views)
                    ]
                )
                weight_data = [w.data for w in weights]
            else:
                joint = ops.softmax(ops.concat(overall, axis=1), axis=1)
                mixed = vh @ joint.T
                weight_data = np.split(joint.data, num_views, axis=1)
            heads.append(mixed)
            if record:
                captured.append(
                    (
                        [o.data for o in overall],
                        weight_data,
                        [t.data for t in local] if local is not None else [],
                        [t.data for t in global_] if global_ is not None else [],
                    )
                )

        update = self.out(ops.concat(heads, axis=0))
        if not record:
            return update, None
        return update, self._record(captured)

    def _record(self, captured: list[tuple[list[np.ndarray], ...]]) -> AttentionRecord:
        def gather(slot: int) -> np.ndarray | None:
            if not captured[0][slot]:
                return None
            return np.stack([np.stack(c[slot]) for c in captured]).copy()

        overall = gather(0)
        softmax = gather(1)
        assert overall is not None and softmax is not None
        return AttentionRecord(
            overall=overall,
            softmax=softmax,
            local=gather(2),
            global_=gather(3),
            per_view_softmax=self.per_view_softmax,
        )

    def __call__(
        self,
        embeddings: Tensor,
        features: Sequence[Tensor],
        key_pes: Sequence[Tensor],
        query_pes: Sequence[Tensor],
        record: bool = False,
    ) -> tuple[Tensor, AttentionRecord | None]:
        """Residual cross-attention: ``O + attend(O, ...)``."""
        update, maps = self.attend(embeddings, features, key_pes, query_pes, record)
        return embeddings + update, maps
