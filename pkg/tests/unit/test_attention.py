"""Unit tests for self-attention and bilateral cross-attention."""

import numpy as np
import pytest

from cape.autodiff import Tensor
from cape.exceptions import ShapeMismatchError
from cape.layers import BilateralCrossAttention, SelfAttention

C, M, I, N, H = 8, 3, 5, 2, 2


def views(rng: np.random.Generator, count: int = N, cols: int = I) -> list[Tensor]:
    return [Tensor(rng.normal(size=(C, cols))) for _ in range(count)]


def attention(bilateral: bool = True, per_view: bool = False) -> BilateralCrossAttention:
    return BilateralCrossAttention(
        C, H, np.random.default_rng(0), bilateral=bilateral, per_view_softmax=per_view
    )


class TestBilateralCrossAttention:
    """Tests for BilateralCrossAttention."""

    def test_update_shape(self, rng: np.random.Generator) -> None:
        """The update should have the embeddings' shape."""
        update, maps = attention().attend(
            Tensor(rng.normal(size=(C, M))), views(rng), views(rng), views(rng, cols=M)
        )
        assert update.shape == (C, M)
        assert maps is None

    def test_overall_is_local_plus_global(self, rng: np.random.Generator) -> None:
        """The recorded overall logits should equal local plus global exactly."""
        _, maps = attention().attend(
            Tensor(rng.normal(size=(C, M))), views(rng), views(rng), views(rng, cols=M),
            record=True,
        )
        assert maps is not None and maps.local is not None and maps.global_ is not None
        assert maps.overall.shape == (H, N, M, I)
        np.testing.assert_array_equal(maps.overall, maps.local + maps.global_)
        assert set(maps.maps()) == {"overall", "softmax", "local", "global"}

    def test_content_and_position_streams_do_not_mix(self, rng: np.random.Generator) -> None:
        """Changing position embeddings should leave the content logits untouched."""
        layer = attention()
        embeddings = Tensor(rng.normal(size=(C, M)))
        features = views(rng)
        _, a = layer.attend(embeddings, features, views(rng), views(rng, cols=M), record=True)
        _, b = layer.attend(embeddings, features, views(rng), views(rng, cols=M), record=True)
        assert a is not None and b is not None
        np.testing.assert_array_equal(a.global_, b.global_)
        assert not np.allclose(a.local, b.local)

    def test_joint_softmax_spans_all_views(self, rng: np.random.Generator) -> None:
        """Joint normalization should sum to one over every view's pixels."""
        _, maps = attention().attend(
            Tensor(rng.normal(size=(C, M))), views(rng), views(rng), views(rng, cols=M),
            record=True,
        )
        assert maps is not None
        np.testing.assert_allclose(maps.softmax.sum(axis=(1, 3)), 1.0, atol=1e-12)

    def test_per_view_softmax(self, rng: np.random.Generator) -> None:
        """Per-view normalization should sum to one within each view."""
        _, maps = attention(per_view=True).attend(
            Tensor(rng.normal(size=(C, M))), views(rng), views(rng), views(rng, cols=M),
            record=True,
        )
        assert maps is not None and maps.per_view_softmax
        np.testing.assert_allclose(maps.softmax.sum(axis=3), 1.0, atol=1e-12)

    def test_additive_form_has_no_decomposition(self, rng: np.random.Generator) -> None:
        """Non-bilateral attention should record only overall and softmax maps."""
        layer = attention(bilateral=False)
        _, maps = layer.attend(
            Tensor(rng.normal(size=(C, M))), views(rng), views(rng), views(rng, cols=M),
            record=True,
        )
        assert maps is not None
        assert maps.local is None
        assert set(maps.maps()) == {"overall", "softmax"}
        assert layer.position_query is None

    def test_residual_call(self, rng: np.random.Generator) -> None:
        """Calling the layer should add the update to its input."""
        layer = attention()
        embeddings = Tensor(rng.normal(size=(C, M)))
        features, keys, queries = views(rng), views(rng), views(rng, cols=M)
        update, _ = layer.attend(embeddings, features, keys, queries)
        out, _ = layer(embeddings, features, keys, queries)
        np.testing.assert_allclose(out.data, embeddings.data + update.data)

    @pytest.mark.parametrize("bilateral", [True, False])
    @pytest.mark.parametrize("per_view", [True, False])
    def test_view_order_does_not_matter(
        self, rng: np.random.Generator, bilateral: bool, per_view: bool
    ) -> None:
        """Reordering the camera views should leave the update unchanged."""
        layer = attention(bilateral=bilateral, per_view=per_view)
        embeddings = Tensor(rng.normal(size=(C, M)))
        features, keys, queries = views(rng, 3), views(rng, 3), views(rng, 3, cols=M)
        order = [2, 0, 1]

        update, _ = layer.attend(embeddings, features, keys, queries)
        reordered, _ = layer.attend(
            embeddings,
            [features[n] for n in order],
            [keys[n] for n in order],
            [queries[n] for n in order],
        )

        np.testing.assert_allclose(reordered.data, update.data, rtol=0, atol=1e-12)

    def test_view_count_mismatch(self, rng: np.random.Generator) -> None:
        """Different numbers of feature and PE views should be rejected."""
        with pytest.raises(ShapeMismatchError):
            attention().attend(
                Tensor(rng.normal(size=(C, M))), views(rng), views(rng, 1), views(rng, cols=M)
            )

    def test_no_views(self, rng: np.random.Generator) -> None:
        """Attention over zero views should be rejected."""
        with pytest.raises(ShapeMismatchError):
            attention().attend(Tensor(rng.normal(size=(C, M))), [], [], [])

    def test_heads_must_divide_channels(self) -> None:
        """A head count that does not divide C should be rejected."""
        with pytest.raises(ShapeMismatchError):
            BilateralCrossAttention(C, 3, np.random.default_rng(0))


class TestSelfAttention:
    """Tests for SelfAttention."""

    def test_shape_and_residual(self, rng: np.random.Generator) -> None:
        """Self-attention should preserve shape and add its update."""
        layer = SelfAttention(C, H, np.random.default_rng(0))
        embeddings = Tensor(rng.normal(size=(C, M)))
        position = Tensor(rng.normal(size=(C, M)))
        out = layer(embeddings, position)
        assert out.shape == (C, M)
        np.testing.assert_allclose(
            out.data, embeddings.data + layer.attend(embeddings, position).data
        )

    def test_permutation_equivariant(self, rng: np.random.Generator) -> None:
        """Permuting queries should permute the output the same way."""
        layer = SelfAttention(C, H, np.random.default_rng(0))
        embeddings = rng.normal(size=(C, M))
        position = rng.normal(size=(C, M))
        perm = np.array([2, 0, 1])
        out = layer(Tensor(embeddings), Tensor(position)).data
        permuted = layer(Tensor(embeddings[:, perm]), Tensor(position[:, perm])).data
        np.testing.assert_allclose(permuted, out[:, perm], atol=1e-12)
