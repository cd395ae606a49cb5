import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nutpipe import (
    AugmentImage,
    BuildBatch,
    Collect,
    Flatten,
    FlowError,
    Image,
    Map,
    MapCol,
    ReadImage,
    ReadSamples,
    SplitRandom,
    Stratify,
    Take,
    TransformImage,
    Zip,
    apportion,
    label_index,
    one_hot,
    split_random,
    stratify,
    write_image_file,
)
from nutpipe.imaging import fliplr, resize, rgb2gray
from oracles import largest_remainder


def labelled(counts):
    """Samples ``(i, label)`` with the given number of samples per label."""
    out = []
    for label, n in counts.items():
        out.extend((len(out) + i, label) for i in range(n))
    return out


class TestReadSamples:
    def test_records(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("image1.png,plane\nimage2.png,car\n")
        assert ReadSamples(path) >> Collect() == [("image1.png", "plane"), ("image2.png", "car")]

    def test_header(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("file,label\nimage1.png,plane\n")
        assert ReadSamples(path, has_header=True) >> Collect() == [("image1.png", "plane")]

    def test_empty(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("")
        assert ReadSamples(path) >> Collect() == []

    def test_arity(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a.png,x\nlonely\n")
        with pytest.raises(FlowError, match="2 columns"):
            ReadSamples(path) >> Collect()


class TestSplit:
    def test_sizes(self):
        assert [len(f) for f in split_random(range(10), (60, 20, 20))] == [6, 2, 2]
        assert [len(f) for f in split_random(range(5), (50, 50))] == [3, 2]

    def test_fewer_samples_than_folds(self):
        assert [len(f) for f in split_random(range(2), (1, 1, 1))] == [1, 1, 0]

    def test_deterministic(self):
        assert split_random(range(50), seed=3) == split_random(range(50), seed=3)
        assert split_random(range(50), seed=3) != split_random(range(50), seed=4)

    def test_sink(self):
        train, val, test = range(10) >> SplitRandom(ratio=(60, 20, 20), seed=1)
        assert (train, val, test) == tuple(split_random(range(10), (60, 20, 20), 1))

    def test_invalid_ratios(self):
        with pytest.raises(ValueError):
            split_random(range(4), (1,))
        with pytest.raises(ValueError):
            split_random(range(4), (1, 0))

    @given(
        st.integers(0, 300),
        st.lists(st.integers(1, 100), min_size=2, max_size=5),
        st.integers(0, 2**64 - 1),
    )
    def test_properties(self, n, ratios, seed):
        samples = [(i, i % 3) for i in range(n)]
        folds = split_random(samples, ratios, seed)
        assert [len(f) for f in folds] == largest_remainder(n, ratios)
        assert Counter(s for f in folds for s in f) == Counter(samples)
        total = sum(ratios)
        assert all(abs(len(f) - n * r / total) <= 1 for f, r in zip(folds, ratios))

    def test_apportion_float_ratios(self):
        assert apportion(10, [0.6, 0.2, 0.2]) == [6, 2, 2]
        assert apportion(7, [1, 1, 1]) == [3, 2, 2]


class TestStratify:
    def test_up(self):
        out = stratify(labelled({"a": 3, "b": 1}), mode="up")
        assert Counter(s[1] for s in out) == {"a": 3, "b": 3}

    def test_down(self):
        out = stratify(labelled({"a": 3, "b": 1}), mode="down")
        assert Counter(s[1] for s in out) == {"a": 1, "b": 1}

    def test_single_class(self):
        data = labelled({"a": 5})
        for mode in ("up", "down"):
            assert sorted(stratify(data, mode=mode, seed=2)) == data

    def test_invalid_column(self):
        with pytest.raises(IndexError):
            stratify([("a",)], labelcol=1)

    def test_processor(self):
        data = labelled({"a": 4, "b": 2})
        assert data >> Stratify(mode="up", seed=5) >> Collect() == stratify(data, mode="up", seed=5)

    @settings(max_examples=50)
    @given(st.lists(st.integers(1, 30), min_size=1, max_size=5), st.integers(0, 2**32))
    def test_properties(self, sizes, seed):
        data = labelled({f"c{i}": n for i, n in enumerate(sizes)})
        up = stratify(data, mode="up", seed=seed)
        assert Counter(s[1] for s in up) == {f"c{i}": max(sizes) for i in range(len(sizes))}
        assert set(data) <= set(up)
        assert set(up) <= set(data)  # copies only, of the same (id, label) pair
        down = stratify(data, mode="down", seed=seed)
        assert Counter(s[1] for s in down) == {f"c{i}": min(sizes) for i in range(len(sizes))}
        assert not Counter(down) - Counter(data)
        assert stratify(data, mode="up", seed=seed) == up


def test_label_index():
    assert label_index([("a", "dog"), ("b", "cat"), ("c", "dog")]) == {"cat": 0, "dog": 1}


@pytest.fixture
def image_dir(tmp_path):
    rng = np.random.default_rng(0)
    (tmp_path / "images").mkdir()
    imgs = {}
    for name in ("img1.pgm", "img2.pgm"):
        imgs[name] = Image(rng.integers(0, 256, (4, 5, 1), dtype=np.uint8))
        write_image_file(tmp_path / "images" / name, imgs[name])
    return tmp_path, imgs


class TestReadImage:
    def test_template(self, image_dir):
        root, imgs = image_dir
        out = [("img1.pgm", "plane")] >> ReadImage(0, str(root / "images" / "*")) >> Collect()
        assert out == [(imgs["img1.pgm"], "plane")]

    def test_two_columns(self, image_dir):
        root, imgs = image_dir
        out = [("img1.pgm", "img2.pgm")] >> ReadImage((0, 1), str(root / "images" / "*")) >> Collect()
        assert out == [(imgs["img1.pgm"], imgs["img2.pgm"])]

    def test_no_columns(self):
        data = [("x", 1)]
        assert data >> ReadImage([]) >> Collect() == data

    def test_missing_file(self, tmp_path):
        with pytest.raises(FlowError, match="absent.pgm"):
            [("absent.pgm", 0)] >> ReadImage(0, str(tmp_path / "*")) >> Collect()

    def test_lazy(self, counting, image_dir):
        root, _ = image_dir
        src = counting(["img1.pgm"] * 10)
        flow = src >> Map(lambda n: (n,)) >> ReadImage(0, str(root / "images" / "*")) >> Take(2)
        assert len(flow >> Collect()) == 2
        assert src.pulls == 2


class TestTransformImage:
    def test_resize_then_gray(self):
        rgb = Image(np.random.default_rng(1).integers(0, 256, (256, 256, 3), dtype=np.uint8))
        transform = TransformImage(0).by("resize", 128, 128).by("rgb2gray")
        (out, label), = [(rgb, "plane")] >> transform >> Collect()
        assert out.shape == (128, 128, 1) and label == "plane"
        assert out == rgb2gray(resize(rgb, 128, 128))

    def test_empty_specs(self):
        img = Image(np.zeros((2, 2, 1), np.uint8))
        assert [(img, 1)] >> TransformImage(0) >> Collect() == [(img, 1)]

    def test_by_returns_new_nut(self):
        base = TransformImage(0)
        base.by("fliplr")
        assert base.specs == ()

    def test_two_columns_match_column_wise(self):
        rng = np.random.default_rng(2)
        a, b = (Image(rng.integers(0, 256, (6, 6, 3), dtype=np.uint8)) for _ in range(2))
        transform = TransformImage((0, 1)).by("resize", 3, 4).by("fliplr")
        expect = tuple(fliplr(resize(x, 3, 4)) for x in (a, b))
        assert [(a, b)] >> transform >> Collect() == [expect]


class TestAugmentImage:
    def images(self, n, seed=0):
        rng = np.random.default_rng(seed)
        return [(Image(rng.integers(0, 256, (6, 6, 1), dtype=np.uint8)), i) for i in range(n)]

    def test_probability_zero(self):
        data = self.images(5)
        augment = AugmentImage(0).by("fliplr", 0.0).by("rotate", 0.0, [0, 360])
        assert data >> augment >> Collect() == data

    def test_image_and_mask(self):
        data = [(img, img, i) for img, i in self.images(4)]
        out = data >> AugmentImage((0, 1), seed=7).by("fliplr", 1.0) >> Collect()
        assert out == [(fliplr(a), fliplr(b), i) for a, b, i in data]

    def test_deterministic_and_synchronized(self):
        data = [(img, img) for img, _ in self.images(20)]
        augment = AugmentImage((0, 1), seed=3).by("fliplr", 0.5).by("rotate", 0.5, [0, 360])
        first = data >> augment >> Collect()
        assert first == data >> augment >> Collect()
        assert all(a == b for a, b in first)
        assert any(a != orig for (a, _), (orig, _) in zip(first, data))

    def test_seed_changes_stream(self):
        data = self.images(20)
        augment = lambda s: AugmentImage(0, seed=s).by("rotate", 1.0, [0, 360])  # noqa: E731
        assert data >> augment(1) >> Collect() != data >> augment(2) >> Collect()

    def test_tuple_seed(self):
        data = self.images(5)
        out = data >> AugmentImage(0, seed=(0, 3)).by("fliplr", 0.5) >> Collect()
        assert len(out) == 5


class TestOneHot:
    def test_examples(self):
        assert one_hot(2, 4).tolist() == [0, 0, 1, 0]
        assert one_hot(0, 2).tolist() == [1, 0]
        assert one_hot(1, 3, np.float64).dtype == np.float64

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            one_hot(5, 3)
        with pytest.raises(ValueError):
            one_hot(-1, 3)

    @given(st.integers(2, 50).flatmap(lambda k: st.tuples(st.integers(0, k - 1), st.just(k))))
    def test_single_one(self, args):
        label, k = args
        vec = one_hot(label, k)
        assert vec.sum() == 1 and vec[label] == 1


class TestBuildBatch:
    def test_worked_example(self):
        build = BuildBatch(2).by(0, "number", np.int64).by(1, "number", np.int64)
        batches = [1, 2, 3, 4] >> Zip([-1, 1, -1, 1]) >> MapCol(1, lambda y: y * 2) >> build >> Collect()
        assert [[c.tolist() for c in b] for b in batches] == [[[1, 2], [-2, 2]], [[3, 4], [-2, 2]]]
        assert all(c.shape == (2,) for b in batches for c in b)

    def test_partial_final_batch(self):
        build = BuildBatch(2).by(0, "number", np.float64)
        sizes = [len(b[0]) for b in [(x,) for x in range(5)] >> build >> Collect()]
        assert sizes == [2, 2, 1]

    def test_channel_first_image(self):
        img = Image(np.zeros((16, 16, 1), np.uint8))
        (batch,) = [(img, 0)] >> BuildBatch(4).by(0, "image", np.uint8, True).by(1, "one_hot", np.uint8, 2) >> Collect()
        assert batch[0].shape == (1, 1, 16, 16) and batch[0].dtype == np.uint8
        assert batch[1].tolist() == [[1, 0]]

    def test_channel_last_image(self):
        img = Image(np.arange(12, dtype=np.uint8).reshape(2, 2, 3))
        (batch,) = [(img,), (img,)] >> BuildBatch(2).by(0, "image", np.float64) >> Collect()
        assert batch[0].shape == (2, 2, 2, 3) and batch[0].dtype == np.float64
        assert (batch[0][1] == img.pixels).all()

    def test_shape_mismatch(self):
        a = Image(np.zeros((2, 2, 1), np.uint8))
        b = Image(np.zeros((3, 2, 1), np.uint8))
        with pytest.raises(FlowError, match="column 0"):
            [(a,), (b,)] >> BuildBatch(2).by(0, "image", np.uint8) >> Collect()

    def test_bad_label(self):
        with pytest.raises(FlowError):
            [(0, 3)] >> BuildBatch(1).by(1, "one_hot", np.uint8, 3) >> Collect()

    def test_validation(self):
        with pytest.raises(ValueError):
            BuildBatch(0)
        with pytest.raises(ValueError):
            BuildBatch(2).by(0, "tensor")
        with pytest.raises(ValueError):
            BuildBatch(2).by(0, "number", np.float32)
        with pytest.raises(ValueError):
            BuildBatch(2).by(0, "one_hot", np.uint8, 1)
        with pytest.raises(ValueError):
            BuildBatch(2).by(0, "number").by(0, "number")

    @pytest.mark.parametrize("b", [1, 3, 16])
    def test_pulls_exactly_one_batch(self, counting, b):
        src = counting(100)
        flow = src >> Map(lambda x: (x,)) >> BuildBatch(b).by(0, "number", np.int64)
        next(flow)
        assert src.pulls == b
        next(flow)
        assert src.pulls == 2 * b
        flow.close()

    @given(st.lists(st.tuples(st.integers(-1000, 1000), st.integers(0, 3)), max_size=40), st.integers(1, 8))
    def test_rows_concatenate_to_stream(self, samples, b):
        build = BuildBatch(b).by(0, "number", np.int64).by(1, "one_hot", np.uint8, 4)
        batches = samples >> build >> Collect()
        assert sum(len(batch[0]) for batch in batches) == len(samples)
        assert all(len(batch[0]) == b for batch in batches[:-1])
        xs = [int(v) for batch in batches for v in batch[0]]
        ys = [int(np.argmax(row)) for batch in batches for row in batch[1]]
        assert list(zip(xs, ys)) == samples

    def test_stream_of_batches_flattens(self):
        rng = random.Random(0)
        data = [(rng.randint(0, 9),) for _ in range(11)]
        rows = data >> BuildBatch(4).by(0, "number", np.int64) >> Map(lambda b: b[0].tolist()) >> Flatten() >> Collect()
        assert rows == [x for (x,) in data]
