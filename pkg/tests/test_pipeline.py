"""Page recognition assembly, report formats, and round-trips."""

import numpy as np
import pytest

from helpers import typeset_glyph_page

from brahmi_ocr.dataset import CANVAS_MARGIN, LabelMap, draw_prototype, to_model_input
from brahmi_ocr.imagecore import BinaryImage, GrayImage
from brahmi_ocr.pipeline import (
    CharPrediction,
    LineRecognition,
    RecognitionResult,
    recognize_page,
    result_from_json,
    to_report,
)
from brahmi_ocr.preprocess import PreprocessConfig, preprocess
from brahmi_ocr.segmentation import (
    CharBox,
    Interval,
    SegmentationParams,
    normalize_glyph,
    segment_page,
)
from brahmi_ocr.tensornet import LayerSpec, build_model, forward


def tiny_model(classes=4, side=16, seed=0):
    layers = (
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=classes),
        LayerSpec(kind="activation", activation="softmax"),
    )
    return build_model(layers, (1, side, side), classes, seed=seed)


def labels_for(classes):
    return LabelMap(tuple(f"g{i}" for i in range(classes)))


def proto_page(class_indices, per_line, side=40):
    return typeset_glyph_page([draw_prototype(k, side) for k in class_indices], per_line)


class TestRecognizePage:
    def test_blank_page_yields_zero_lines(self):
        img = GrayImage(np.full((40, 60), 255, dtype=np.uint8))
        result = recognize_page(img, tiny_model(), labels_for(4))
        assert result.lines == ()
        assert result.page_height == 40 and result.page_width == 60

    def test_two_by_three_layout(self):
        page = proto_page([0, 1, 2, 3, 4, 5], per_line=3)
        result = recognize_page(page, tiny_model(), labels_for(4))
        assert len(result.lines) == 2
        assert [len(line.predictions) for line in result.lines] == [3, 3]

    def test_every_segmented_box_appears_once(self):
        page = proto_page([0, 1, 2, 3], per_line=2)
        cfg = PreprocessConfig()
        params = SegmentationParams()
        result = recognize_page(page, tiny_model(), labels_for(4), cfg, params)
        binary, _ = preprocess(page, cfg)
        _, boxes = segment_page(binary, params)
        expected = [b for line in boxes for b in line]
        got = [p.box for p in result.predictions()]
        assert got == expected

    def test_reading_order(self):
        page = proto_page([0, 1, 2, 3, 4, 5], per_line=3)
        result = recognize_page(page, tiny_model(), labels_for(4))
        line_starts = [line.rows.start for line in result.lines]
        assert line_starts == sorted(line_starts)
        for line in result.lines:
            col_starts = [p.box.cols.start for p in line.predictions]
            assert col_starts == sorted(col_starts)

    def test_deterministic(self):
        page = proto_page([0, 1, 2, 3], per_line=2)
        model, labels = tiny_model(seed=1), labels_for(4)
        a = recognize_page(page, model, labels, model_id="m")
        b = recognize_page(page, model, labels, model_id="m")
        assert a == b

    def test_top1_matches_direct_forward(self):
        page = proto_page([0, 1, 2], per_line=3)
        model, labels = tiny_model(seed=2), labels_for(4)
        result = recognize_page(page, model, labels)
        for pred in result.predictions():
            canvas = normalize_glyph(pred.box, side=16, margin=CANVAS_MARGIN)
            probs = forward(model, to_model_input(canvas)[None, None])[0]
            assert pred.label == labels.name_of(int(np.argmax(probs)))
            names = [n for n, _ in pred.top_k]
            ps = [p for _, p in pred.top_k]
            assert len(pred.top_k) == 3
            assert ps == sorted(ps, reverse=True)
            assert names[0] == pred.label

    def test_uniform_probabilities_break_ties_low_index(self):
        model = tiny_model(classes=4, seed=3)
        for p in model.parameters:
            for k in p:
                p[k][...] = 0.0  # forces an exactly uniform softmax
        page = proto_page([1], per_line=1)
        result = recognize_page(page, model, labels_for(4))
        pred = result.predictions()[0]
        assert [n for n, _ in pred.top_k] == ["g0", "g1", "g2"]
        assert all(np.isclose(p, 0.25) for _, p in pred.top_k)

    def test_top_k_clamped_to_class_count(self):
        page = proto_page([0], per_line=1)
        result = recognize_page(page, tiny_model(classes=3), labels_for(3), top_k=9)
        assert len(result.predictions()[0].top_k) == 3

    def test_padding_invariance(self):
        page = proto_page([0, 1, 2, 3], per_line=2)
        model, labels = tiny_model(seed=4), labels_for(4)
        base = recognize_page(page, model, labels)
        padded_px = np.pad(page.pixels, 20, constant_values=255)
        shifted = recognize_page(GrayImage(padded_px), model, labels)
        base_preds = base.predictions()
        shifted_preds = shifted.predictions()
        assert len(base_preds) == len(shifted_preds)
        for a, b in zip(base_preds, shifted_preds):
            assert [n for n, _ in a.top_k] == [n for n, _ in b.top_k]
            assert np.allclose([p for _, p in a.top_k], [p for _, p in b.top_k])
            assert b.box.cols.start - a.box.cols.start == 20
            assert b.box.rows.start - a.box.rows.start == 20

    def test_label_count_mismatch_rejected(self):
        page = proto_page([0], per_line=1)
        with pytest.raises(ValueError):
            recognize_page(page, tiny_model(classes=4), labels_for(3))

    def test_non_square_model_rejected(self):
        layers = (
            LayerSpec(kind="flatten"),
            LayerSpec(kind="dense", units=2),
            LayerSpec(kind="activation", activation="softmax"),
        )
        model = build_model(layers, (1, 8, 16), 2, seed=0)
        page = proto_page([0], per_line=1)
        with pytest.raises(ValueError):
            recognize_page(page, model, labels_for(2))

    def test_bad_top_k_rejected(self):
        page = proto_page([0], per_line=1)
        with pytest.raises(ValueError):
            recognize_page(page, tiny_model(), labels_for(4), top_k=0)


class TestReports:
    def make_result(self, class_indices=(0, 1, 2, 3), per_line=2, seed=5):
        page = proto_page(list(class_indices), per_line=per_line)
        return recognize_page(page, tiny_model(seed=seed), labels_for(4), model_id="abc123")

    def test_empty_text_report(self):
        img = GrayImage(np.full((20, 20), 255, dtype=np.uint8))
        result = recognize_page(img, tiny_model(), labels_for(4))
        assert to_report(result, "text") == b""

    def test_text_report_layout(self):
        result = self.make_result()
        text = to_report(result, "text").decode()
        rows = text.splitlines()
        assert len(rows) == 2
        for row in rows:
            assert len(row.split()) == 2
        assert text.endswith("\n")

    def test_text_matches_top1_labels(self):
        result = self.make_result()
        rows = to_report(result, "text").decode().splitlines()
        for line, row in zip(result.lines, rows):
            assert row.split() == [p.label for p in line.predictions]

    def test_structured_round_trip(self):
        result = self.make_result()
        blob = to_report(result, "structured")
        assert result_from_json(blob) == result

    def test_structured_schema_fields(self):
        import json

        result = self.make_result()
        doc = json.loads(to_report(result, "structured"))
        assert doc["model_id"] == "abc123"
        assert set(doc["params"]) == {"preprocess", "segmentation"}
        assert doc["page"] == {"height": result.page_height, "width": result.page_width}
        ch = doc["lines"][0]["characters"][0]
        assert set(ch) == {"line_index", "cols", "rows", "ink_pixels", "glyph", "top_k"}
        assert all(set(e) == {"label", "probability"} for e in ch["top_k"])
        glyph_rows = ch["glyph"]
        assert set("".join(glyph_rows)) <= {"#", "."}

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            to_report(self.make_result(), "yaml")

    def test_malformed_document_rejected(self):
        with pytest.raises(ValueError):
            result_from_json(b'{"lines": [{"oops": 1}]}')


class TestResultTypes:
    def box(self):
        glyph = BinaryImage(np.ones((3, 3), dtype=bool))
        return CharBox(line_index=0, cols=Interval(0, 3), rows=Interval(0, 3), glyph=glyph)

    def test_prediction_validation(self):
        box = self.box()
        CharPrediction(box=box, top_k=(("a", 0.7), ("b", 0.3)))
        with pytest.raises(ValueError):
            CharPrediction(box=box, top_k=())
        with pytest.raises(ValueError):
            CharPrediction(box=box, top_k=(("a", 0.3), ("b", 0.7)))
        with pytest.raises(ValueError):
            CharPrediction(box=box, top_k=(("a", 0.0),))

    def test_geometry_validation(self):
        pred = CharPrediction(box=self.box(), top_k=(("a", 1.0),))
        line = LineRecognition(rows=Interval(0, 3), predictions=(pred,))
        RecognitionResult(
            lines=(line,), model_id="", pre_cfg=PreprocessConfig(),
            seg_params=SegmentationParams(), page_height=3, page_width=3,
        )
        with pytest.raises(ValueError):
            RecognitionResult(
                lines=(line,), model_id="", pre_cfg=PreprocessConfig(),
                seg_params=SegmentationParams(), page_height=2, page_width=3,
            )
        with pytest.raises(ValueError):
            RecognitionResult(
                lines=(line,), model_id="", pre_cfg=PreprocessConfig(),
                seg_params=SegmentationParams(), page_height=3, page_width=2,
            )
