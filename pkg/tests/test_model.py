from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cppgen.model import (
    BBox,
    Context,
    DataType,
    EvalConfig,
    IconClassMap,
    KeywordResource,
    Kind,
    iou,
    iou_exact,
    match_boxes,
)


def iou_bruteforce(a: BBox, b: BBox) -> Fraction:
    """Pixel-membership counting over the covering grid."""
    w = max(a.x2, b.x2)
    h = max(a.y2, b.y2)
    grid_a = np.zeros((h, w), dtype=bool)
    grid_b = np.zeros((h, w), dtype=bool)
    grid_a[a.y : a.y2, a.x : a.x2] = True
    grid_b[b.y : b.y2, b.x : b.x2] = True
    inter = int((grid_a & grid_b).sum())
    union = int((grid_a | grid_b).sum())
    return Fraction(inter, union)


boxes_100 = st.builds(
    BBox,
    x=st.integers(0, 90),
    y=st.integers(0, 90),
    w=st.integers(1, 10),
    h=st.integers(1, 10),
)


class TestBBox:
    def test_valid(self):
        b = BBox(0, 0, 10, 20)
        assert b.area == 200
        assert (b.x2, b.y2) == (10, 20)

    @pytest.mark.parametrize("bad", [(0, 0, 0, 5), (0, 0, 5, 0), (-1, 0, 5, 5), (0, -2, 5, 5)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            BBox(*bad)

    def test_non_integer_rejected(self):
        with pytest.raises(ValueError):
            BBox(0.5, 0, 5, 5)

    def test_json_roundtrip(self):
        b = BBox(3, 4, 5, 6)
        assert BBox.from_json(b.to_json()) == b

    def test_from_json_rejects_wrong_arity(self):
        with pytest.raises(ValueError):
            BBox.from_json([1, 2, 3])

    def test_clip(self):
        assert BBox(5, 5, 100, 100).clip(20, 30) == BBox(5, 5, 15, 25)
        assert BBox(50, 50, 10, 10).clip(20, 20) is None


class TestDataType:
    def test_twelve_values_in_row_order(self):
        assert [dt.value for dt in DataType] == [
            "Name", "Birthday", "Address", "Phone", "Email", "Profile",
            "Contacts", "Location", "Photos", "Voices", "FinancialInfo",
            "SocialMedia",
        ]

    def test_strict_parse(self):
        assert DataType.from_name("Email") is DataType.EMAIL
        with pytest.raises(ValueError):
            DataType.from_name("Email ")
        with pytest.raises(ValueError):
            DataType.from_name("email")


class TestKeywordResource:
    def test_default_lists_nonempty_lowercase(self):
        kw = KeywordResource.default()
        for dt in DataType:
            assert kw[dt]
            for phrase in kw[dt]:
                assert phrase == phrase.lower()

    def test_bare_address_excluded(self):
        # ambiguous between residential and email address
        assert "address" not in KeywordResource.default()[DataType.ADDRESS]

    def test_rejects_uppercase(self):
        with pytest.raises(ValueError):
            KeywordResource.from_mapping({dt.value: ["ok"] for dt in DataType} | {"Email": []})


class TestIconClassMap:
    def test_fourteen_classes(self):
        m = IconClassMap.default()
        assert len(m.classes) == 14
        assert m.lookup("LocationCrosshair") is DataType.LOCATION
        assert m.lookup("Videocam") is DataType.PHOTOS
        assert m.lookup("Settings") is None


class TestIou:
    def test_identical(self):
        b = BBox(0, 0, 10, 10)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 5, 5)) == 0.0

    def test_worked_example_half_offset(self):
        # brute-force pixel-membership over the covering grid gives 50/150
        a = BBox(0, 0, 10, 10)
        b = BBox(5, 0, 10, 10)
        assert iou_bruteforce(a, b) == Fraction(50, 150)
        assert iou_exact(a, b) == Fraction(1, 3)
        assert iou(a, b) == pytest.approx(1 / 3)

    @given(a=boxes_100, b=boxes_100)
    def test_matches_bruteforce(self, a, b):
        assert iou_exact(a, b) == iou_bruteforce(a, b)

    @given(a=boxes_100, b=boxes_100)
    def test_symmetric_and_bounded(self, a, b):
        ab = iou_exact(a, b)
        assert ab == iou_exact(b, a)
        assert 0 <= ab <= 1
        assert iou_exact(a, a) == 1


def ctx(box: BBox, kind=Kind.TEXT, dt=DataType.EMAIL, sid="s1") -> Context:
    return Context(screenshot_id=sid, bbox=box, kind=kind, data_type=dt, evidence="email")


class TestMatchBoxes:
    def test_identical_lists_match_pairwise(self):
        items = [ctx(BBox(0, 0, 10, 10)), ctx(BBox(50, 50, 8, 8), dt=DataType.PHONE)]
        assert match_boxes(items, items) == [(0, 0), (1, 1)]

    def test_empty_preds(self):
        assert match_boxes([], [ctx(BBox(0, 0, 5, 5))]) == []

    def test_two_preds_one_gt_takes_higher_iou(self):
        gt = [ctx(BBox(0, 0, 10, 10))]
        preds = [ctx(BBox(0, 0, 10, 6)), ctx(BBox(0, 0, 10, 9))]
        # enumeration oracle: candidate pairs (0,0) at 0.6 and (1,0) at 0.9;
        # max-IoU-first keeps only the 0.9 pair
        assert iou(preds[0].bbox, gt[0].bbox) == pytest.approx(0.6)
        assert iou(preds[1].bbox, gt[0].bbox) == pytest.approx(0.9)
        assert match_boxes(preds, gt) == [(1, 0)]

    def test_below_threshold_not_matched(self):
        gt = [ctx(BBox(0, 0, 10, 10))]
        preds = [ctx(BBox(0, 0, 10, 4))]  # IoU 0.4
        assert match_boxes(preds, gt, EvalConfig(iou_threshold=0.5)) == []
        assert match_boxes(preds, gt, EvalConfig(iou_threshold=0.4)) == [(0, 0)]

    def test_kind_and_type_must_agree(self):
        box = BBox(0, 0, 10, 10)
        assert match_boxes([ctx(box, kind=Kind.ICON)], [ctx(box, kind=Kind.TEXT)]) == []
        assert match_boxes([ctx(box, dt=DataType.PHONE)], [ctx(box, dt=DataType.EMAIL)]) == []

    def test_mixed_screenshots_rejected(self):
        with pytest.raises(ValueError):
            match_boxes([ctx(BBox(0, 0, 5, 5), sid="a")], [ctx(BBox(0, 0, 5, 5), sid="b")])

    def test_tie_broken_by_pred_then_gt_index(self):
        box = BBox(0, 0, 10, 10)
        preds = [ctx(box), ctx(box)]
        gts = [ctx(box), ctx(box)]
        assert match_boxes(preds, gts) == [(0, 0), (1, 1)]

    @settings(max_examples=50)
    @given(
        preds=st.lists(boxes_100, max_size=6),
        gts=st.lists(boxes_100, max_size=6),
    )
    def test_matching_properties(self, preds, gts):
        cfg = EvalConfig(iou_threshold=0.5)
        p = [ctx(b) for b in preds]
        g = [ctx(b) for b in gts]
        matches = match_boxes(p, g, cfg)
        assert len(matches) <= min(len(p), len(g))
        assert len({pi for pi, _ in matches}) == len(matches)
        assert len({gi for _, gi in matches}) == len(matches)
        for pi, gi in matches:
            assert iou_exact(preds[pi], gts[gi]) >= Fraction(1, 2)
        assert match_boxes(p, g, cfg) == matches  # deterministic
