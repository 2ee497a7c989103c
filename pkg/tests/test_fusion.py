import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from savanna.errors import InvalidArgumentError, NotFoundError
from savanna.fusion import (
    ConsensusMap,
    VolunteerPolygon,
    build_consensus,
    export_ground_truth,
    extract_objects,
    rasterize_polygon,
    rescale_object,
    verify_objects,
)


def square(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def point_in_polygon(px, py, verts):
    """Even-odd ray cast at the pixel center (independent oracle)."""
    inside = False
    n = len(verts)
    for i in range(n):
        xa, ya = verts[i]
        xb, yb = verts[(i + 1) % n]
        if (ya <= py) != (yb <= py):
            x_int = xa + (py - ya) * (xb - xa) / (yb - ya)
            if px < x_int:
                inside = not inside
    return inside


class TestRasterize:
    def test_axis_aligned_square(self):
        poly = VolunteerPolygon("img", "v1", square(0, 0, 4, 4))
        pixels = rasterize_polygon(poly, 10, 10)
        assert len(pixels) == 16
        assert set(map(tuple, pixels.tolist())) == {(x, y) for x in range(4) for y in range(4)}

    def test_triangle_matches_raycast_oracle(self):
        verts = [[0.5, 0.2], [7.3, 2.1], [2.2, 6.8]]
        poly = VolunteerPolygon("img", "v1", verts)
        got = set(map(tuple, rasterize_polygon(poly, 10, 10).tolist()))
        expected = {
            (x, y)
            for x in range(10)
            for y in range(10)
            if point_in_polygon(x + 0.5, y + 0.5, verts)
        }
        assert got == expected

    def test_collinear_polygon_warns_and_is_empty(self):
        poly = VolunteerPolygon("img", "v1", [[0, 1], [4, 1], [2, 1]])
        with pytest.warns(UserWarning):
            pixels = rasterize_polygon(poly, 10, 10)
        assert len(pixels) == 0

    def test_needs_three_vertices(self):
        with pytest.raises(InvalidArgumentError):
            VolunteerPolygon("img", "v1", [[0, 0], [1, 1]])


class TestConsensus:
    def test_no_polygons_all_zero(self):
        cmap = build_consensus("img", [], viewer_count=3, width=6, height=6)
        assert cmap.tag_count.sum() == 0

    def test_two_volunteers_identical_squares(self):
        polys = [
            VolunteerPolygon("img", "a", square(1, 1, 4, 4)),
            VolunteerPolygon("img", "b", square(1, 1, 4, 4)),
        ]
        cmap = build_consensus("img", polys, viewer_count=3, width=8, height=8)
        assert cmap.tag_count[2, 2] == 2
        assert cmap.tag_count[6, 6] == 0

    def test_one_volunteer_overlapping_polygons_count_once(self):
        polys = [
            VolunteerPolygon("img", "a", square(0, 0, 4, 4)),
            VolunteerPolygon("img", "a", square(2, 2, 6, 6)),
        ]
        cmap = build_consensus("img", polys, viewer_count=3, width=8, height=8)
        assert cmap.tag_count.max() == 1

    def test_mixed_image_ids_rejected(self):
        polys = [
            VolunteerPolygon("img", "a", square(0, 0, 2, 2)),
            VolunteerPolygon("other", "b", square(0, 0, 2, 2)),
        ]
        with pytest.raises(InvalidArgumentError):
            build_consensus("img", polys, viewer_count=3, width=8, height=8)


def consensus_of(polys, viewer_count, size=12):
    return build_consensus("img", polys, viewer_count, size, size)


class TestExtractObjects:
    def test_half_rule_retains_two_of_three(self):
        polys = [VolunteerPolygon("img", v, square(1, 1, 5, 5)) for v in ("a", "b")]
        objs = extract_objects(consensus_of(polys, viewer_count=3))
        assert len(objs) == 1
        assert objs[0].supporting_volunteers == 2
        assert objs[0].verified == "unverified"

    def test_single_volunteer_region_dropped(self):
        polys = [VolunteerPolygon("img", "a", square(1, 1, 5, 5))]
        assert extract_objects(consensus_of(polys, viewer_count=3)) == []

    def test_two_of_four_retained(self):
        polys = [VolunteerPolygon("img", v, square(1, 1, 5, 5)) for v in ("a", "b")]
        objs = extract_objects(consensus_of(polys, viewer_count=4))
        assert len(objs) == 1

    def test_every_object_pixel_satisfies_half_rule(self):
        polys = [
            VolunteerPolygon("img", "a", square(0, 0, 6, 6)),
            VolunteerPolygon("img", "b", square(2, 2, 8, 8)),
            VolunteerPolygon("img", "c", square(4, 4, 10, 10)),
        ]
        cmap = consensus_of(polys, viewer_count=3)
        for obj in extract_objects(cmap):
            tags = cmap.tag_count[obj.pixels[:, 1], obj.pixels[:, 0]]
            assert np.all(2 * tags >= cmap.viewer_count)

    def test_permutation_invariance(self, rng):
        polys = [
            VolunteerPolygon("img", "a", square(0, 0, 5, 5)),
            VolunteerPolygon("img", "b", square(1, 1, 6, 6)),
            VolunteerPolygon("img", "c", square(7, 7, 11, 11)),
            VolunteerPolygon("img", "b", square(7, 7, 10, 10)),
        ]
        ref = extract_objects(consensus_of(polys, viewer_count=3))
        for _ in range(4):
            perm = [polys[i] for i in rng.permutation(len(polys))]
            got = extract_objects(consensus_of(perm, viewer_count=3))
            assert [set(map(tuple, o.pixels.tolist())) for o in got] == [
                set(map(tuple, o.pixels.tolist())) for o in ref
            ]

    @given(st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_half_ratio_invariance_under_duplication(self, seed):
        rng = np.random.default_rng(seed)
        polys = []
        for v in range(3):
            for _ in range(rng.integers(1, 3)):
                x0, y0 = rng.integers(0, 6, size=2)
                w, h = rng.integers(2, 5, size=2)
                polys.append(VolunteerPolygon("img", f"v{v}", square(x0, y0, x0 + w, y0 + h)))
        base = extract_objects(consensus_of(polys, viewer_count=4))
        doubled = polys + [
            VolunteerPolygon("img", p.volunteer_id + "_dup", p.vertices) for p in polys
        ]
        scaled = extract_objects(consensus_of(doubled, viewer_count=8))
        assert [set(map(tuple, o.pixels.tolist())) for o in base] == [
            set(map(tuple, o.pixels.tolist())) for o in scaled
        ]

    def test_viewer_count_below_three_rejected(self):
        cmap = ConsensusMap("img", np.zeros((4, 4), dtype=np.int32), viewer_count=2)
        with pytest.raises(InvalidArgumentError):
            extract_objects(cmap)


class TestVerify:
    def _objects(self):
        polys = [
            VolunteerPolygon("img", "a", square(0, 0, 3, 3)),
            VolunteerPolygon("img", "b", square(0, 0, 3, 3)),
            VolunteerPolygon("img", "a", square(6, 6, 9, 9)),
            VolunteerPolygon("img", "b", square(6, 6, 9, 9)),
        ]
        return extract_objects(consensus_of(polys, viewer_count=3))

    def test_empty_decisions_leave_unverified(self):
        objs = verify_objects(self._objects(), {})
        assert all(o.verified == "unverified" for o in objs)

    def test_confirm_all_keeps_export_count(self):
        objs = self._objects()
        confirmed = verify_objects(objs, {o.object_id: "confirmed" for o in objs})
        assert len(export_ground_truth(confirmed)) == len(objs)

    def test_reject_subtracts_from_export(self):
        objs = self._objects()
        decided = verify_objects(objs, {objs[0].object_id: "rejected"})
        assert len(export_ground_truth(decided)) == len(objs) - 1

    def test_unknown_id_not_found(self):
        with pytest.raises(NotFoundError):
            verify_objects(self._objects(), {"nope": "confirmed"})


class TestRescale:
    def test_rescale_dedupes_and_recenters(self):
        polys = [VolunteerPolygon("img", v, square(0, 0, 6, 6)) for v in ("a", "b")]
        obj = extract_objects(consensus_of(polys, viewer_count=3))[0]
        scaled = rescale_object(obj, 2)
        assert set(map(tuple, scaled.pixels.tolist())) == {(x, y) for x in range(3) for y in range(3)}
        assert scaled.centroid == (1.0, 1.0)
