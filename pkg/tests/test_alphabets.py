import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffstc import alphabets as al
from diffstc.errors import ParameterError

SPECS = ["psk2", "psk4", "psk8", "psk16", "qam16", "qam64", "qam16r", "qam8", "qam32", "omdc4", "omdc8", "mdc8",
         "dapsk8x2a2.1", "dapsk16x4a1.6", "circ8"]


@pytest.mark.parametrize("spec", SPECS)
def test_invariants(spec):
    c = al.from_spec(spec)
    assert c.size == 2 ** c.bits_per_symbol
    assert abs(c.energy() - 1) < 1e-12
    assert len(set(c.labels)) == c.size
    if c.kind is al.Kind.PSK:
        assert np.allclose(np.abs(c.points), 1, atol=1e-12)


def test_psk4():
    assert np.allclose(al.psk(4).points, [1, 1j, -1, -1j])


def test_dapsk_two_rings():
    c = al.dapsk(8, 2, 2.1)
    r = np.abs(c.points)
    assert c.size == 16 and len(np.unique(np.round(r, 9))) == 2 and abs(r.max() / r.min() - 2.1) < 1e-12


def test_dapsk_independence():
    c = al.dapsk(8, 2, 2.1)
    radii = np.round(np.abs(c.points), 9)
    phases = np.round(np.angle(c.points) % (2 * np.pi), 9)
    for r in np.unique(radii):
        assert len(np.unique(phases[radii == r])) == 8
    for p in np.unique(phases):
        assert len(np.unique(radii[phases == p])) == 2


def test_mdc_8qam_and_rotation():
    c = al.mdc_8qam_optimal()
    r = np.abs(c.points)
    assert c.size == 8 and abs(r.max() / r.min() - 1.37) < 1e-12
    q = al.build(al.Kind.ROTATED, base={"kind": "RECT_QAM", "q": 16}, theta=np.deg2rad(13.28))
    assert np.allclose(q.points, al.rect_qam(16).points * np.exp(1j * np.deg2rad(13.28)))


def test_gray_labels():
    assert al.gray_labels(4) == ["00", "01", "11", "10"]
    assert al.gray_labels(2) == ["0", "1"]
    g = al.gray_labels(8)
    for a, b in zip(g, g[1:] + g[:1]):
        assert sum(x != y for x, y in zip(a, b)) == 1


def test_circ8():
    c = al.circ8_for_ostbc()
    r = np.abs(c.points)
    assert c.size == 8 and abs(r.max() / r.min() - 1.6) < 1e-12
    inner = np.angle(c.points[r < r.mean()])
    outer = np.angle(c.points[r > r.mean()])
    # four points per ring, inner ring offset by 45 degrees from the outer ring
    assert np.allclose(np.cos(4 * (inner - outer[0])), -1, atol=1e-12)
    assert np.allclose(np.cos(4 * (outer - outer[0])), 1, atol=1e-12)


@pytest.mark.parametrize("spec", ["omdc4", "omdc8"])
def test_omdc_axes_and_radius_condition(spec):
    c = al.from_spec(spec)
    assert np.all(c.points.real * c.points.imag == 0)
    r = np.unique(np.round(np.abs(c.points), 12))
    assert abs(np.sum(r ** 2) - c.size / 2) < 1e-12


@pytest.mark.parametrize("c", [al.rotated_qam(16, al.QAM_ROTATION), al.mdc_8qam_optimal()])
def test_mdc_full_diversity_precondition(c):
    d = c.points[:, None] - c.points[None, :]
    iu = np.triu_indices(c.size, 1)
    assert np.min(np.abs(np.abs(d.real) - np.abs(d.imag))[iu]) > 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(-np.pi, np.pi, allow_nan=False), st.sampled_from(["qam16", "psk8", "circ8", "mdc8"]))
def test_rotation_preserves_geometry(theta, spec):
    c = al.from_spec(spec)
    r = al.rotate(c, theta)
    assert np.allclose(np.abs(r.points), np.abs(c.points), atol=1e-12)
    d0 = np.abs(c.points[:, None] - c.points[None])
    assert np.allclose(np.abs(r.points[:, None] - r.points[None]), d0, atol=1e-12)
    assert r.labels == c.labels


def test_index_from_bits_roundtrip():
    c = al.rect_qam(16)
    assert np.array_equal(c.index_from_bits(c.bits), np.arange(16))


def test_rect_qam_axis_gray():
    c = al.rect_qam(16)
    lr, li = c.meta["levels_re"], c.meta["levels_im"]
    for r in range(4):
        for i in range(4):
            assert np.isclose(c.points[r * 4 + i], lr[r] + 1j * li[i])


def test_errors():
    with pytest.raises(ParameterError):
        al.psk(6)
    with pytest.raises(ParameterError):
        al.dapsk(8, 2, 0.9)
    with pytest.raises(ParameterError):
        al.build("NOPE")


def test_to_json():
    import json
    d = json.loads(al.psk(4).to_json())
    assert d["kind"] == "PSK" and len(d["points"]) == 4 and d["labels"] == al.gray_labels(4)
