import json

import numpy as np
import pytest
import scipy.sparse as sp

from mdprec.probgen import GenConfig, generate, load_system, save_system
from mdprec.sparse import transpose


def tf_case(**kw):
    base = dict(solid_grid=(10, 10, 10), dofs_per_node=1, fiber_count=20,
                elements_per_fiber=1, beam_modulus=10.0, penalty_pos=10.0, seed=7)
    base.update(kw)
    return GenConfig(**base)


def test_structural_counts_one_element_fibers():
    system, meta = generate(tf_case(solid_grid=(20, 20, 20), fiber_count=50))
    assert system.n_beam == 50 * 12
    assert system.a.nnz == 50 * 144  # dense 12x12 blocks
    assert meta.n_beam_dofs == system.n_beam
    assert meta.n_solid_dofs == system.n_solid
    # per-fiber block boundaries stride 12
    assert np.array_equal(np.diff(system.beam_block_boundaries), np.full(50, 12))


def test_beam_block_spd_tf():
    system, _ = generate(tf_case())
    a = system.a.toarray()
    assert np.abs(a - a.T).max() == 0.0
    ev = np.linalg.eigvalsh(a)
    assert ev[0] > 0.0
    # element spectrum scaled by the fiber modulus
    assert ev[0] >= 0.05 * 10.0


def test_offdiagonal_symmetry_tf():
    system, _ = generate(tf_case())
    diff = system.b1t - transpose(system.b2)
    assert (abs(diff).max() if diff.nnz else 0.0) <= 1e-14


def test_skew_flag_breaks_symmetry():
    system, _ = generate(tf_case(dofs_per_beam_node=9, skew=0.2))
    asym = system.a - transpose(system.a)
    assert abs(asym).max() > 1e-8


def test_rotational_coupling_breaks_offdiag_symmetry():
    system, _ = generate(tf_case(dofs_per_beam_node=9, penalty_rot=2.0))
    diff = system.b1t - transpose(system.b2)
    assert abs(diff).max() > 1e-10
    plain, _ = generate(tf_case(dofs_per_beam_node=9, penalty_rot=0.0))
    assert system.b1t.nnz > plain.b1t.nnz  # extra coupling rows


def test_zero_penalty_decouples():
    system, _ = generate(tf_case(penalty_pos=0.0))
    assert system.b1t.nnz == 0 and system.b2.nnz == 0


def test_no_fibers_reduces_to_solid():
    system, _ = generate(tf_case(fiber_count=0))
    assert system.n_beam == 0 and system.a.nnz == 0
    assert system.c.nnz > 0
    assert np.array_equal(system.beam_block_boundaries, [0])
    mono = system.monolithic()
    assert mono.shape == (system.n_solid, system.n_solid)
    assert mono.nnz == system.c.nnz


def test_monolithic_assembly_matches_block_apply():
    for seed in (0, 1, 2):
        system, _ = generate(tf_case(seed=seed, solid_grid=(8, 8, 8)))
        assert system.n_beam + system.n_solid <= 5000
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(system.n_beam + system.n_solid)
        y_b, y_s = system.apply(*system.split(x))
        mono = system.monolithic() @ x
        err = np.abs(np.concatenate([y_b, y_s]) - mono).max()
        assert err <= 1e-14 * max(1.0, np.abs(mono).max())


def test_determinism_bitwise():
    s1, _ = generate(tf_case())
    s2, _ = generate(tf_case())
    for m1, m2 in ((s1.a, s2.a), (s1.b1t, s2.b1t), (s1.b2, s2.b2), (s1.c, s2.c)):
        assert np.array_equal(m1.data, m2.data)
        assert np.array_equal(m1.indices, m2.indices)
    assert np.array_equal(s1.rhs_solid, s2.rhs_solid)
    s3, _ = generate(tf_case(seed=8))
    assert not np.array_equal(s1.a.data, s3.a.data)


def test_elements_random_draws_between_one_and_k():
    system, meta = generate(tf_case(fiber_count=30, elements_per_fiber=4,
                                    elements_random=True))
    counts = [f["elements"] for f in meta.fibers]
    assert min(counts) >= 1 and max(counts) <= 4
    assert len(set(counts)) > 1


def test_fibers_inside_unit_cube():
    _, meta = generate(tf_case(fiber_count=40, fiber_length=0.4, seed=3))
    for f in meta.fibers:
        for p in (f["start"], f["end"]):
            assert all(0.0 <= v <= 1.0 for v in p)
        length = np.linalg.norm(np.array(f["end"]) - np.array(f["start"]))
        assert length == pytest.approx(0.4, rel=1e-12)


def test_rhs_on_loaded_face_only():
    system, _ = generate(tf_case(solid_grid=(6, 6, 6)))
    assert not system.rhs_beam.any()
    assert system.rhs_solid.max() == 1.0
    loaded = int(system.rhs_solid.sum())
    assert loaded == 7 * 7  # one dof per top-face node


def test_save_load_roundtrip_bitwise(tmp_path):
    system, meta = generate(tf_case())
    out = tmp_path / "sys"
    files = save_system(system, out, meta)
    assert files == ["a.mtx", "b1t.mtx", "b2.mtx", "c.mtx", "meta.json", "rhs.vec"]
    loaded, doc = load_system(out)
    for m1, m2 in ((system.a, loaded.a), (system.b1t, loaded.b1t),
                   (system.b2, loaded.b2), (system.c, loaded.c)):
        assert np.array_equal(m1.data, m2.data)
        assert np.array_equal(m1.indices, m2.indices)
        assert np.array_equal(m1.indptr, m2.indptr)
    assert np.array_equal(system.rhs_beam, loaded.rhs_beam)
    assert np.array_equal(system.rhs_solid, loaded.rhs_solid)
    assert doc["rhs_missing"] is False


def test_meta_json_schema_and_counts(tmp_path):
    system, meta = generate(tf_case(fiber_count=5))
    out = tmp_path / "sys"
    save_system(system, out, meta)
    doc = json.loads((out / "meta.json").read_text())
    assert set(doc) >= {"version", "sizes", "beam_block_boundaries", "fibers",
                        "gen_config", "nnz"}
    assert doc["sizes"] == {"beam": system.n_beam, "solid": system.n_solid}
    assert doc["nnz"]["a"] == system.a.nnz
    assert doc["nnz"]["c"] == system.c.nnz
    assert len(doc["fibers"]) == 5
    assert doc["gen_config"]["fiber_count"] == 5


def test_load_missing_rhs_defaults_zero(tmp_path):
    system, meta = generate(tf_case(fiber_count=3, solid_grid=(4, 4, 4)))
    out = tmp_path / "sys"
    save_system(system, out, meta)
    (out / "rhs.vec").unlink()
    loaded, doc = load_system(out)
    assert doc["rhs_missing"] is True
    assert not loaded.rhs_beam.any() and not loaded.rhs_solid.any()


def test_load_rejects_boundary_violation(tmp_path):
    system, meta = generate(tf_case(fiber_count=3, solid_grid=(4, 4, 4)))
    out = tmp_path / "sys"
    save_system(system, out, meta)
    doc = json.loads((out / "meta.json").read_text())
    doc["beam_block_boundaries"] = [0, 6, system.n_beam]  # splits a dense block
    (out / "meta.json").write_text(json.dumps(doc))
    with pytest.raises(ValueError, match=r"\(.*\) crosses"):
        load_system(out)


def test_empty_beam_block_roundtrip(tmp_path):
    system, meta = generate(tf_case(fiber_count=0, solid_grid=(4, 4, 4)))
    out = tmp_path / "sys"
    save_system(system, out, meta)
    loaded, _ = load_system(out)
    assert loaded.n_beam == 0
    assert loaded.c.nnz == system.c.nnz


def test_config_validation():
    with pytest.raises(ValueError):
        GenConfig(dofs_per_node=2)
    with pytest.raises(ValueError):
        GenConfig(fiber_length=1.5)
    with pytest.raises(ValueError):
        GenConfig(dofs_per_beam_node=7)
    with pytest.raises(ValueError):
        GenConfig(solid_modulus=0.0)


def test_dofs_per_node_three():
    system, _ = generate(tf_case(dofs_per_node=3, solid_grid=(4, 4, 4), fiber_count=4))
    assert system.n_solid % 3 == 0
    a = system.monolithic()
    asym = a - transpose(a)
    assert (abs(asym).max() if asym.nnz else 0.0) <= 1e-13
