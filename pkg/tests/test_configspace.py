import numpy as np
import pytest

from qlmsim import (
    Configuration,
    all_moves,
    apply_move,
    build_lattice,
    diagonal_string_path,
    enumerate_sector,
    gauss_residuals,
    initial_string_state,
    load_sector,
    save_sector,
)
from qlmsim.configspace import (
    SectorCapExceeded,
    SectorFileError,
    plaquette_move,
)

import oracles


def test_initial_string_54(geom54):
    config, charges = initial_string_state(geom54, "diagonal")
    assert bin(config.bits).count("1") == 7  # Manhattan distance between corners
    assert config.bits & ((1 << geom54.n_sites) - 1) == 0  # no matter
    path = diagonal_string_path(geom54)
    assert len(path) == 7


def test_initial_string_22(geom22):
    config, _ = initial_string_state(geom22, "diagonal")
    assert bin(config.bits).count("1") == 1


def test_initial_string_path_validation(geom54):
    path = diagonal_string_path(geom54)
    with pytest.raises(ValueError):
        initial_string_state(geom54, path[:-1])  # endpoint not at static site
    with pytest.raises(ValueError):
        # disconnected: replace an interior link by a far-away one
        bad = path[:3] + [geom54.link_index((0, 2), "x")] + path[4:]
        initial_string_state(geom54, bad)


def test_gauss_all_zero_22(geom22):
    zero = Configuration(0, geom22.qubit_count)
    g1 = gauss_residuals(geom22, zero)
    g2 = gauss_residuals(geom22, zero)
    assert g1 == g2
    # corners of the all-up 2x2 configuration carry +-1 divergence
    assert g1.values == (-1.0, 0.0, 0.0, 1.0)


def test_gauss_single_flip_locality(geom43, rng):
    width = geom43.qubit_count
    for _ in range(25):
        bits = int(rng.integers(0, 1 << width))
        c = Configuration(bits, width)
        link_qubit = int(rng.integers(geom43.n_sites, width))
        flipped = c.flip(link_qubit)
        ga = np.array(gauss_residuals(geom43, c).values)
        gb = np.array(gauss_residuals(geom43, flipped).values)
        diff = gb - ga
        a, b, _ = geom43.link_endpoints(link_qubit)
        ia, ib = geom43.matter_index(a), geom43.matter_index(b)
        assert abs(diff[ia]) == 1.0 and abs(diff[ib]) == 1.0
        assert diff[ia] == -diff[ib]
        others = np.delete(diff, [ia, ib])
        assert np.all(others == 0.0)


def test_apply_plaquette_move(geom22):
    mv = plaquette_move(geom22, 0)
    c = Configuration(mv.val_a, geom22.qubit_count)
    out = apply_move(geom22, c, mv)
    assert out is not None and out.bits == mv.val_b
    # all four link bits flipped
    assert bin(c.bits ^ out.bits).count("1") == 4
    # all-links-equal configurations are annihilated
    for bits in (0, mv.flip):
        assert apply_move(geom22, Configuration(bits, 8), mv) is None


def test_hopping_involution(geom43, rng):
    moves = all_moves(geom43, families=("hopping",))
    width = geom43.qubit_count
    hits = 0
    for _ in range(200):
        bits = int(rng.integers(0, 1 << width))
        mv = moves[int(rng.integers(len(moves)))]
        c = Configuration(bits, width)
        out = apply_move(geom43, c, mv)
        if out is not None:
            hits += 1
            back = apply_move(geom43, out, mv)
            assert back is not None and back.bits == bits
    assert hits > 0


def test_sector_54_dimension(geom54, sector54):
    assert sector54.dim == 636487


def test_sector_empty_moves(geom43):
    seed, _ = initial_string_state(geom43, "diagonal")
    basis = enumerate_sector(geom43, seed, moves=frozenset())
    assert basis.dim == 1
    assert basis.states[0] == seed.bits


def test_sector_43_vs_independent_bfs(geom43):
    seed, _ = initial_string_state(geom43, "diagonal")
    mine = enumerate_sector(geom43, seed, moves={"hopping"})
    ref = oracles.bfs_closure(4, 3, seed.bits, families=("hopping",))
    assert mine.dim == len(ref)
    assert np.array_equal(mine.states, np.array(ref, dtype=np.uint64))
    full = enumerate_sector(geom43, seed)
    ref_full = oracles.bfs_closure(4, 3, seed.bits)
    assert np.array_equal(full.states, np.array(ref_full, dtype=np.uint64))


def test_sector_closure_and_gauss_exhaustive_43(geom43, sector43):
    moves = all_moves(geom43)
    states = sector43.states
    for mv in moves:
        for val in (np.uint64(mv.val_a), np.uint64(mv.val_b)):
            sel = states[(states & np.uint64(mv.mask)) == val]
            targets = sel ^ np.uint64(mv.flip)
            assert np.all(sector43.lookup_many(targets) >= 0)
    seed_charges = gauss_residuals(geom43, Configuration(int(sector43.seed), 29))
    for bits in states[:: max(1, states.size // 500)]:
        assert gauss_residuals(geom43, Configuration(int(bits), 29)) == seed_charges


def test_sector_gauss_sampled_54(geom54, sector54, rng):
    seed_charges = gauss_residuals(geom54, Configuration(int(sector54.seed), 51))
    idx = rng.choice(sector54.dim, size=300, replace=False)
    for i in idx:
        c = Configuration(int(sector54.states[i]), 51)
        assert gauss_residuals(geom54, c) == seed_charges


def test_sector_closure_sampled_54(geom54, sector54, rng):
    moves = all_moves(geom54)
    idx = rng.choice(sector54.dim, size=10_000, replace=False)
    states = sector54.states[idx]
    for mv in moves:
        for val in (np.uint64(mv.val_a), np.uint64(mv.val_b)):
            sel = states[(states & np.uint64(mv.mask)) == val]
            if sel.size:
                assert np.all(sector54.lookup_many(sel ^ np.uint64(mv.flip)) >= 0)


def test_sector_monotone_in_moves(geom43):
    seed, _ = initial_string_state(geom43, "diagonal")
    hop = enumerate_sector(geom43, seed, moves={"hopping"})
    both = enumerate_sector(geom43, seed)
    assert both.dim >= hop.dim
    assert np.all(both.lookup_many(hop.states) >= 0)


def test_sector_determinism(geom43):
    seed, _ = initial_string_state(geom43, "diagonal")
    a = enumerate_sector(geom43, seed)
    b = enumerate_sector(geom43, seed)
    assert np.array_equal(a.states, b.states)
    assert np.all(np.diff(a.states.astype(np.int64)) > 0)  # strictly sorted


def test_sector_cap(geom54):
    seed, _ = initial_string_state(geom54, "diagonal")
    with pytest.raises(SectorCapExceeded):
        enumerate_sector(geom54, seed, cap=1000)


def test_sector_index_lookup(sector43):
    for i in (0, 1, sector43.dim - 1):
        assert sector43.index_of(int(sector43.states[i])) == i
    with pytest.raises(KeyError):
        sector43.index_of((1 << 29) - 1)


def test_sector_file_round_trip(tmp_path, geom43, sector43):
    p = tmp_path / "sector.qlmsec"
    save_sector(sector43, p)
    loaded = load_sector(p, geom43)
    assert np.array_equal(loaded.states, sector43.states)
    assert loaded.moves == sector43.moves
    # byte-identical re-serialization
    p2 = tmp_path / "again.qlmsec"
    save_sector(loaded, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_sector_file_one_record(tmp_path, geom43):
    seed, _ = initial_string_state(geom43, "diagonal")
    basis = enumerate_sector(geom43, seed, moves=frozenset())
    p = tmp_path / "one.qlmsec"
    save_sector(basis, p)
    assert p.stat().st_size == 8 + 24 + 8
    assert load_sector(p, geom43).dim == 1


def test_sector_file_errors(tmp_path, geom43, geom54, sector43):
    p = tmp_path / "sector.qlmsec"
    save_sector(sector43, p)
    with pytest.raises(SectorFileError):
        load_sector(p, geom54)  # wrong geometry hash
    raw = p.read_bytes()
    (tmp_path / "trunc.qlmsec").write_bytes(raw[:-5])
    with pytest.raises(SectorFileError):
        load_sector(tmp_path / "trunc.qlmsec", geom43)
    (tmp_path / "magic.qlmsec").write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(SectorFileError):
        load_sector(tmp_path / "magic.qlmsec", geom43)
