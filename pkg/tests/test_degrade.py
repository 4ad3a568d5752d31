"""Superplaquette formation, loss percolation, restored weights."""

import itertools
import math

import numpy as np
import pytest

from toricloss.degrade import (
    LossPattern,
    apply_losses,
    bundle_weight,
    detect_loss_percolation,
    edge_flip_probability,
    form_superplaquettes,
    losses_from_uniforms,
    restored_weights,
)
from toricloss.lattice import Lattice


def no_loss(lattice):
    return LossPattern(np.zeros(lattice.n_qubits, dtype=bool), 0.0)


def lose(lattice, qubits):
    lost = np.zeros(lattice.n_qubits, dtype=bool)
    lost[list(qubits)] = True
    return LossPattern(lost, 0.0)


def test_loss_sampling():
    lat = Lattice(6)
    rng = np.random.default_rng(0)
    loss = apply_losses(lat, 0.25, rng)
    assert loss.lost.shape == (lat.n_qubits,)
    assert loss.p_loss == 0.25
    # same uniforms, nested thresholds: lower rate loses a subset
    u = np.random.default_rng(1).random(lat.n_qubits)
    lo, hi = losses_from_uniforms(u, 0.1), losses_from_uniforms(u, 0.3)
    assert not (lo.lost & ~hi.lost).any()


def test_no_loss_partition_is_identity():
    lat = Lattice(4)
    part = form_superplaquettes(lat, no_loss(lat))
    assert (part == np.arange(lat.n_plaquettes)).all()


def test_single_loss_merges_endpoints():
    lat = Lattice(4)
    q = lat.horizontal_qubit(1, 2)
    part = form_superplaquettes(lat, lose(lat, [q]))
    a, b = lat.qubit_endpoints[q]
    assert part[a] == part[b] == min(a, b)
    assert len(np.unique(part)) == lat.n_plaquettes - 1


def test_partition_merges_exactly_lost_components():
    # every lost qubit joins its endpoints; surviving qubits join nothing new
    lat = Lattice(5)
    rng = np.random.default_rng(7)
    for _ in range(20):
        loss = apply_losses(lat, 0.2, rng)
        part = form_superplaquettes(lat, loss)
        ends = lat.qubit_endpoints
        assert (part[ends[loss.lost, 0]] == part[ends[loss.lost, 1]]).all()
        # partition must be no finer than the lost-edge connectivity:
        # check via independent union-find
        parent = list(range(lat.n_plaquettes))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for q in np.flatnonzero(loss.lost):
            a, b = find(ends[q, 0]), find(ends[q, 1])
            if a != b:
                parent[max(a, b)] = min(a, b)
        ref = np.array([find(p) for p in range(lat.n_plaquettes)])
        # same partition, same smallest-member labels
        assert (part == ref).all()


def test_percolation_open_and_closed():
    lat = Lattice(6)
    assert detect_loss_percolation(lat, no_loss(lat)) == (False, False)
    all_lost = LossPattern(np.ones(lat.n_qubits, dtype=bool), 1.0)
    assert detect_loss_percolation(lat, all_lost) == (True, True)


def test_percolation_row_of_vertical_losses():
    # losing every vertical qubit in one row cuts all vertically winding
    # cycles but leaves horizontal ones intact
    lat = Lattice(5)
    qs = [lat.vertical_qubit(2, c) for c in range(lat.L)]
    assert detect_loss_percolation(lat, lose(lat, qs)) == (True, False)
    qs = [lat.horizontal_qubit(r, 3) for r in range(lat.L)]
    assert detect_loss_percolation(lat, lose(lat, qs)) == (False, True)


def test_percolation_one_gap_keeps_direction_open():
    lat = Lattice(5)
    qs = [lat.vertical_qubit(2, c) for c in range(1, lat.L)]  # column 0 survives
    assert detect_loss_percolation(lat, lose(lat, qs)) == (False, False)


def test_edge_flip_probability_brute_force():
    # parity of n independent flips, enumerated over all 2^n outcomes
    for n in range(1, 9):
        for p in (0.0, 0.04, 0.1, 0.27, 0.5):
            brute = 0.0
            for bits in itertools.product((0, 1), repeat=n):
                k = sum(bits)
                if k % 2 == 1:
                    brute += p**k * (1 - p) ** (n - k)
            assert edge_flip_probability(n, p) == pytest.approx(brute, abs=1e-12)


def test_edge_flip_probability_domain():
    with pytest.raises(ValueError):
        edge_flip_probability(0, 0.1)
    with pytest.raises(ValueError):
        edge_flip_probability(2, 0.6)
    assert edge_flip_probability(3, 0.5) == 0.5
    assert edge_flip_probability(1, 0.1) == pytest.approx(0.1)
    assert edge_flip_probability(2, 0.1) == pytest.approx(0.18)


def test_bundle_weight_values():
    assert bundle_weight(1, 0.1) == pytest.approx(math.log(9.0))
    assert bundle_weight(2, 0.1) == pytest.approx(math.log(0.82 / 0.18))
    # weight shrinks as the bundle grows: fatter superedges flip easier
    ws = [bundle_weight(n, 0.1) for n in range(1, 8)]
    assert all(a > b for a, b in zip(ws, ws[1:]))
    with pytest.raises(ValueError):
        bundle_weight(1, 0.0)


def test_restored_weights_lossless():
    lat = Lattice(4)
    deg = restored_weights(lat, no_loss(lat), 0.1)
    assert deg.n_super == lat.n_plaquettes
    assert not deg.internal.any()
    assert (deg.bundle_count == 1).all()
    assert len(deg.bundle_weight) == lat.n_qubits
    assert deg.bundle_weight == pytest.approx(np.full(lat.n_qubits, math.log(9.0)))
    assert deg.blocked == (False, False)
    for q in (0, 7, 31):
        assert deg.restored_weight(q) == pytest.approx(math.log(9.0))


def test_restored_weights_pcomp_domain():
    lat = Lattice(3)
    with pytest.raises(ValueError):
        restored_weights(lat, no_loss(lat), 0.0)
    with pytest.raises(ValueError):
        restored_weights(lat, no_loss(lat), 0.5)


def test_single_loss_bundles():
    # losing h(0,0) merges plaquettes 0 and 1; the two v-qubit pairs that
    # used to join them separately to row 1 become 2-qubit bundles only if
    # they connect the same superplaquette pair, here they do not
    lat = Lattice(4)
    q = lat.horizontal_qubit(0, 0)
    deg = restored_weights(lat, lose(lat, [q]), 0.1)
    assert deg.n_super == lat.n_plaquettes - 1
    assert deg.qubit_bundle[q] == -1
    assert not deg.internal.any()
    w1 = math.log(9.0)
    for other in range(lat.n_qubits):
        if other != q:
            assert deg.restored_weight(other) == pytest.approx(w1)


def test_parallel_bundle_weight():
    # losing both horizontal qubits between (0,0)-(0,1) and (1,0)-(1,1)
    # leaves v(0,0) and v(0,1) joining the same two superplaquettes
    lat = Lattice(4)
    deg = restored_weights(
        lat,
        lose(lat, [lat.horizontal_qubit(0, 0), lat.horizontal_qubit(1, 0)]),
        0.1,
    )
    b0 = deg.qubit_bundle[lat.vertical_qubit(0, 0)]
    b1 = deg.qubit_bundle[lat.vertical_qubit(0, 1)]
    assert b0 == b1 and b0 >= 0
    assert deg.bundle_count[b0] == 2
    assert deg.bundle_weight[b0] == pytest.approx(bundle_weight(2, 0.1))
    assert deg.bundle_rep[b0] == lat.vertical_qubit(0, 0)


def test_internal_qubits_get_zero_weight():
    # three edges of a face 4-cycle merge all four corner plaquettes, so
    # the surviving fourth edge has both endpoints inside one group
    lat = Lattice(4)
    qs = list(lat.star_qubits[5][:3])
    deg = restored_weights(lat, lose(lat, qs), 0.1)
    q4 = int(lat.star_qubits[5][3])
    assert deg.internal[q4]
    assert deg.qubit_bundle[q4] == -1
    assert deg.restored_weight(q4) == 0.0


def test_degraded_structure_random(seed=6):
    lat = Lattice(6)
    rng = np.random.default_rng(seed)
    for _ in range(15):
        loss = apply_losses(lat, 0.18, rng)
        deg = restored_weights(lat, loss, 0.08)
        # super_index is the compact relabeling of partition
        uniq = np.unique(deg.partition)
        assert deg.n_super == len(uniq)
        assert (np.bincount(deg.super_index) == deg.super_sizes).all()
        assert int(deg.super_sizes.sum()) == lat.n_plaquettes
        # bundles join distinct superplaquettes, weights match counts
        assert (deg.bundle_nodes[:, 0] != deg.bundle_nodes[:, 1]).all()
        for b in range(len(deg.bundle_count)):
            assert deg.bundle_weight[b] == pytest.approx(
                bundle_weight(int(deg.bundle_count[b]), 0.08)
            )
        # every surviving qubit is internal xor belongs to a bundle joining
        # the superplaquettes of its endpoints
        ends = lat.qubit_endpoints
        for q in range(lat.n_qubits):
            if loss.lost[q]:
                assert deg.qubit_bundle[q] == -1
                continue
            a, b = deg.super_index[ends[q, 0]], deg.super_index[ends[q, 1]]
            if a == b:
                assert deg.internal[q] and deg.qubit_bundle[q] == -1
            else:
                bid = deg.qubit_bundle[q]
                assert set(deg.bundle_nodes[bid]) == {int(a), int(b)}
        # CSR adjacency agrees with the bundle list
        for u in range(deg.n_super):
            sl = slice(deg.adj_indptr[u], deg.adj_indptr[u + 1])
            for v, bid in zip(deg.adj_indices[sl], deg.adj_bundle[sl]):
                assert set(deg.bundle_nodes[bid]) == {int(u), int(v)}


def test_super_syndrome_folding():
    lat = Lattice(4)
    q = lat.horizontal_qubit(2, 1)
    deg = restored_weights(lat, lose(lat, [q]), 0.1)
    a, b = lat.qubit_endpoints[q]
    syn = np.zeros(lat.n_plaquettes, dtype=bool)
    syn[a] = syn[b] = True  # both halves of one superplaquette: even
    assert not deg.super_syndrome(syn).any()
    syn[b] = False
    assert deg.super_syndrome(syn).sum() == 1


def test_lost_forest_spans_lost_components():
    lat = Lattice(6)
    rng = np.random.default_rng(11)
    loss = apply_losses(lat, 0.3, rng)
    deg = restored_weights(lat, loss, 0.1)
    assert not (deg.lost_forest & ~loss.lost).any()
    # forest has exactly (component size - 1) edges per merged group
    n_merged = lat.n_plaquettes - deg.n_super
    assert int(deg.lost_forest.sum()) == n_merged
