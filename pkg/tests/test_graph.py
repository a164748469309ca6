import numpy as np
import pytest

from psirank import (
    build_graph,
    generate_binary_tree,
    generate_erdos_renyi,
    generate_scale_free,
    load_edge_list,
    save_edge_list,
)
from psirank.graph import GraphError, load_id_map, save_id_map, tree_level

from conftest import TOY_EDGES, random_sparse_graph


class TestBuildGraph:
    def test_toy_adjacency(self, toy_graph):
        assert toy_graph.n_users == 4
        assert toy_graph.leaders(0).tolist() == [1, 2, 3]
        assert toy_graph.leaders(1).tolist() == [0, 3]
        assert toy_graph.leaders(2).tolist() == [0]
        assert toy_graph.leaders(3).tolist() == [1, 2]
        assert toy_graph.followers(0).tolist() == [1, 2]
        assert toy_graph.followers(1).tolist() == [0, 3]
        toy_graph.validate()

    def test_toy_normalized_leader_matrix(self, toy_graph):
        # column j of the normalized leader matrix spreads 1 over j's leaders
        W = np.zeros((4, 4))
        for j in range(4):
            lead = toy_graph.leaders(j)
            W[lead, j] = 1.0 / lead.size
        assert np.allclose(W[:, 0], [0, 1 / 3, 1 / 3, 1 / 3])
        assert np.allclose(W[:, 2], [1, 0, 0, 0])
        assert np.allclose(W.sum(axis=0), 1.0)

    def test_empty_edges(self):
        g = build_graph([], 2)
        assert g.n_edges == 0
        assert g.leaders(0).size == 0
        assert g.followers(1).size == 0

    def test_two_cycle(self):
        g = build_graph([(1, 2), (2, 1)], 3)
        assert g.leaders(1).tolist() == [2]
        assert g.followers(1).tolist() == [2]
        assert g.leaders(0).size == 0  # isolated users are allowed

    def test_duplicate_edges_deduplicated(self):
        g = build_graph([(0, 1), (0, 1), (1, 0)], 2)
        assert g.n_edges == 2

    def test_self_loop_rejected_with_pair(self):
        with pytest.raises(GraphError, match=r"\(1, 1\)"):
            build_graph([(0, 1), (1, 1)], 2)

    def test_out_of_range_rejected(self):
        with pytest.raises(GraphError, match=r"\(0, 5\)"):
            build_graph([(0, 5)], 2)

    def test_transpose_consistency_random(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            n = int(rng.integers(2, 40))
            g = random_sparse_graph(n, int(rng.integers(0, 3 * n)), rng)
            g.validate()
            assert g.leader_indices.size == g.follower_indices.size

    def test_edge_pairs_round_trip(self, toy_graph):
        rebuilt = build_graph(toy_graph.edge_pairs(), 4)
        assert rebuilt.edge_pairs().tolist() == toy_graph.edge_pairs().tolist()

    def test_subgraph(self, toy_graph):
        sub, old = toy_graph.subgraph([0, 1, 3])
        assert sub.n_users == 3
        assert old.tolist() == [0, 1, 3]
        # surviving edges: A<->B, B<->D relabelled to 0,1,2
        assert sub.leaders(0).tolist() == [1, 2]
        assert sub.leaders(2).tolist() == [1]


class TestBinaryTree:
    def test_depth_one(self):
        g = generate_binary_tree(1)
        assert g.n_users == 3
        assert g.leaders(0).tolist() == [1, 2]
        assert g.followers(0).tolist() == [1, 2]

    def test_depth_two_degrees(self):
        g = generate_binary_tree(2)
        assert g.n_users == 7
        degs = g.leader_counts()
        assert degs[0] == 2
        assert all(degs[k] == 3 for k in (1, 2))
        assert all(degs[k] == 1 for k in range(3, 7))

    def test_depth_nine_size(self):
        g = generate_binary_tree(9)
        assert g.n_users == 1023
        leaves = np.flatnonzero(g.leader_counts() == 1)
        assert leaves.size == 512
        assert (tree_level(leaves) == 9).all()

    def test_symmetry(self):
        g = generate_binary_tree(3)
        for j in range(g.n_users):
            assert g.leaders(j).tolist() == g.followers(j).tolist()

    def test_depth_zero_rejected(self):
        with pytest.raises(GraphError):
            generate_binary_tree(0)


class TestScaleFree:
    def test_determinism(self):
        g1 = generate_scale_free(500, 2.5, seed=3)
        g2 = generate_scale_free(500, 2.5, seed=3)
        assert g1.edge_pairs().tolist() == g2.edge_pairs().tolist()
        g3 = generate_scale_free(500, 2.5, seed=4)
        assert g3.edge_pairs().tolist() != g1.edge_pairs().tolist()

    def test_degenerate_size(self):
        g = generate_scale_free(2, 2.5, seed=0)
        assert g.n_users == 2
        assert g.n_edges in (0, 2)  # single possible undirected edge, or nothing

    def test_symmetric_and_clean(self):
        g = generate_scale_free(300, 2.5, seed=8)
        g.validate()
        for j in range(g.n_users):
            assert g.leaders(j).tolist() == g.followers(j).tolist()

    def test_ccdf_slope(self):
        # power-law exponent 2.5 gives a CCDF log-log slope near -1.5
        g = generate_scale_free(50_000, 2.5, seed=12)
        deg = g.leader_counts()
        deg = deg[deg > 0]
        ks = np.arange(1, 64)
        ccdf = np.array([(deg >= k).mean() for k in ks])
        slope = np.polyfit(np.log(ks), np.log(ccdf), 1)[0]
        assert abs(slope - (-1.5)) < 0.2

    def test_invalid_exponent(self):
        with pytest.raises(GraphError):
            generate_scale_free(10, 2.0, seed=0)


class TestErdosRenyi:
    def test_determinism(self):
        g1 = generate_erdos_renyi(400, 3.0, seed=5)
        g2 = generate_erdos_renyi(400, 3.0, seed=5)
        assert g1.edge_pairs().tolist() == g2.edge_pairs().tolist()

    def test_mean_degree(self):
        g = generate_erdos_renyi(50_000, 3.0, seed=1)
        mean_undirected = g.n_edges / g.n_users  # directed arcs / n == undirected mean degree
        assert abs(mean_undirected - 3.0) < 0.1

    def test_vanishing_p_empty(self):
        g = generate_erdos_renyi(1000, 1e-9, seed=2)
        assert g.n_edges == 0

    def test_symmetry(self):
        g = generate_erdos_renyi(200, 4.0, seed=9)
        g.validate()
        for j in range(g.n_users):
            assert g.leaders(j).tolist() == g.followers(j).tolist()

    def test_bad_mean_degree(self):
        with pytest.raises(GraphError):
            generate_erdos_renyi(10, 9.5, seed=0)


class TestEdgeListIO:
    def test_round_trip(self, tmp_path, toy_graph):
        path = tmp_path / "g.tsv"
        save_edge_list(toy_graph, path)
        loaded = load_edge_list(path, n_users=4)
        assert loaded.edge_pairs().tolist() == toy_graph.edge_pairs().tolist()

    def test_comments_ignored(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("# follower\tleader\n0\t1\n\n1\t0\n")
        g = load_edge_list(path)
        assert g.n_edges == 2

    def test_string_ids_via_sidecar(self, tmp_path):
        idmap = tmp_path / "ids.tsv"
        save_id_map(["alice", "bob"], idmap)
        assert load_id_map(idmap) == ["alice", "bob"]
        edges = tmp_path / "g.tsv"
        edges.write_text("alice\tbob\nbob\talice\n")
        g = load_edge_list(edges, id_map_path=idmap)
        assert g.n_users == 2
        assert g.leaders(0).tolist() == [1]
