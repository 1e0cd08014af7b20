#include "doctest.h"

#include <nlohmann/json.hpp>

#include "core/context.hpp"
#include "core/decomposition.hpp"
#include "core/errors.hpp"
#include "core/grid.hpp"
#include "core/problems.hpp"

using namespace dds;

namespace {
CartesianGrid grid1d(index_t n) {
    const std::vector<index_t> pts{n};
    return build_grid(1, pts, 1.0 / (n + 1));
}

CartesianGrid grid2d(index_t n) {
    const std::vector<index_t> pts{n, n};
    return build_grid(2, pts, 1.0 / (n + 1));
}
} // namespace

TEST_CASE("grid indexing round trips and positions sit inside the unit domain") {
    const std::vector<index_t> pts{4, 3, 2};
    const CartesianGrid g = build_grid(3, pts, 0.2);
    CHECK(g.size() == 24);
    for (index_t k = 0; k < g.size(); ++k) CHECK(g.index(g.coord(k)) == k);
    CHECK(g.coord(5)[0] == 1);
    CHECK(g.coord(5)[1] == 1);
    CHECK(g.coord(5)[2] == 0);
    CHECK(g.position(0) == doctest::Approx(0.2));
    CHECK(g.position(3) == doctest::Approx(0.8));
}

TEST_CASE("axis split gives remainder cells to the last blocks") {
    const CartesianGrid g = grid1d(999);
    const std::vector<index_t> counts{20};
    const Decomposition d = partition_overlapping(g, counts, 4);
    REQUIRE(d.subdomain_count == 20);
    CHECK(d.nonoverlap_sets[0].size() == 49);  // 999 = 49 + 19 * 50
    for (int j = 1; j < 20; ++j) CHECK(d.nonoverlap_sets[j].size() == 50);

    // Owned sets partition the unknowns.
    std::vector<int> seen(g.size(), 0);
    for (const auto& set : d.nonoverlap_sets)
        for (index_t k : set) ++seen[k];
    for (int c : seen) CHECK(c == 1);

    // Interior blocks extend by exactly overlap_layers per side.
    CHECK(d.overlap_sets[0].front() == 0);
    CHECK(d.overlap_sets[0].back() == d.nonoverlap_sets[0].back() + 4);
    CHECK(d.overlap_sets[5].front() == d.nonoverlap_sets[5].front() - 4);
    CHECK(d.overlap_sets[5].back() == d.nonoverlap_sets[5].back() + 4);
    CHECK(d.overlap_sets[19].back() == 998);
}

TEST_CASE("partition rejects degenerate layouts") {
    const CartesianGrid g = grid1d(10);
    const std::vector<index_t> two{2};
    CHECK_THROWS_AS(partition_overlapping(g, two, 5), InvalidArgument);   // swallows a block
    const std::vector<index_t> many{11};
    CHECK_THROWS_AS(partition_overlapping(g, many, 0), InvalidArgument);  // more blocks than points
    CHECK_THROWS_AS(partition_overlapping(g, two, -1), InvalidArgument);
}

TEST_CASE("transfer operators restrict, prolongate, inject and mask consistently") {
    const CartesianGrid g = grid1d(9);
    const std::vector<index_t> counts{2};
    const Decomposition d = partition_overlapping(g, counts, 1);
    const TransferOps ops(d);

    Vector u(9);
    for (index_t i = 0; i < 9; ++i) u[i] = 10.0 + i;

    const Vector r0 = ops.restrict_to(0, u);
    REQUIRE(r0.size() == d.overlap_sets[0].size());
    for (std::size_t t = 0; t < r0.size(); ++t) CHECK(r0[t] == u[d.overlap_sets[0][t]]);

    const Vector back = ops.prolongate(0, r0);
    for (index_t k = 0; k < 9; ++k) {
        const bool inside =
            std::binary_search(d.overlap_sets[0].begin(), d.overlap_sets[0].end(), k);
        CHECK(back[k] == (inside ? u[k] : 0.0));
    }

    const Vector masked = ops.mask_exterior(0, u);
    for (index_t k = 0; k < 9; ++k) {
        const bool inside =
            std::binary_search(d.overlap_sets[0].begin(), d.overlap_sets[0].end(), k);
        CHECK(masked[k] == (inside ? 0.0 : u[k]));
    }

    // Owned injection from every subdomain rebuilds the volume vector exactly:
    // a Boolean partition of unity.
    Vector rebuilt(9, 0.0);
    for (int j = 0; j < d.subdomain_count; ++j) ops.inject_owned(j, ops.restrict_to(j, u), rebuilt);
    for (index_t k = 0; k < 9; ++k) CHECK(rebuilt[k] == u[k]);
}

TEST_CASE("toy skeleton of two overlapping intervals") {
    const CartesianGrid g = grid1d(9);
    const CsrMatrix a = assemble_poisson(g);
    const std::vector<index_t> counts{2};
    const Decomposition d = partition_overlapping(g, counts, 1);
    const Skeleton s = compute_skeleton(d, a.pattern());

    // Owned blocks are [0..3] and [4..8]; with one extension layer the blocks
    // are [0..4] and [3..8]. Rows 4 and 3 reach the exterior values 5 and 2.
    REQUIRE(s.size() == 2);
    CHECK(s.indices[0] == 2);
    CHECK(s.indices[1] == 5);
    CHECK(s.volume_to_skel[2] == 0);
    CHECK(s.volume_to_skel[5] == 1);
    CHECK(s.volume_to_skel[0] == -1);

    Vector u(9);
    for (index_t i = 0; i < 9; ++i) u[i] = 1.0 + i;
    const Vector v = s.restrict_to(u);
    CHECK(v[0] == 3.0);
    CHECK(v[1] == 6.0);
    const Vector w = s.prolongate(v);
    CHECK(w[2] == 3.0);
    CHECK(w[5] == 6.0);
    CHECK(w[0] == 0.0);
    const Vector rt = s.restrict_to(w);
    CHECK(rt[0] == 3.0);
    CHECK(rt[1] == 6.0);
}

TEST_CASE("skeleton sizes of the reference layouts") {
    SUBCASE("line of 999 points, 20 blocks, 4 layers") {
        const CartesianGrid g = grid1d(999);
        const CsrMatrix a = assemble_poisson(g);
        const std::vector<index_t> counts{20};
        const Decomposition d = partition_overlapping(g, counts, 4);
        CHECK(compute_skeleton(d, a.pattern()).size() == 38);
    }
    SUBCASE("line of 999 points, 50 blocks, 4 layers") {
        const CartesianGrid g = grid1d(999);
        const CsrMatrix a = assemble_poisson(g);
        const std::vector<index_t> counts{50};
        const Decomposition d = partition_overlapping(g, counts, 4);
        CHECK(compute_skeleton(d, a.pattern()).size() == 98);
    }
    SUBCASE("square of 83 by 83 points, 2 by 2 blocks, 4 layers") {
        const CartesianGrid g = grid2d(83);
        const CsrMatrix a = assemble_poisson(g);
        const std::vector<index_t> counts{2, 2};
        const Decomposition d = partition_overlapping(g, counts, 4);
        CHECK(compute_skeleton(d, a.pattern()).size() == 328);
    }
}

TEST_CASE("skeleton membership matches its definition exactly") {
    const CartesianGrid g = grid2d(15);
    const CsrMatrix a = assemble_poisson(g);
    const std::vector<index_t> counts{3, 2};
    const Decomposition d = partition_overlapping(g, counts, 2);
    const Skeleton s = compute_skeleton(d, a.pattern());
    const Pattern p = a.pattern();

    // Recompute from scratch: k is in the skeleton iff some subdomain has a
    // row whose stencil reaches k while k lies outside that subdomain.
    std::vector<char> expected(g.size(), 0);
    for (int j = 0; j < d.subdomain_count; ++j) {
        std::vector<char> inside(g.size(), 0);
        for (index_t k : d.overlap_sets[j]) inside[k] = 1;
        for (index_t i : d.overlap_sets[j])
            for (index_t t = p.row_ptr[i]; t < p.row_ptr[i + 1]; ++t)
                if (!inside[p.col_idx[t]]) expected[p.col_idx[t]] = 1;
    }
    std::vector<index_t> expected_indices;
    for (index_t k = 0; k < g.size(); ++k)
        if (expected[k]) expected_indices.push_back(k);
    CHECK(s.indices == expected_indices);
}

TEST_CASE("irregular set constructor validates the partition axioms") {
    const CartesianGrid g = grid1d(6);
    using Sets = std::vector<std::vector<index_t>>;
    CHECK_NOTHROW(Decomposition::from_sets(g, Sets{{0, 1, 2}, {3, 4, 5}},
                                           Sets{{0, 1, 2, 3}, {2, 3, 4, 5}}, 1));
    // Owned sets must not intersect.
    CHECK_THROWS_AS(Decomposition::from_sets(g, Sets{{0, 1, 2, 3}, {3, 4, 5}},
                                             Sets{{0, 1, 2, 3}, {2, 3, 4, 5}}, 1),
                    InvalidArgument);
    // Every unknown needs an owner.
    CHECK_THROWS_AS(Decomposition::from_sets(g, Sets{{0, 1}, {3, 4, 5}},
                                             Sets{{0, 1, 2}, {2, 3, 4, 5}}, 1),
                    InvalidArgument);
    // Owned set must sit inside its overlap set.
    CHECK_THROWS_AS(Decomposition::from_sets(g, Sets{{0, 1, 2}, {3, 4, 5}},
                                             Sets{{0, 1}, {2, 3, 4, 5}}, 1),
                    InvalidArgument);
}

TEST_CASE("decomposition summary is valid json with the layout facts") {
    const CartesianGrid g = grid1d(99);
    const CsrMatrix a = assemble_poisson(g);
    const std::vector<index_t> counts{4};
    SchwarzContext ctx = build_schwarz_context(g, counts, 2, a.pattern());
    const std::string text = decomposition_summary_json(ctx.decomposition(), ctx.skeleton);
    const nlohmann::json j = nlohmann::json::parse(text);
    CHECK(j.at("N_v").get<index_t>() == 99);
    CHECK(j.at("N").get<int>() == 4);
    CHECK(j.at("overlap_layers").get<int>() == 2);
    CHECK(j.at("N_bar").get<index_t>() == ctx.skeleton_size());
    CHECK(j.at("K").size() == static_cast<std::size_t>(ctx.skeleton_size()));
    CHECK(j.at("subdomain_sizes").size() == 4);
    CHECK(j.at("owned_sizes").size() == 4);
}
