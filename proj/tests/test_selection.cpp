#include "doctest.h"
#include "test_util.hpp"

#include "umc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace umc;
using umc::test::planted;

namespace {

Mat line(std::initializer_list<double> xs) {
    Mat m(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs) m(i++, 0) = x;
    return m;
}

// n_in tight inliers around `center` plus n_out outliers at 10x the noise scale.
SelectionConfig at(double t) {
    SelectionConfig c;
    c.threshold = t;
    return c;
}

}  // namespace

TEST_CASE("density examples") {
    auto rho = density(line({0, 1, 2, 10}), 2);
    REQUIRE(rho.size() == 4);
    CHECK(rho[0] == doctest::Approx(2.0 / 3.0));
    CHECK(rho[1] == doctest::Approx(1.0));
    CHECK(rho[2] == doctest::Approx(2.0 / 3.0));
    CHECK(rho[3] == doctest::Approx(2.0 / 17.0));

    for (double r : density(Mat::Constant(4, 3, 2.0), 2)) CHECK(r == 1.0 / kDensityEpsilon);

    Rng rng(1, "dup");
    Mat base = test::random_mat(5, 2, rng);
    Mat dup(10, 2);
    dup << base, base;
    for (double r : density(dup, 1)) CHECK(r == 1.0 / kDensityEpsilon);

    CHECK_THROWS_CODE(density(line({1}), 1), ErrorCode::ClusterTooSmall);
    // k_near clamps to n - 1.
    CHECK(density(line({0, 1, 2, 10}), 50) == density(line({0, 1, 2, 10}), 3));
}

TEST_CASE("rank_indices examples") {
    std::vector<double> rho{2.0 / 3, 1.0, 2.0 / 3, 2.0 / 17};
    CHECK(rank_indices(rho) == std::vector<std::size_t>{3, 0, 2, 1});
    CHECK(rank_indices(std::vector<double>{1, 2, 3}) == std::vector<std::size_t>{0, 1, 2});
    CHECK(rank_indices(std::vector<double>{5, 5, 5, 5}) == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("knear_candidates examples") {
    SelectionConfig cfg;
    CHECK(knear_candidates(100, cfg) == std::vector<int>{10, 12, 14, 16, 18, 20, 22, 24, 26, 28});
    for (int c : knear_candidates(5, cfg)) {
        CHECK(c >= 1);
        CHECK(c <= 4);
    }
    CHECK(knear_candidates(2, cfg) == std::vector<int>(10, 1));
}

TEST_CASE("cohesion examples") {
    CHECK(cohesion(line({0, 5})) == 10.0);
    CHECK(cohesion(Mat::Constant(4, 2, 1.0)) == 0.0);
    Mat tri(3, 2);
    tri << 0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2;
    CHECK(cohesion(tri) == doctest::Approx(3.0));
    CHECK_THROWS_CODE(cohesion(line({1})), ErrorCode::SubsetTooSmall);
}

TEST_CASE("selection_size") {
    CHECK(selection_size(100, 0.1) == 10);
    CHECK(selection_size(5, 0.1) == 1);
    CHECK(selection_size(7, 1.0) == 7);
    CHECK(selection_size(20, 0.15) == 3);
}

TEST_CASE("select_cluster tie goes to the smallest candidate") {
    // One tight group plus far points: every candidate ranks the same group on top.
    Mat pts = line({0, 0.01, 0.02, 0.03, 0.04, 50, 100, 200, 400, 800});
    Rng rng(0, "select");
    auto sel = select_cluster(pts, at(0.3), rng);
    auto cands = knear_candidates(10, at(0.3));
    CHECK(sel.k_near == cands.front());
    CHECK(sel.selected.size() == 3);
}

TEST_CASE("select_cluster with m = 1 picks the densest point") {
    Mat pts = line({0, 1, 2, 10});
    Rng rng(0, "select");
    auto sel = select_cluster(pts, at(0.1), rng);
    CHECK(sel.k_near == knear_candidates(4, at(0.1)).front());
    // k_near = 1: points 0, 1, 2 tie at density 1; the stable tail is index 2.
    CHECK(sel.selected == std::vector<std::size_t>{2});
}

TEST_CASE("select_cluster excludes planted outliers") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed, "planted");
        Mat pts = planted(Eigen::RowVectorXd::Zero(4), 50, 5, 1.0, rng);
        Rng sr(seed, "select");
        auto sel = select_cluster(pts, at(0.5), sr);
        CHECK(sel.selected.size() == 27);
        for (auto i : sel.selected) CHECK(i < 50);
    }
}

TEST_CASE("select_all at t = 1 and t -> 0") {
    Rng rng(2, "blobs");
    Mat pts = test::random_mat(40, 3, rng);
    Rng kr(2, "kmeans");
    auto state = cluster_round(pts, nullptr, 4, kr);
    Rng sr(2, "select");
    auto all = select_all(pts, state, at(1.0), sr);
    CHECK(all.selected.size() == 40);
    CHECK(all.complement.empty());

    auto tiny = select_all(pts, state, at(0.0), sr);
    std::size_t nonempty = 0;
    for (const auto& m : state.members) nonempty += !m.empty();
    CHECK(tiny.selected.size() == nonempty);
    std::set<int> clusters;
    for (auto i : tiny.selected) clusters.insert(state.assignments[i]);
    CHECK(clusters.size() == nonempty);
}

TEST_CASE("select_all outlier precision over 5 seeds") {
    double precision_sum = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed, "planted");
        Mat pts(0, 8);
        std::vector<bool> outlier;
        for (int c = 0; c < 4; ++c) {
            Eigen::RowVectorXd center(8);
            for (Eigen::Index j = 0; j < 8; ++j) center(j) = 30.0 * rng.normal();
            Mat block = planted(center, 50, 5, 1.0, rng);
            Mat grown(pts.rows() + block.rows(), 8);
            grown << pts, block;
            pts = grown;
            for (int i = 0; i < 55; ++i) outlier.push_back(i >= 50);
        }
        Rng kr(seed, "kmeans");
        auto state = cluster_round(pts, nullptr, 4, kr);
        Rng sr(seed, "select");
        auto res = select_all(pts, state, at(0.5), sr);
        std::size_t inliers = 0;
        for (auto i : res.selected) inliers += !outlier[i];
        precision_sum += static_cast<double>(inliers) / static_cast<double>(res.selected.size());
    }
    CHECK(precision_sum / 5.0 >= 0.9);
}

TEST_CASE("select_all invariants") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed, "inv");
        std::size_t n = 5 + rng.index(60);
        int k = 1 + static_cast<int>(rng.index(5));
        Mat pts = test::random_mat(static_cast<Eigen::Index>(n), 3, rng);
        Rng kr(seed, "kmeans");
        auto state = cluster_round(pts, nullptr, k, kr);
        double t = rng.uniform();
        auto cfg = at(t);
        if (seed % 3 == 1) cfg.mode = SelectionMode::Random;
        if (seed % 3 == 2) cfg.mode = SelectionMode::Fixed;
        Rng sr(seed, "select");
        auto res = select_all(pts, state, cfg, sr);

        std::vector<std::size_t> both = res.selected;
        both.insert(both.end(), res.complement.begin(), res.complement.end());
        std::sort(both.begin(), both.end());
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        CHECK(both == all);

        std::size_t expected = 0;
        for (const auto& m : state.members) {
            expected += m.size() < 2 ? m.size() : selection_size(m.size(), t);
        }
        CHECK(res.selected.size() == expected);

        for (std::size_t c = 0; c < state.members.size(); ++c) {
            const auto& m = state.members[c];
            std::size_t in_cluster = 0;
            for (auto i : res.selected) in_cluster += state.assignments[i] == static_cast<int>(c);
            CHECK(in_cluster == (m.size() < 2 ? m.size() : selection_size(m.size(), t)));
        }
    }
}

TEST_CASE("density ranking is translation and scale invariant") {
    Rng rng(8, "inv");
    for (int trial = 0; trial < 30; ++trial) {
        Mat pts = test::random_mat(20, 3, rng);
        int k = 1 + static_cast<int>(rng.index(10));
        auto rho = density(pts, k);
        Eigen::RowVectorXd shift(3);
        shift << rng.normal() * 10, rng.normal() * 10, rng.normal() * 10;
        Mat moved = pts.rowwise() + shift;
        double s = std::exp(rng.uniform(-2, 2));
        auto rho_moved = density(moved, k);
        auto rho_scaled = density(pts * s, k);
        for (std::size_t i = 0; i < rho.size(); ++i) {
            CHECK(rho_moved[i] == doctest::Approx(rho[i]).epsilon(1e-9));
            CHECK(rho_scaled[i] == doctest::Approx(rho[i] / s).epsilon(1e-9));
        }
        CHECK(rank_indices(rho) == rank_indices(density(pts * 2.0, k)));
    }
}

TEST_CASE("density follows points under relabeling") {
    Rng rng(9, "perm");
    Mat pts = test::random_mat(15, 2, rng);
    std::vector<Eigen::Index> perm(15);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Mat permuted(15, 2);
    for (Eigen::Index i = 0; i < 15; ++i) permuted.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);
    auto rho = density(pts, 4);
    auto rho_p = density(permuted, 4);
    for (std::size_t i = 0; i < 15; ++i) CHECK(rho_p[i] == doctest::Approx(rho[static_cast<std::size_t>(perm[i])]));
}

TEST_CASE("cohesion objective switch") {
    Rng rng(10, "obj");
    Mat pts = planted(Eigen::RowVectorXd::Zero(3), 40, 0, 1.0, rng);
    auto max_cfg = at(0.5);
    auto min_cfg = at(0.5);
    min_cfg.objective = CohesionObjective::Min;
    Rng r1(0, "select"), r2(0, "select");
    auto a = select_cluster(pts, max_cfg, r1);
    auto b = select_cluster(pts, min_cfg, r2);
    auto best_max = std::max_element(a.candidate_scores.begin(), a.candidate_scores.end());
    auto best_min = std::min_element(b.candidate_scores.begin(), b.candidate_scores.end());
    auto cands = knear_candidates(40, max_cfg);
    CHECK(a.k_near == cands[static_cast<std::size_t>(best_max - a.candidate_scores.begin())]);
    CHECK(b.k_near == cands[static_cast<std::size_t>(best_min - b.candidate_scores.begin())]);
}

TEST_CASE("selection config validation") {
    SelectionConfig cfg;
    cfg.candidates = 0;
    CHECK_THROWS_CODE(cfg.validate(), ErrorCode::BadConfig);
    cfg = SelectionConfig{};
    cfg.lower = 0.9;  // 0.9 + 0.02 * 9 > 1
    CHECK_THROWS_CODE(cfg.validate(), ErrorCode::BadConfig);
    cfg = SelectionConfig{};
    cfg.interval = 0;
    CHECK_THROWS_CODE(cfg.validate(), ErrorCode::BadConfig);
}
