#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dopplerkit/errors.hpp"
#include "dopplerkit/metrics.hpp"
#include "dopplerkit/rng.hpp"

using namespace dopplerkit;

namespace {

SegMask mask_rect(int rows, int cols, int r0, int r1, int c0, int c1, std::uint8_t cls) {
    SegMask m = make_mask(rows, cols);
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) m.at(r, c) = cls;
    return m;
}

}  // namespace

TEST_CASE("dsc/iou: equality, disjointness, half overlap, both-empty convention") {
    SegMask a = mask_rect(20, 20, 0, 10, 0, 10, 1);
    CHECK(dsc(a, a, 1) == 1.0);
    CHECK(iou(a, a, 1) == 1.0);

    SegMask b = mask_rect(20, 20, 10, 20, 10, 20, 1);
    CHECK(dsc(a, b, 1) == 0.0);
    CHECK(iou(a, b, 1) == 0.0);

    // |P| = |G| = 100, |P and G| = 50
    SegMask p = mask_rect(20, 20, 0, 10, 0, 10, 1);
    SegMask g = mask_rect(20, 20, 0, 10, 5, 15, 1);
    CHECK(dsc(p, g, 1) == 0.5);
    CHECK(iou(p, g, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    SegMask e1 = make_mask(4, 4), e2 = make_mask(4, 4);
    CHECK(dsc(e1, e2, 2) == 1.0);
    CHECK(iou(e1, e2, 2) == 1.0);

    SegMask small = make_mask(3, 3);
    CHECK_THROWS_AS(dsc(small, e1, 1), DimensionError);
}

TEST_CASE("property: DSC == 2*IoU / (1 + IoU) on random mask pairs") {
    Rng rng(70);
    for (int trial = 0; trial < 25; ++trial) {
        SegMask p = make_mask(16, 16), g = make_mask(16, 16);
        for (std::size_t i = 0; i < p.labels.size(); ++i) {
            p.labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
            g.labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
        }
        for (int cls = 0; cls < 3; ++cls) {
            const double d = dsc(p, g, cls), i = iou(p, g, cls);
            CHECK(std::abs(d - 2.0 * i / (1.0 + i)) < 1e-12);
        }
    }
}

TEST_CASE("match_beats: identical lists, empty predictions, sub-threshold IoU") {
    const std::vector<Beat> gt = {{0, 99, FlowDirection::forward}, {120, 199, FlowDirection::forward}};
    const auto all = match_beats(gt, gt);
    CHECK(all.size() == 2);
    CHECK(match_beats({}, gt).empty());

    // IoU of (0..99) vs (50..149) = 50/150 < 0.5
    const std::vector<Beat> pred = {{50, 149, FlowDirection::forward}};
    const std::vector<Beat> gt1 = {{0, 99, FlowDirection::forward}};
    CHECK(beat_interval_iou(pred[0], gt1[0]) == doctest::Approx(1.0 / 3.0));
    CHECK(match_beats(pred, gt1).empty());

    // direction mismatch never matches
    const std::vector<Beat> rev = {{0, 99, FlowDirection::reverse}};
    CHECK(match_beats(rev, gt1).empty());
}

TEST_CASE("match_beats: greedy by descending IoU, one-to-one, cardinality-symmetric") {
    const std::vector<Beat> gt = {{0, 99, FlowDirection::forward}, {90, 189, FlowDirection::forward}};
    const std::vector<Beat> pred = {{5, 104, FlowDirection::forward}, {95, 194, FlowDirection::forward}};
    const auto m = match_beats(pred, gt);
    REQUIRE(m.size() == 2);
    CHECK(m[0].gt_index != m[1].gt_index);
    CHECK(m[0].pred_index != m[1].pred_index);

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Beat> a, b;
        int col = 0;
        for (int i = 0; i < 5; ++i) {
            const int w = 20 + static_cast<int>(rng.uniform_int(0, 30));
            a.push_back({col, col + w, FlowDirection::forward});
            const int jitter = static_cast<int>(rng.uniform_int(-8, 8));
            b.push_back({col + jitter, col + w + jitter, FlowDirection::forward});
            col += w + 30;
        }
        CHECK(match_beats(a, b).size() == match_beats(b, a).size());
    }
}

TEST_CASE("pcc: affine relations, hand-computed value, undefined cases") {
    const std::vector<double> xs = {1, 2, 3, 4};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(2.0 * x + 3.0);
    CHECK(pcc(xs, ys) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> neg;
    for (double x : xs) neg.push_back(-x);
    CHECK(pcc(xs, neg) == doctest::Approx(-1.0).epsilon(1e-12));

    CHECK(pcc({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-12));

    CHECK_THROWS_AS(pcc({1.0, 1.0, 1.0}, {1, 2, 3}), ContractError);
    CHECK_THROWS_AS(pcc({1.0}, {2.0}), ContractError);
    CHECK_THROWS_AS(pcc({1.0, 2.0}, {1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("property: pcc invariant under positive scaling, sign flip under negative") {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> xs, ys;
        for (int i = 0; i < 12; ++i) {
            xs.push_back(rng.uniform(-3, 3));
            ys.push_back(rng.uniform(-3, 3));
        }
        const double base = pcc(xs, ys);
        std::vector<double> scaled, flipped;
        for (double x : xs) {
            scaled.push_back(2.75 * x + 1.5);
            flipped.push_back(-0.5 * x + 4.0);
        }
        CHECK(pcc(scaled, ys) == doctest::Approx(base).epsilon(1e-9));
        CHECK(pcc(flipped, ys) == doctest::Approx(-base).epsilon(1e-9));
    }
}

TEST_CASE("tdr_measure: ratios and the undefined case") {
    CHECK(tdr_measure(5, 5) == 1.0);
    CHECK(tdr_measure(0, 5) == 0.0);
    CHECK(tdr_measure(7, 10) == doctest::Approx(0.7));
    CHECK_THROWS_AS(tdr_measure(1, 0), ContractError);
}

TEST_CASE("tdr_ed: perfect match, boundary exclusion, distance threshold") {
    CHECK(tdr_ed({0.5, 1.0, 1.5}, {0.5, 1.0, 1.5}, 0.08, 2.0) == 1.0);

    // a GT event 50 ms from the record start leaves the denominator
    CHECK(tdr_ed({0.05, 1.0}, {0.05, 1.0}, 0.08, 2.0) == 1.0);
    CHECK(tdr_ed({1.0}, {0.05, 1.0}, 0.08, 2.0) == 1.0);
    CHECK_THROWS_AS(tdr_ed({0.5}, {0.05, 1.95}, 0.08, 2.0), ContractError);

    // gt (0.5, 1.3), pred (0.55, 1.45): the second prediction misses at lambda 0.08
    CHECK(tdr_ed({0.55, 1.45}, {0.5, 1.3}, 0.08, 2.0) == 0.5);

    // one prediction cannot satisfy two GT events
    CHECK(tdr_ed({1.0}, {0.98, 1.02}, 0.08, 2.0) == 0.5);
    CHECK_THROWS_AS(tdr_ed({1.0}, {1.0}, 0.0, 2.0), ConfigError);
}

TEST_CASE("sweep_lambda: non-decreasing, saturates, equals pointwise re-evaluation") {
    Rng rng(14);
    std::vector<double> gt, pred;
    for (int i = 0; i < 8; ++i) {
        const double t = 0.3 + 0.45 * i;
        gt.push_back(t);
        pred.push_back(t + rng.uniform(-0.15, 0.15));
    }
    const double record = 4.5;
    std::vector<double> grid;
    for (int i = 1; i <= 20; ++i) grid.push_back(0.01 * i);
    const auto curve = sweep_lambda(pred, gt, grid, record);
    REQUIRE(curve.size() == grid.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].first == grid[i]);
        CHECK(curve[i].second == tdr_ed(pred, gt, grid[i], record));
        if (i) CHECK(curve[i].second >= curve[i - 1].second);
    }
    // lambda >= record length saturates at full detection here
    CHECK(tdr_ed(pred, gt, record, record) == 1.0);
    CHECK_THROWS_AS(sweep_lambda(pred, gt, {0.2, 0.1}, record), ConfigError);
}

TEST_CASE("mc_split: exact 80/10/10 and remainder-to-train slicing") {
    std::vector<int> ids(100);
    for (int i = 0; i < 100; ++i) ids[static_cast<std::size_t>(i)] = i;
    const SplitPlan plan = mc_split(ids, {0.8, 0.1, 0.1}, 5, 7);
    REQUIRE(plan.repeats.size() == 5);
    for (const SplitRepeat& r : plan.repeats) {
        CHECK(r.train.size() == 80);
        CHECK(r.val.size() == 10);
        CHECK(r.test.size() == 10);
    }

    std::vector<int> odd(97);
    for (int i = 0; i < 97; ++i) odd[static_cast<std::size_t>(i)] = i;
    const SplitPlan podd = mc_split(odd, {0.8, 0.1, 0.1}, 1, 7);
    CHECK(podd.repeats[0].train.size() == 79);
    CHECK(podd.repeats[0].val.size() == 9);
    CHECK(podd.repeats[0].test.size() == 9);
}

TEST_CASE("mc_split: deterministic, partitions exactly, validates input") {
    std::vector<int> ids(40);
    for (int i = 0; i < 40; ++i) ids[static_cast<std::size_t>(i)] = 100 + i;
    const SplitPlan a = mc_split(ids, {0.8, 0.1, 0.1}, 5, 99);
    const SplitPlan b = mc_split(ids, {0.8, 0.1, 0.1}, 5, 99);
    for (int r = 0; r < 5; ++r) {
        CHECK(a.repeats[r].train == b.repeats[r].train);
        CHECK(a.repeats[r].val == b.repeats[r].val);
        CHECK(a.repeats[r].test == b.repeats[r].test);

        std::set<int> seen;
        for (int id : a.repeats[r].train) seen.insert(id);
        for (int id : a.repeats[r].val) seen.insert(id);
        for (int id : a.repeats[r].test) seen.insert(id);
        CHECK(seen.size() == ids.size());
        CHECK(seen == std::set<int>(ids.begin(), ids.end()));
    }
    // repeats shuffle differently
    CHECK(a.repeats[0].test != a.repeats[1].test);

    CHECK_THROWS_AS(mc_split(ids, {0.7, 0.1, 0.1}, 5, 0), ConfigError);
    CHECK_THROWS_AS(mc_split({1, 2}, {0.8, 0.1, 0.1}, 1, 0), ConfigError);
}
