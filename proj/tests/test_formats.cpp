#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "dopplerkit/dataset.hpp"
#include "dopplerkit/errors.hpp"
#include "dopplerkit/json_conv.hpp"
#include "dopplerkit/pgm.hpp"
#include "dopplerkit/rng.hpp"
#include "dopplerkit/textio.hpp"

using namespace dopplerkit;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<SynthCase> sample_cases(int n, std::uint64_t seed) {
    DatasetConfig d;
    d.n_cases = n;
    d.rows = 32;
    d.cols = 64;
    d.seed = seed;
    return make_dataset(d);
}

}  // namespace

TEST_CASE("pgm: canonical encode/decode round trips byte-exactly") {
    Rng rng(6);
    PgmImage img;
    img.rows = 13;
    img.cols = 29;
    img.pixels.resize(13 * 29);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));

    const auto bytes = encode_pgm(img);
    const PgmImage back = decode_pgm(bytes);
    CHECK(back == img);
    CHECK(encode_pgm(back) == bytes);
}

TEST_CASE("pgm: reader accepts comments, rejects malformed input") {
    const std::string with_comment = "P5\n# a comment\n2 2\n255\nABCD";
    const PgmImage img = decode_pgm(std::vector<std::uint8_t>(with_comment.begin(), with_comment.end()));
    CHECK(img.rows == 2);
    CHECK(img.cols == 2);
    CHECK(img.pixels == std::vector<std::uint8_t>{'A', 'B', 'C', 'D'});

    for (const std::string bad : {std::string("P6\n2 2\n255\nABCD"), std::string("P5\n2 2\n70000\nABCD"),
                                  std::string("P5\n2 2\n255\nAB"), std::string("P5\nx 2\n255\nABCD"),
                                  std::string("P5\n2 2\n255")}) {
        CHECK_THROWS_AS(decode_pgm(std::vector<std::uint8_t>(bad.begin(), bad.end())), DataError);
    }
}

TEST_CASE("pgm: file write/read round trip") {
    const auto dir = fresh_dir("dopplerkit_pgm_test");
    PgmImage img;
    img.rows = 8;
    img.cols = 5;
    img.pixels.assign(40, 0);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i % 3);
    write_pgm(dir / "m.pgm", img);
    CHECK(read_pgm(dir / "m.pgm") == img);
    CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("format_double: 17 significant digits round trip exactly") {
    for (double v : {0.1, -1.0 / 3.0, 1e-300, 2.2250738585072014e-308, 1.7976931348623157e308,
                     3.141592653589793, -0.0, 123456.789012345678}) {
        const std::string s = format_double(v);
        CHECK(parse_double(s) == v);
        CHECK(s.find(',') == std::string::npos);
    }
    CHECK_THROWS_AS(parse_double("1.2.3"), DataError);
    CHECK_THROWS_AS(parse_double("abc"), DataError);

    const std::vector<std::string> fields = {"a", "1.5", "", "x"};
    CHECK(split_csv_line(join_csv(fields)) == fields);
}

TEST_CASE("sidecar: JSON round trip preserves every ground-truth value") {
    const auto cases = sample_cases(3, 41);
    for (const SynthCase& c : cases) {
        const nlohmann::json j = sidecar_json(c);
        // round trip through text, as on disk
        const nlohmann::json parsed = nlohmann::json::parse(j.dump(2));
        SynthCase back;
        sidecar_from_json(parsed, back);
        CHECK(back.calibration.sec_per_col == c.calibration.sec_per_col);
        CHECK(back.calibration.cmps_per_row == c.calibration.cmps_per_row);
        CHECK(back.calibration.baseline_row == c.calibration.baseline_row);
        CHECK(back.flow_type == c.flow_type);
        CHECK(back.spec.seed == c.spec.seed);
        CHECK(back.spec.heart_rate == c.spec.heart_rate);
        CHECK(back.spec.peak_velocity == c.spec.peak_velocity);
        CHECK(back.gt_beats == c.gt_beats);
        CHECK(back.gt_ed_times == c.gt_ed_times);
        REQUIRE(back.gt_measurements.size() == c.gt_measurements.size());
        for (std::size_t i = 0; i < c.gt_measurements.size(); ++i) {
            CHECK(back.gt_measurements[i].vmax == c.gt_measurements[i].vmax);
            CHECK(back.gt_measurements[i].vti == c.gt_measurements[i].vti);
        }
    }
}

TEST_CASE("dataset: write/read round trip, mask PGM carries class labels") {
    const auto dir = fresh_dir("dopplerkit_dataset_test");
    const auto cases = sample_cases(5, 13);
    std::vector<int> ids = {0, 1, 2, 3, 4};
    const SplitPlan plan = mc_split(ids, {0.8, 0.1, 0.1}, 2, 3);
    write_dataset(dir, cases, plan, {{"n_cases", 5}});

    const auto loaded = read_dataset(dir);
    REQUIRE(loaded.size() == cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i) {
        CHECK(loaded[i].image == cases[i].image);
        CHECK(loaded[i].gt_mask == cases[i].gt_mask);
        CHECK(loaded[i].gt_beats == cases[i].gt_beats);
        CHECK(loaded[i].gt_ed_times == cases[i].gt_ed_times);
        CHECK(loaded[i].flow_type == cases[i].flow_type);
    }

    const SplitPlan plan2 = read_splits(dir);
    CHECK(plan2.repeats.size() == plan.repeats.size());
    CHECK(plan2.repeats[0].train == plan.repeats[0].train);
    CHECK(plan2.repeats[1].test == plan.repeats[1].test);

    // mask PGM is a plain P5 with 0/1/2 pixel values
    const PgmImage mask = read_pgm(dir / "case_0000.mask.pgm");
    for (std::uint8_t v : mask.pixels) CHECK(v <= 2);

    // byte-identical mask round trip through the generic PGM path
    std::ifstream in(dir / "case_0000.mask.pgm", std::ios::binary);
    const std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
    CHECK(encode_pgm(decode_pgm(raw)) == raw);

    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset: reading a corrupted case fails cleanly") {
    const auto dir = fresh_dir("dopplerkit_dataset_bad");
    const auto cases = sample_cases(1, 2);
    write_dataset(dir, cases, mc_split({0, 1, 2}, {0.8, 0.1, 0.1}, 1, 0), {});
    std::ofstream(dir / "case_0000.json") << "{ not json";
    CHECK_THROWS_AS(read_case(dir, 0), DataError);
    std::filesystem::remove_all(dir);
}
