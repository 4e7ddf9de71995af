#include "dopplerkit/dataset.hpp"

#include <fstream>
#include <mutex>

#include "dopplerkit/errors.hpp"
#include "dopplerkit/json_conv.hpp"
#include "dopplerkit/parallel.hpp"
#include "dopplerkit/pgm.hpp"

namespace dopplerkit {

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace

std::string case_basename(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "case_%04d", index);
    return buf;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<SynthCase>& cases,
                   const SplitPlan& splits, const nlohmann::json& generator_config, int workers) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    std::mutex written_mutex;
    auto track = [&](const std::filesystem::path& p) {
        std::lock_guard<std::mutex> lock(written_mutex);
        written.push_back(p);
    };
    try {
        parallel_for(cases.size(), workers, [&](std::size_t i) {
            const SynthCase& c = cases[i];
            const std::string stem = case_basename(static_cast<int>(i));
            const auto img_path = dir / (stem + ".pgm");
            const auto mask_path = dir / (stem + ".mask.pgm");
            const auto sidecar_path = dir / (stem + ".json");
            track(img_path);
            write_pgm(img_path, {c.spec.rows, c.spec.cols, c.image});
            track(mask_path);
            write_pgm(mask_path, {c.gt_mask.rows, c.gt_mask.cols, c.gt_mask.labels});
            track(sidecar_path);
            write_text_file(sidecar_path, sidecar_json(c).dump(2) + "\n");
        });

        nlohmann::json entries = nlohmann::json::array();
        for (std::size_t i = 0; i < cases.size(); ++i) {
            entries.push_back({{"index", i},
                               {"stem", case_basename(static_cast<int>(i))},
                               {"flow_type", flow_type_name(cases[i].flow_type)},
                               {"seed", cases[i].spec.seed}});
        }
        const nlohmann::json manifest = {{"n_cases", cases.size()},
                                         {"cases", entries},
                                         {"generator", generator_config}};
        track(dir / "manifest.json");
        write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
        const nlohmann::json splits_json = splits;
        track(dir / "splits.json");
        write_text_file(dir / "splits.json", splits_json.dump(2) + "\n");
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) std::filesystem::remove(p, ec);
        throw;
    }
}

SynthCase read_case(const std::filesystem::path& dir, int index) {
    const std::string stem = case_basename(index);
    const PgmImage img = read_pgm(dir / (stem + ".pgm"));
    const PgmImage mask = read_pgm(dir / (stem + ".mask.pgm"));
    if (img.rows != mask.rows || img.cols != mask.cols)
        throw DataError(stem + ": image and mask dimensions differ");

    SynthCase c;
    c.image = img.pixels;
    c.gt_mask.rows = mask.rows;
    c.gt_mask.cols = mask.cols;
    c.gt_mask.labels = mask.pixels;
    for (std::uint8_t v : c.gt_mask.labels)
        if (v > kClassReverse) throw DataError(stem + ": mask label out of range");
    sidecar_from_json(read_json_file(dir / (stem + ".json")), c);
    if (c.spec.rows != img.rows || c.spec.cols != img.cols)
        throw DataError(stem + ": sidecar dimensions do not match the image");
    return c;
}

std::vector<SynthCase> read_dataset(const std::filesystem::path& dir, int workers) {
    const nlohmann::json manifest = read_manifest(dir);
    const int n = manifest.at("n_cases").get<int>();
    std::vector<int> indices(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
    return read_cases(dir, indices, workers);
}

std::vector<SynthCase> read_cases(const std::filesystem::path& dir, const std::vector<int>& indices,
                                  int workers) {
    std::vector<SynthCase> cases(indices.size());
    parallel_for(indices.size(), workers,
                 [&](std::size_t i) { cases[i] = read_case(dir, indices[i]); });
    return cases;
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
    return read_json_file(dir / "manifest.json");
}

SplitPlan read_splits(const std::filesystem::path& dir) {
    SplitPlan plan;
    read_json_file(dir / "splits.json").get_to(plan);
    return plan;
}

}  // namespace dopplerkit
