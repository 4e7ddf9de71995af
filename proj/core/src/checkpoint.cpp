#include "dopplerkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "dopplerkit/errors.hpp"
#include "dopplerkit/json_conv.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts are unsupported");

namespace dopplerkit {

namespace {
constexpr const char* kMagic = "DOPPLERKIT-CHECKPOINT 1";
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot open for writing: " + path.string());
    const nlohmann::json cfg = model.config;
    out << kMagic << '\n' << cfg.dump() << '\n' << "PARAMS " << model.parameter_count() << '\n';
    for (const auto& [name, t] : model.params)
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    if (!out) throw DataError("checkpoint: write failed: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open: " + path.string());
    std::string magic, cfg_line, params_line;
    if (!std::getline(in, magic) || magic != kMagic)
        throw DataError("checkpoint: bad magic in " + path.string());
    if (!std::getline(in, cfg_line)) throw DataError("checkpoint: missing config line");
    if (!std::getline(in, params_line) || params_line.rfind("PARAMS ", 0) != 0)
        throw DataError("checkpoint: missing PARAMS line");

    NetworkConfig config;
    try {
        nlohmann::json::parse(cfg_line).get_to(config);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: bad config: ") + e.what());
    }
    const std::size_t expected = std::stoull(params_line.substr(7));

    Model model;
    model.config = config;
    std::size_t total = 0;
    for (const LayerSpec& spec : enumerate_layers(config)) {
        auto t = make_tensor(spec.shape, true);
        in.read(reinterpret_cast<char*>(t->data.data()),
                static_cast<std::streamsize>(t->data.size() * sizeof(double)));
        if (in.gcount() != static_cast<std::streamsize>(t->data.size() * sizeof(double)))
            throw DataError("checkpoint: truncated parameter blob");
        total += t->numel();
        model.params.push_back({spec.name, std::move(t)});
    }
    if (total != expected) throw DataError("checkpoint: parameter count mismatch");
    if (in.get() != std::ifstream::traits_type::eof())
        throw DataError("checkpoint: trailing bytes after parameter blob");
    return model;
}

}  // namespace dopplerkit
