#include "dopplerkit/pgm.hpp"

#include <fstream>
#include <string>

#include "dopplerkit/errors.hpp"

namespace dopplerkit {

namespace {

class ByteReader {
  public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    // next whitespace-delimited token, skipping '#' comments to end of line
    std::string token() {
        while (pos_ < bytes_.size()) {
            const char c = static_cast<char>(bytes_[pos_]);
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos_;
            } else {
                break;
            }
        }
        std::string tok;
        while (pos_ < bytes_.size()) {
            const char c = static_cast<char>(bytes_[pos_]);
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
            tok.push_back(c);
            ++pos_;
        }
        if (tok.empty()) throw DataError("pgm: truncated header");
        return tok;
    }

    // single whitespace byte separating the header from the raster
    void expect_single_whitespace() {
        if (pos_ >= bytes_.size()) throw DataError("pgm: truncated after maxval");
        const char c = static_cast<char>(bytes_[pos_]);
        if (c != ' ' && c != '\t' && c != '\r' && c != '\n')
            throw DataError("pgm: missing whitespace before raster");
        ++pos_;
    }

    std::size_t pos() const { return pos_; }

  private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

int parse_int(const std::string& tok) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw DataError("pgm: bad integer '" + tok + "'");
        return v;
    } catch (const std::exception&) {
        throw DataError("pgm: bad integer '" + tok + "'");
    }
}

}  // namespace

std::vector<std::uint8_t> encode_pgm(const PgmImage& img) {
    const std::string header =
        "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

PgmImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.token() != "P5") throw DataError("pgm: not a binary P5 file");
    PgmImage img;
    img.cols = parse_int(r.token());
    img.rows = parse_int(r.token());
    const int maxval = parse_int(r.token());
    if (img.cols < 1 || img.rows < 1) throw DataError("pgm: non-positive dimensions");
    if (maxval < 1 || maxval > 255) throw DataError("pgm: unsupported maxval");
    r.expect_single_whitespace();
    const std::size_t n = static_cast<std::size_t>(img.rows) * img.cols;
    if (bytes.size() - r.pos() != n) throw DataError("pgm: raster size mismatch");
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()), bytes.end());
    return img;
}

void write_pgm(const std::filesystem::path& path, const PgmImage& img) {
    const std::vector<std::uint8_t> bytes = encode_pgm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("pgm: cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("pgm: write failed: " + path.string());
}

PgmImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("pgm: cannot open: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_pgm(bytes);
}

}  // namespace dopplerkit
