#include "densesvm/errors.hpp"
#include "densesvm/eval.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace densesvm::eval {

namespace {

static_assert(std::endian::native == std::endian::little, "feature files are little-endian");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(path.string() + ": truncated feature file");
    return v;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void write_features(const std::filesystem::path& path, const Matrix& features) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write("DSVF", 4);
    put<std::uint32_t>(out, kFeatureFormatVersion);
    put<std::uint64_t>(out, features.rows);
    put<std::uint64_t>(out, features.cols);
    std::vector<float> buf(features.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(features.data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw FormatError("failed writing " + path.string());
}

Matrix read_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open feature file " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "DSVF", 4) != 0)
        throw FormatError(path.string() + ": not a feature file");
    if (get<std::uint32_t>(in, path) != kFeatureFormatVersion) throw FormatError(path.string() + ": unsupported version");
    const auto n = get<std::uint64_t>(in, path);
    const auto d = get<std::uint64_t>(in, path);
    const auto expected = 24 + n * d * sizeof(float);
    if (d != 0 && n > (std::uint64_t{1} << 40) / d) throw FormatError(path.string() + ": implausible size");
    if (std::filesystem::file_size(path) != expected) throw FormatError(path.string() + ": size does not match header");
    std::vector<float> buf(n * d);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw FormatError(path.string() + ": truncated feature file");
    Matrix m(n, d);
    for (std::size_t i = 0; i < buf.size(); ++i) {
        if (!std::isfinite(buf[i])) throw InvalidData(path.string() + ": non-finite feature value");
        m.data[i] = buf[i];
    }
    return m;
}

void write_labels(const std::filesystem::path& path, std::span<const int> labels) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "label\n";
    for (int y : labels) out << (y > 0 ? "1" : "-1") << '\n';
}

std::vector<int> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open label file " + path.string());
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string v = trim(line);
        if (v.empty()) continue;
        if (v == "1" || v == "+1") labels.push_back(1);
        else if (v == "-1") labels.push_back(-1);
        else if (labels.empty() && lineno == 1) continue;  // header
        else throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 1 or -1, got '" + v + "'");
    }
    return labels;
}

}  // namespace densesvm::eval
