#include "densesvm/errors.hpp"
#include "densesvm/svm.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace densesvm::svm {

namespace {

static_assert(std::endian::native == std::endian::little, "model files are written natively as little-endian");

constexpr char kMagic[4] = {'D', 'S', 'V', 'M'};

class Writer {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void put_string(const std::string& s) {
        put(static_cast<std::uint16_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string() {
        const auto len = get<std::uint16_t>();
        need(len);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t k) const {
        if (pos_ + k > bytes_.size()) throw FormatError("model file is truncated");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const NuSvmModel& model) {
    Writer w;
    for (char c : kMagic) w.put(static_cast<std::uint8_t>(c));
    w.put(kModelFormatVersion);
    w.put(static_cast<std::uint8_t>(model.converged ? 1 : 0));
    w.put(std::uint16_t{0});
    w.put(model.gamma);
    w.put(model.nu);
    w.put(model.bias);
    w.put(static_cast<std::uint32_t>(model.max_iter));
    w.put_string(model.label_names[0]);
    w.put_string(model.label_names[1]);
    w.put(static_cast<std::uint64_t>(model.support_vectors.rows));
    w.put(static_cast<std::uint64_t>(model.support_vectors.cols));
    for (double v : model.support_vectors.data) w.put(static_cast<float>(v));
    for (double v : model.dual_coeffs) w.put(static_cast<float>(v));
    return std::move(w.bytes);
}

NuSvmModel deserialize_model(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    for (char c : kMagic)
        if (r.get<std::uint8_t>() != static_cast<std::uint8_t>(c)) throw FormatError("not a DSVM model file");
    const auto version = r.get<std::uint8_t>();
    if (version != kModelFormatVersion)
        throw FormatError("unsupported model format version " + std::to_string(version));
    NuSvmModel m;
    m.converged = r.get<std::uint8_t>() != 0;
    r.get<std::uint16_t>();
    m.gamma = r.get<double>();
    m.nu = r.get<double>();
    m.bias = r.get<double>();
    m.max_iter = static_cast<int>(r.get<std::uint32_t>());
    m.label_names[0] = r.get_string();
    m.label_names[1] = r.get_string();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows < 1 || cols < 1) throw FormatError("model has an empty support set");
    if (rows > (bytes.size() / 4) || cols > (bytes.size() / 4) || rows * cols > bytes.size() / 4)
        throw FormatError("model dimensions exceed file size");
    m.support_vectors = Matrix(rows, cols);
    for (double& v : m.support_vectors.data) v = r.get<float>();
    m.dual_coeffs.resize(rows);
    for (double& v : m.dual_coeffs) v = r.get<float>();
    if (!r.done()) throw FormatError("trailing bytes after model payload");
    if (!(m.gamma > 0.0)) throw FormatError("model gamma must be positive");
    return m;
}

void save_model(const NuSvmModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("cannot write model to " + path.string());
}

NuSvmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

std::string model_version(const NuSvmModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : serialize_model(model)) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << "nusvm-v" << static_cast<int>(kModelFormatVersion) << '-' << std::hex << std::setw(16) << std::setfill('0')
       << h;
    return os.str();
}

}  // namespace densesvm::svm
