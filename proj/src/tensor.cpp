#include "talkhead/tensor.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include "talkhead/errors.hpp"

namespace talkhead {

std::size_t shape_numel(const std::vector<std::uint32_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t b) { return a * b; });
}

Tensor::Tensor(std::vector<std::uint32_t> shape_, std::vector<float> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape_numel(shape) != data.size())
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape product " + std::to_string(shape_numel(shape)));
}

Tensor Tensor::zeros(std::vector<std::uint32_t> shape_) {
    const std::size_t n = shape_numel(shape_);
    return Tensor(std::move(shape_), std::vector<float>(n, 0.0f));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const MatrixXf>& m) {
    Tensor t = zeros({static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())});
    Eigen::Map<RowMatrix<float>>(t.data.data(), m.rows(), m.cols()) = m;
    return t;
}

Tensor Tensor::from_vector(const Eigen::Ref<const VectorXf>& v) {
    Tensor t = zeros({static_cast<std::uint32_t>(v.size())});
    Eigen::Map<VectorXf>(t.data.data(), v.size()) = v;
    return t;
}

MatrixXf Tensor::to_matrix() const {
    if (rank() != 2) throw DimensionError("expected a rank-2 tensor, got rank " + std::to_string(rank()));
    return Eigen::Map<const RowMatrix<float>>(data.data(), shape[0], shape[1]);
}

VectorXf Tensor::to_vector() const {
    if (rank() != 1) throw DimensionError("expected a rank-1 tensor, got rank " + std::to_string(rank()));
    return Eigen::Map<const VectorXf>(data.data(), static_cast<Eigen::Index>(data.size()));
}

void WeightStore::add(const std::string& name, Tensor tensor) {
    if (contains(name)) throw DataError("duplicate tensor name '" + name + "'");
    index_[name] = entries_.size();
    entries_.emplace_back(name, std::move(tensor));
}

void WeightStore::set(const std::string& name, Tensor tensor) {
    if (auto it = index_.find(name); it != index_.end()) {
        entries_[it->second].second = std::move(tensor);
        return;
    }
    add(name, std::move(tensor));
}

const Tensor& WeightStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("missing tensor '" + name + "'");
    return entries_[it->second].second;
}

MatrixXf WeightStore::matrix(const std::string& name, int rows, int cols) const {
    const Tensor& t = get(name);
    if (t.rank() != 2 || t.shape[0] != static_cast<std::uint32_t>(rows) ||
        t.shape[1] != static_cast<std::uint32_t>(cols))
        throw DimensionError("tensor '" + name + "' must have shape [" + std::to_string(rows) + ", " +
                             std::to_string(cols) + "]");
    return t.to_matrix();
}

VectorXf WeightStore::vector(const std::string& name, int size) const {
    const Tensor& t = get(name);
    if (t.rank() != 1 || t.shape[0] != static_cast<std::uint32_t>(size))
        throw DimensionError("tensor '" + name + "' must have shape [" + std::to_string(size) + "]");
    return t.to_vector();
}

namespace {

constexpr char kMagic[4] = {'L', 'S', 'P', 'W'};
constexpr std::uint8_t kDtypeF32 = 0;

template <typename T>
void put_le(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get_le(const char* what) {
        need(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }

    std::string get_bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated weight file while reading ") + what);
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_weights(const WeightStore& store) {
    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, WeightStore::kFormatVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
    put_le<std::uint32_t>(out, 0);
    for (const auto& [name, tensor] : store.entries()) {
        if (name.size() > 0xFFFF) throw DataError("tensor name too long: " + name.substr(0, 32) + "...");
        if (tensor.rank() > 0xFF) throw DataError("tensor '" + name + "' has too many dimensions");
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        put_le<std::uint8_t>(out, kDtypeF32);
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.rank()));
        for (auto d : tensor.shape) put_le<std::uint32_t>(out, d);
        for (float f : tensor.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

WeightStore deserialize_weights(const std::string& bytes) {
    Reader r(bytes);
    if (r.get_bytes(4, "magic") != std::string(kMagic, 4)) throw FormatError("bad magic in weight file");
    const auto version = r.get_le<std::uint32_t>("version");
    if (version != WeightStore::kFormatVersion)
        throw FormatError("unsupported weight file version " + std::to_string(version));
    const auto count = r.get_le<std::uint32_t>("tensor count");
    r.get_le<std::uint32_t>("reserved header word");

    WeightStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.get_le<std::uint16_t>("name length");
        std::string name = r.get_bytes(name_len, "name");
        const auto dtype = r.get_le<std::uint8_t>("dtype");
        if (dtype != kDtypeF32)
            throw FormatError("tensor '" + name + "' has unsupported dtype " + std::to_string(dtype));
        const auto rank = r.get_le<std::uint8_t>("rank");
        std::vector<std::uint32_t> shape(rank);
        for (auto& d : shape) d = r.get_le<std::uint32_t>("dims");
        const std::size_t n = shape_numel(shape);
        if (n > bytes.size() / 4) throw FormatError("truncated weight file while reading data of '" + name + "'");
        std::vector<float> data(n);
        for (auto& f : data) f = std::bit_cast<float>(r.get_le<std::uint32_t>("tensor data"));
        if (store.contains(name)) throw FormatError("duplicate tensor name '" + name + "' in weight file");
        store.add(name, Tensor(std::move(shape), std::move(data)));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after last tensor in weight file");
    return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
    const std::string bytes = serialize_weights(store);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write weight file " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for weight file " + path.string());
}

WeightStore load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weight file " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_weights(bytes);
}

}  // namespace talkhead
