#include "tabgen/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace tabgen {

namespace {

constexpr char kMagic[4] = {'T', 'G', 'C', 'K'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    check(in.good(), "checkpoint: truncated file");
    return v;
}

}  // namespace

void Checkpoint::add(const std::string& name, int rows, int cols, const double* values) {
    NamedArray arr;
    arr.name = name;
    arr.rows = rows;
    arr.cols = cols;
    arr.data.assign(values, values + static_cast<std::size_t>(rows) * cols);
    arrays.push_back(std::move(arr));
}

void Checkpoint::add_store(const std::string& prefix, const ParamStore& store) {
    for (const auto& e : store.entries()) {
        add(prefix + e.name, e.rows, e.cols, store.data().data() + e.offset);
    }
}

const NamedArray* Checkpoint::find(const std::string& name) const {
    for (const auto& arr : arrays) {
        if (arr.name == name) return &arr;
    }
    return nullptr;
}

void Checkpoint::read_store(const std::string& prefix, ParamStore& store) const {
    for (const auto& e : store.entries()) {
        const NamedArray* arr = find(prefix + e.name);
        check(arr != nullptr, "checkpoint: missing array " + prefix + e.name);
        check(arr->rows == e.rows && arr->cols == e.cols,
              "checkpoint: shape mismatch for " + prefix + e.name);
        std::memcpy(store.data().data() + e.offset, arr->data.data(),
                    arr->data.size() * sizeof(double));
    }
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "checkpoint: cannot open for writing: " + path);
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(meta_json.size()));
    out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    write_pod(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& arr : arrays) {
        write_pod(out, static_cast<std::uint32_t>(arr.name.size()));
        out.write(arr.name.data(), static_cast<std::streamsize>(arr.name.size()));
        write_pod(out, static_cast<std::uint32_t>(arr.rows));
        write_pod(out, static_cast<std::uint32_t>(arr.cols));
        out.write(reinterpret_cast<const char*>(arr.data.data()),
                  static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
    }
    check(out.good(), "checkpoint: write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "checkpoint: cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    check(in.good() && std::memcmp(magic, kMagic, 4) == 0,
          "checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(in);
    check(version == kVersion, "checkpoint: unsupported version");
    Checkpoint ckpt;
    const auto meta_len = read_pod<std::uint64_t>(in);
    ckpt.meta_json.resize(meta_len);
    in.read(ckpt.meta_json.data(), static_cast<std::streamsize>(meta_len));
    const auto n_arrays = read_pod<std::uint32_t>(in);
    ckpt.arrays.resize(n_arrays);
    for (auto& arr : ckpt.arrays) {
        const auto name_len = read_pod<std::uint32_t>(in);
        arr.name.resize(name_len);
        in.read(arr.name.data(), name_len);
        arr.rows = static_cast<int>(read_pod<std::uint32_t>(in));
        arr.cols = static_cast<int>(read_pod<std::uint32_t>(in));
        arr.data.resize(static_cast<std::size_t>(arr.rows) * arr.cols);
        in.read(reinterpret_cast<char*>(arr.data.data()),
                static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
        check(in.good(), "checkpoint: truncated array " + arr.name);
    }
    return ckpt;
}

}  // namespace tabgen
