#pragma once

#include <string>
#include <vector>

#include "tabgen/params.hpp"

namespace tabgen {

struct NamedArray {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> data;
};

// Versioned container of named parameter arrays with a JSON metadata header.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::string meta_json;  // config, schema, vocabulary, hashes, step
    std::vector<NamedArray> arrays;

    void add(const std::string& name, int rows, int cols, const double* values);
    void add_store(const std::string& prefix, const ParamStore& store);
    const NamedArray* find(const std::string& name) const;
    // copies arrays named prefix+entry into a finalized store, shape-checked
    void read_store(const std::string& prefix, ParamStore& store) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace tabgen
