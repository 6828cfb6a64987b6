#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "tabgen/common.hpp"

namespace tabgen {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

struct ParamEntry {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
};

// Flat arena of named parameter matrices. Gradient and Adam-moment buffers are
// mirrors with the same layout, so optimizer steps and checkpoints operate on
// one contiguous vector.
class ParamStore {
  public:
    void add(const std::string& name, int rows, int cols = 1) {
        require(!finalized_, "ParamStore: cannot add after finalize");
        require(!index_.count(name), "ParamStore: duplicate name " + name);
        index_[name] = entries_.size();
        entries_.push_back({name, total_, rows, cols});
        total_ += static_cast<std::size_t>(rows) * cols;
    }

    void finalize() {
        require(!finalized_, "ParamStore: already finalized");
        data_ = Vec::Zero(static_cast<Eigen::Index>(total_));
        finalized_ = true;
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    const ParamEntry& entry(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), "ParamStore: unknown name " + name);
        return entries_[it->second];
    }

    MatMap mat(const std::string& name) {
        const auto& e = entry(name);
        return MatMap(data_.data() + e.offset, e.rows, e.cols);
    }
    ConstMatMap mat(const std::string& name) const {
        const auto& e = entry(name);
        return ConstMatMap(data_.data() + e.offset, e.rows, e.cols);
    }
    VecMap vec(const std::string& name) {
        const auto& e = entry(name);
        return VecMap(data_.data() + e.offset, static_cast<Eigen::Index>(e.rows) * e.cols);
    }
    ConstVecMap vec(const std::string& name) const {
        const auto& e = entry(name);
        return ConstVecMap(data_.data() + e.offset, static_cast<Eigen::Index>(e.rows) * e.cols);
    }

    Vec& data() { return data_; }
    const Vec& data() const { return data_; }
    std::size_t size() const { return total_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }

    // zero-filled buffer with identical layout
    ParamStore like() const {
        ParamStore out;
        out.entries_ = entries_;
        out.index_ = index_;
        out.total_ = total_;
        out.finalize();
        return out;
    }

  private:
    std::vector<ParamEntry> entries_;
    std::map<std::string, std::size_t> index_;
    std::size_t total_ = 0;
    Vec data_;
    bool finalized_ = false;
};

inline double silu(double x) {
    return x / (1.0 + std::exp(-x));
}

inline double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

}  // namespace tabgen
