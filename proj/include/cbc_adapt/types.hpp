#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbc_adapt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Vec>;

/// Thrown when a caller breaks a documented precondition (wrong dimensions,
/// non-positive gains, malformed config).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative solver gives up.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double last_residual)
        : std::runtime_error(what), last_residual_(last_residual) {}

    [[nodiscard]] double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

/// Fixed-dimension sequence of vectors stored contiguously. Used for trace
/// channels where one heap allocation per sample would dominate.
class Series {
public:
    Series() = default;
    explicit Series(Eigen::Index dim) : dim_(dim) {}

    void reserve(std::size_t samples) { data_.reserve(samples * static_cast<std::size_t>(dim_)); }

    void push_back(const VecRef& v) {
        require(v.size() == dim_, "Series::push_back: dimension mismatch");
        data_.insert(data_.end(), v.data(), v.data() + dim_);
    }

    [[nodiscard]] Eigen::Map<const Vec> operator[](std::size_t i) const {
        return Eigen::Map<const Vec>(data_.data() + i * static_cast<std::size_t>(dim_), dim_);
    }

    [[nodiscard]] std::size_t size() const noexcept {
        return dim_ == 0 ? 0 : data_.size() / static_cast<std::size_t>(dim_);
    }
    [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    bool operator==(const Series&) const = default;

private:
    Eigen::Index dim_ = 0;
    std::vector<double> data_;
};

}  // namespace cbc_adapt
