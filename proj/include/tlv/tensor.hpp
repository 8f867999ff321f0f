#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tlv {

// Dense row-major tensor of f64. Plain value type: copyable, movable,
// no views. Rank 1 and 2 cover almost everything in this codebase.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> values);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double v);
    static Tensor scalar(double v);
    static Tensor vec(std::vector<double> values);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const;
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // rank-2 accessors; stride is dim(1)
    double& at(int r, int c);
    double at(int r, int c) const;

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Throws ShapeError unless the two shapes match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* where);
void require_rank(const Tensor& t, int rank, const char* where);

} // namespace tlv
