#include "tlv/tensor.hpp"

#include <cmath>
#include <sstream>

#include "tlv/errors.hpp"

namespace tlv {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor extent must be positive, got " + std::to_string(d));
        n *= d;
    }
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)) {
    const std::int64_t n = shape_numel(shape_);
    if (n != static_cast<std::int64_t>(values.size())) {
        throw ShapeError("value count " + std::to_string(values.size()) + " does not fill shape " +
                         shape_to_string(shape_));
    }
    data_ = std::move(values);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vec(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Tensor({n}, std::move(values));
}

int Tensor::dim(int i) const {
    if (i < 0 || i >= rank()) throw ShapeError("dim index " + std::to_string(i) + " out of rank " + std::to_string(rank()));
    return shape_[static_cast<std::size_t>(i)];
}

double& Tensor::at(int r, int c) {
    return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(c)];
}

double Tensor::at(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(c)];
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

void require_rank(const Tensor& t, int rank, const char* where) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(where) + ": expected rank " + std::to_string(rank) + ", got " +
                         t.shape_str());
    }
}

} // namespace tlv
