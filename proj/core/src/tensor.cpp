#include "inn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "inn/error.hpp"

namespace inn {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (auto d : shape_)
        if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_string(shape_));
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto d : shape_)
        if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_string(shape_));
    if (data_.size() != shape_size(shape_))
        throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_string(shape_));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
    return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const& {
    Tensor copy = *this;
    copy.reshape(std::move(shape));
    return copy;
}

Tensor Tensor::reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
}

void Tensor::reshape(Shape shape) {
    if (shape_size(shape) != data_.size())
        throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
    if (shape_.empty() || begin >= end || end > shape_[0])
        throw DimensionError("bad row slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                             shape_string(shape_));
    const std::size_t stride = data_.size() / shape_[0];
    Shape shape = shape_;
    shape[0] = end - begin;
    return Tensor(std::move(shape), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                                                        data_.begin() + static_cast<std::ptrdiff_t>(end * stride)));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> rows) const {
    if (shape_.empty() || rows.empty()) throw DimensionError("gather_rows needs a non-empty row list");
    const std::size_t stride = data_.size() / shape_[0];
    Shape shape = shape_;
    shape[0] = rows.size();
    std::vector<double> out;
    out.reserve(rows.size() * stride);
    for (auto r : rows) {
        if (r >= shape_[0]) throw DimensionError("row index out of range in gather_rows");
        auto first = data_.begin() + static_cast<std::ptrdiff_t>(r * stride);
        out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(stride));
    }
    return Tensor(std::move(shape), std::move(out));
}

std::span<const double> Tensor::row(std::size_t r) const {
    const std::size_t stride = data_.size() / dim(0);
    return std::span<const double>(data_).subspan(r * stride, stride);
}

std::span<double> Tensor::row(std::size_t r) {
    const std::size_t stride = data_.size() / dim(0);
    return std::span<double>(data_).subspan(r * stride, stride);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace inn
