#pragma once

#include "tsigan/error.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tsigan {

using Shape = std::vector<int>;

inline std::size_t shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

inline std::string shape_string(const Shape& shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += (i ? "x" : "") + std::to_string(shape[i]);
    }
    return s + "]";
}

/// Dense row-major array. Image batches are channel-last (B x H x W x C).
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape))
    {
        check_extents();
        data_.assign(shape_size(shape_), fill);
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        check_extents();
        if (data_.size() != shape_size(shape_)) {
            throw ShapeMismatch("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    int rank() const noexcept { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    Tensor reshaped(Shape shape) const
    {
        if (shape_size(shape) != data_.size()) {
            throw ShapeMismatch("cannot reshape " + shape_string(shape_) + " to " +
                                shape_string(shape));
        }
        return Tensor(std::move(shape), data_);
    }

    bool all_finite() const noexcept
    {
        for (const T& v : data_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const
    {
        return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void check_extents() const
    {
        for (int d : shape_) {
            if (d <= 0) {
                throw ShapeMismatch("tensor extents must be positive, got " + shape_string(shape_));
            }
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

} // namespace tsigan
