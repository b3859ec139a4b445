#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cufsr {

using Shape = std::vector<std::int64_t>;

/// Thrown when operand shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation produces NaN or Inf.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major N-dimensional array. Data length always equals the
/// product of the shape.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0));
    Tensor(Shape shape, std::vector<T> data);

    static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int axis) const;
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // Rank-3 HWC accessor, the layout used for images and feature maps.
    T& at(std::int64_t y, std::int64_t x, std::int64_t c) {
        return data_[static_cast<std::size_t>((y * shape_[1] + x) * shape_[2] + c)];
    }
    const T& at(std::int64_t y, std::int64_t x, std::int64_t c) const {
        return data_[static_cast<std::size_t>((y * shape_[1] + x) * shape_[2] + c)];
    }

    T item() const;

    Tensor reshaped(Shape shape) const;

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    void fill(T v);
    bool all_finite() const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

/// Throws NumericError naming `op` if any element is NaN or Inf.
template <typename T>
void check_finite(const Tensor<T>& t, const char* op);

extern template class Tensor<float>;
extern template class Tensor<double>;

} // namespace cufsr
