#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace sogr {

std::string shape_str(const std::vector<int>& shape);
int64_t shape_numel(const std::vector<int>& shape);

/// Dense row-major tensor of 32-bit floats. Shapes are non-empty with every
/// dimension >= 1; data length always equals the product of the dimensions.
/// No strided views — reshape/concat copy.
class Tensor {
public:
    Tensor() = default;  // undefined tensor; defined() is false

    explicit Tensor(std::vector<int> shape);  // zero-filled
    Tensor(std::vector<int> shape, std::vector<float> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, float v);
    static Tensor ones(std::vector<int> shape) { return full(std::move(shape), 1.0f); }
    static Tensor scalar(float v) { return Tensor({1}, {v}); }
    static Tensor of(std::initializer_list<float> values);  // 1-D

    bool defined() const { return !shape_.empty(); }
    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& vec() { return data_; }
    const std::vector<float>& vec() const { return data_; }

    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

}  // namespace sogr
