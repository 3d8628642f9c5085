#include "sogr/tensor.hpp"

#include <sstream>

#include "sogr/errors.hpp"

namespace sogr {

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

namespace {

void validate_shape(const std::vector<int>& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must be non-empty");
    for (int d : shape) {
        if (d < 1) throw ShapeError("tensor dimension must be >= 1, got shape " + shape_str(shape));
    }
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (static_cast<int64_t>(data_.size()) != shape_numel(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::full(std::vector<int> shape, float v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
}

Tensor Tensor::of(std::initializer_list<float> values) {
    return Tensor({static_cast<int>(values.size())}, std::vector<float>(values));
}

}  // namespace sogr
