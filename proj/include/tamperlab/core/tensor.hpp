#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tamperlab {

// Dense row-major tensor. Storage is shared (shallow copies alias); use
// clone() for a deep copy. Templated on the scalar so the same model code
// runs in float for the pipeline and in double for finite-difference tests.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<T>>(count(shape_), T(0))) {}

    Tensor(std::vector<int> shape, std::vector<T> values)
        : shape_(std::move(shape)), data_(std::make_shared<std::vector<T>>(std::move(values))) {
        if (static_cast<std::int64_t>(data_->size()) != count(shape_))
            throw std::invalid_argument("tensor: value count does not match shape");
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data().begin(), t.data().end(), value);
        return t;
    }

    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape_.size()); }

    std::int64_t size() const { return data_ ? static_cast<std::int64_t>(data_->size()) : 0; }
    bool empty() const { return size() == 0; }

    std::vector<T>& data() { return *data_; }
    const std::vector<T>& data() const { return *data_; }
    T* ptr() { return data_->data(); }
    const T* ptr() const { return data_->data(); }

    // Identity of the underlying buffer; used to key per-graph leaf lookup.
    const void* storage_id() const { return static_cast<const void*>(data_.get()); }

    T& operator[](std::int64_t i) { return (*data_)[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return (*data_)[static_cast<std::size_t>(i)]; }

    // 2-D accessors (rows x cols), the dominant layout in the model code.
    int rows() const { assert(shape_.size() == 2); return shape_[0]; }
    int cols() const { assert(shape_.size() == 2); return shape_[1]; }
    T& at(int r, int c) { return (*data_)[static_cast<std::size_t>(r) * shape_[1] + c]; }
    const T& at(int r, int c) const { return (*data_)[static_cast<std::size_t>(r) * shape_[1] + c]; }

    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = std::make_shared<std::vector<T>>(*data_);
        return t;
    }

    Tensor reshaped(std::vector<int> shape) const {
        if (count(shape) != size()) throw std::invalid_argument("tensor: reshape size mismatch");
        Tensor t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> v(data_->size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<U>((*data_)[i]);
        return Tensor<U>(shape_, std::move(v));
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static std::int64_t count(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    static std::string shape_str(const std::vector<int>& shape) {
        std::string s = "(";
        for (std::size_t i = 0; i < shape.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape[i]);
        return s + ")";
    }

private:
    std::vector<int> shape_;
    std::shared_ptr<std::vector<T>> data_;
};

}  // namespace tamperlab
