#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsmx {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or extent mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation (log of a
/// negative number, non-finite intermediate, ...).
struct DomainError : Error {
    using Error::Error;
};

/// Malformed input file (bad magic, truncation, inconsistent counts).
struct FormatError : Error {
    using Error::Error;
};

/// Invalid run configuration.
struct ConfigError : Error {
    using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Dense row-major tensor of doubles. The universal value type of the
/// library; shape [] is a scalar.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
    }

    static Tensor zeros(Shape s) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }
    static Tensor full(Shape s, double v) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<double>(n, v));
    }
    static Tensor scalar(double v) { return Tensor({}, {v}); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool is_scalar() const { return shape.empty(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-D accessors; most of the math lives on [rows x cols] matrices.
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace tsmx
