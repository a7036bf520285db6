#include "mobiface/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mobiface {

std::size_t shape_elements(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 4) {
        throw std::invalid_argument("tensor shape must have rank 1-4, got rank " +
                                    std::to_string(shape.size()));
    }
    std::uint64_t count = 1;
    for (int d : shape) {
        if (d < 1) {
            throw std::invalid_argument("tensor dimension must be >= 1 in shape " +
                                        shape_string(shape));
        }
        count *= static_cast<std::uint64_t>(d);
        if (count > (1ull << 31)) {
            throw std::invalid_argument("tensor too large: " + shape_string(shape));
        }
    }
    return static_cast<std::size_t>(count);
}

std::string shape_string(const std::vector<int>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(shape_elements(shape_), 0.0f);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_elements(shape_) != data_.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_string(shape_));
    }
}

Tensor zeros(const std::vector<int>& shape) {
    return Tensor(shape);
}

Tensor hflip(const Tensor& t) {
    if (t.rank() != 4) {
        throw std::invalid_argument("hflip expects a rank-4 tensor, got rank " +
                                    std::to_string(t.rank()));
    }
    const int n_n = t.dim(0), n_c = t.dim(1), n_h = t.dim(2), n_w = t.dim(3);
    Tensor out(t.shape());
    const float* src = t.data();
    float* dst = out.data();
    for (int n = 0; n < n_n; ++n) {
        for (int c = 0; c < n_c; ++c) {
            for (int h = 0; h < n_h; ++h) {
                const std::size_t row = t.offset(n, c, h, 0);
                for (int w = 0; w < n_w; ++w) {
                    dst[row + w] = src[row + (n_w - 1 - w)];
                }
            }
        }
    }
    return out;
}

Tensor l2_normalize(const Tensor& v) {
    if (v.rank() != 1) {
        throw std::invalid_argument("l2_normalize expects a rank-1 tensor, got rank " +
                                    std::to_string(v.rank()));
    }
    double sumsq = 0.0;
    for (float x : v.values()) sumsq += static_cast<double>(x) * x;
    if (sumsq == 0.0) {
        throw std::invalid_argument("l2_normalize: zero vector");
    }
    const float inv = static_cast<float>(1.0 / std::sqrt(sumsq));
    Tensor out(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) out.at(i) = v.at(i) * inv;
    return out;
}

bool allclose(const Tensor& a, const Tensor& b, float atol) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("allclose: shape mismatch " + shape_string(a.shape()) +
                                    " vs " + shape_string(b.shape()));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float diff = std::fabs(a.at(i) - b.at(i));
        if (!(diff <= atol)) return false;  // NaN falls through to false
    }
    return true;
}

bool all_finite(const Tensor& t) {
    for (float x : t.values()) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void ensure_finite(const Tensor& t, const std::string& context) {
    if (!all_finite(t)) {
        throw std::runtime_error(context + ": tensor contains NaN or Inf");
    }
}

}  // namespace mobiface
