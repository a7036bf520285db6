#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mobiface {

// Dense float32 tensor, rank 1-4. Activations are laid out [N, C, H, W],
// row-major with W fastest. Every dimension is >= 1 and the data vector
// always holds exactly product(shape) elements.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);                          // zero-filled
    Tensor(std::vector<int> shape, std::vector<float> data);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data_.size(); }

    const float* data() const { return data_.data(); }
    float* data() { return data_.data(); }
    std::span<const float> values() const { return data_; }

    float& at(std::size_t i) { return data_[i]; }
    float at(std::size_t i) const { return data_[i]; }

    // NCHW addressing for rank-4 tensors.
    std::size_t offset(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }
    float at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }
    float& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

// Validates a shape (rank 1-4, all dims >= 1) and returns its element count.
std::size_t shape_elements(const std::vector<int>& shape);

std::string shape_string(const std::vector<int>& shape);  // e.g. "1x3x112x112"

Tensor zeros(const std::vector<int>& shape);

// Mirrors a [N,C,H,W] tensor along the width axis: out[n,c,h,w] = in[n,c,h,W-1-w].
Tensor hflip(const Tensor& t);

// Scales a rank-1 vector to unit Euclidean norm. Rejects the zero vector.
Tensor l2_normalize(const Tensor& v);

// True iff shapes match and max |a-b| <= atol. Shape mismatch is an error,
// a NaN anywhere compares unequal.
bool allclose(const Tensor& a, const Tensor& b, float atol);

bool all_finite(const Tensor& t);

// Throws if the tensor contains NaN or Inf; `context` names the producer.
void ensure_finite(const Tensor& t, const std::string& context);

}  // namespace mobiface
