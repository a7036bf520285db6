#include "mobiface/nn_ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace mobiface {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Scatters one input image into a [Cin*k*k, outH*outW] patch matrix whose
// rows follow the mandated accumulation order (channel, kernel row, kernel
// column). Zero padding is materialized.
void im2col(const float* img, int cin, int in_h, int in_w, int k, int stride, int pad,
            int out_h, int out_w, float* col) {
    const int patch = out_h * out_w;
    float* dst = col;
    for (int c = 0; c < cin; ++c) {
        const float* plane = img + static_cast<std::size_t>(c) * in_h * in_w;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                for (int oh = 0; oh < out_h; ++oh) {
                    const int ih = oh * stride + kh - pad;
                    if (ih < 0 || ih >= in_h) {
                        std::memset(dst + oh * out_w, 0, sizeof(float) * out_w);
                        continue;
                    }
                    const float* src_row = plane + static_cast<std::size_t>(ih) * in_w;
                    float* dst_row = dst + oh * out_w;
                    for (int ow = 0; ow < out_w; ++ow) {
                        const int iw = ow * stride + kw - pad;
                        dst_row[ow] = (iw >= 0 && iw < in_w) ? src_row[iw] : 0.0f;
                    }
                }
                dst += patch;
            }
        }
    }
    (void)patch;
}

// out[oc][p] = sum_r w[oc][r] * col[r][p], accumulated in ascending r so the
// per-element addition chain matches the naive reference bitwise.
void matmul_accumulate(const float* w, const float* col, int cout, int reduce, int patch,
                       float* out) {
    for (int oc = 0; oc < cout; ++oc) {
        float* out_row = out + static_cast<std::size_t>(oc) * patch;
        std::memset(out_row, 0, sizeof(float) * patch);
        const float* w_row = w + static_cast<std::size_t>(oc) * reduce;
        for (int r = 0; r < reduce; ++r) {
            const float wv = w_row[r];
            const float* col_row = col + static_cast<std::size_t>(r) * patch;
            for (int p = 0; p < patch; ++p) {
                out_row[p] += wv * col_row[p];
            }
        }
    }
}

}  // namespace

int conv_output_extent(int in, int k, int stride, int pad) {
    require(in >= 1 && k >= 1 && stride >= 1 && pad >= 0, "bad convolution geometry");
    const int padded = in + 2 * pad;
    if (padded < k) {
        throw std::invalid_argument("convolution output dimension < 1 (input " +
                                    std::to_string(in) + ", kernel " + std::to_string(k) +
                                    ", pad " + std::to_string(pad) + ")");
    }
    return (padded - k) / stride + 1;
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
    require(x.rank() == 4, "conv2d: input must be rank-4, got rank " + std::to_string(x.rank()));
    require(p.kernel.rank() == 4, "conv2d: kernel must be rank-4");
    const int batch = x.dim(0), cin = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
    const int cout = p.kernel.dim(0), k = p.kernel.dim(2);
    require(p.kernel.dim(2) == p.kernel.dim(3), "conv2d: kernel must be square");
    require(p.kernel.dim(1) == cin,
            "conv2d: kernel expects " + std::to_string(p.kernel.dim(1)) + " input channels, got " +
                std::to_string(cin));
    if (p.bias) {
        require(p.bias->rank() == 1 && p.bias->dim(0) == cout, "conv2d: bias length mismatch");
    }
    const int out_h = conv_output_extent(in_h, k, p.stride, p.pad);
    const int out_w = conv_output_extent(in_w, k, p.stride, p.pad);
    const int patch = out_h * out_w;
    const int reduce = cin * k * k;

    Tensor out({batch, cout, out_h, out_w});
    const bool pointwise = (k == 1 && p.stride == 1 && p.pad == 0);
    std::vector<float> col_buf;
    if (!pointwise) col_buf.resize(static_cast<std::size_t>(reduce) * patch);

    for (int n = 0; n < batch; ++n) {
        const float* img = x.data() + static_cast<std::size_t>(n) * cin * in_h * in_w;
        // For a 1x1 stride-1 unpadded conv the image already is the patch
        // matrix; skip the copy.
        const float* col = img;
        if (!pointwise) {
            im2col(img, cin, in_h, in_w, k, p.stride, p.pad, out_h, out_w, col_buf.data());
            col = col_buf.data();
        }
        float* dst = out.data() + static_cast<std::size_t>(n) * cout * patch;
        matmul_accumulate(p.kernel.data(), col, cout, reduce, patch, dst);
        if (p.bias) {
            for (int oc = 0; oc < cout; ++oc) {
                const float b = p.bias->at(static_cast<std::size_t>(oc));
                float* row = dst + static_cast<std::size_t>(oc) * patch;
                for (int i = 0; i < patch; ++i) row[i] += b;
            }
        }
    }
    return out;
}

Tensor dwconv2d(const Tensor& x, const DwConvParams& p) {
    require(x.rank() == 4, "dwconv2d: input must be rank-4");
    require(p.kernel.rank() == 4, "dwconv2d: kernel must be rank-4");
    const int batch = x.dim(0), channels = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
    const int k = p.kernel.dim(2);
    require(p.kernel.dim(2) == p.kernel.dim(3), "dwconv2d: kernel must be square");
    require(p.kernel.dim(0) == channels && p.kernel.dim(1) == 1,
            "dwconv2d: kernel expects " + std::to_string(p.kernel.dim(0)) +
                " channels, input has " + std::to_string(channels));
    const int out_h = conv_output_extent(in_h, k, p.stride, p.pad);
    const int out_w = conv_output_extent(in_w, k, p.stride, p.pad);

    Tensor out({batch, channels, out_h, out_w});
    for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < channels; ++c) {
            const float* plane = x.data() + x.offset(n, c, 0, 0);
            const float* kern = p.kernel.data() + static_cast<std::size_t>(c) * k * k;
            float* dst = out.data() + out.offset(n, c, 0, 0);
            for (int oh = 0; oh < out_h; ++oh) {
                const int ih0 = oh * p.stride - p.pad;
                for (int ow = 0; ow < out_w; ++ow) {
                    const int iw0 = ow * p.stride - p.pad;
                    float acc = 0.0f;
                    for (int kh = 0; kh < k; ++kh) {
                        const int ih = ih0 + kh;
                        if (ih < 0 || ih >= in_h) {
                            // whole kernel row falls in the zero padding
                            continue;
                        }
                        const float* src_row = plane + static_cast<std::size_t>(ih) * in_w;
                        const float* k_row = kern + kh * k;
                        for (int kw = 0; kw < k; ++kw) {
                            const int iw = iw0 + kw;
                            if (iw < 0 || iw >= in_w) continue;
                            acc += src_row[iw] * k_row[kw];
                        }
                    }
                    dst[oh * out_w + ow] = acc;
                }
            }
        }
    }
    return out;
}

Tensor batchnorm(const Tensor& x, const BatchNormParams& p) {
    require(x.rank() == 4, "batchnorm: input must be rank-4");
    const int channels = x.dim(1);
    for (const Tensor* v : {&p.gamma, &p.beta, &p.running_mean, &p.running_var}) {
        require(v->rank() == 1 && v->dim(0) == channels,
                "batchnorm: parameter length mismatch (channels " + std::to_string(channels) +
                    ")");
    }
    for (float v : p.running_var.values()) {
        require(v >= 0.0f, "batchnorm: running_var must be non-negative");
    }
    require(p.epsilon >= 0.0f, "batchnorm: epsilon must be non-negative");

    const int batch = x.dim(0), height = x.dim(2), width = x.dim(3);
    const int plane = height * width;
    Tensor out(x.shape());
    for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < channels; ++c) {
            const std::size_t ci = static_cast<std::size_t>(c);
            const float mean = p.running_mean.at(ci);
            const float inv = 1.0f / std::sqrt(p.running_var.at(ci) + p.epsilon);
            const float g = p.gamma.at(ci), b = p.beta.at(ci);
            const float* src = x.data() + x.offset(n, c, 0, 0);
            float* dst = out.data() + out.offset(n, c, 0, 0);
            for (int i = 0; i < plane; ++i) {
                dst[i] = g * ((src[i] - mean) * inv) + b;
            }
        }
    }
    return out;
}

ConvParams fold_bn(const ConvParams& conv, const BatchNormParams& bn) {
    const int cout = conv.kernel.dim(0);
    require(bn.gamma.rank() == 1 && bn.gamma.dim(0) == cout,
            "fold_bn: batch norm channel count " + std::to_string(bn.gamma.dim(0)) +
                " != conv output channels " + std::to_string(cout));
    for (const Tensor* v : {&bn.beta, &bn.running_mean, &bn.running_var}) {
        require(v->dim(0) == cout, "fold_bn: parameter length mismatch");
    }

    ConvParams folded;
    folded.stride = conv.stride;
    folded.pad = conv.pad;
    Tensor kernel(conv.kernel.shape(), std::vector<float>(conv.kernel.values().begin(),
                                                          conv.kernel.values().end()));
    Tensor bias({cout});
    const std::size_t per_filter = conv.kernel.size() / static_cast<std::size_t>(cout);
    for (int oc = 0; oc < cout; ++oc) {
        const std::size_t ci = static_cast<std::size_t>(oc);
        const double scale =
            static_cast<double>(bn.gamma.at(ci)) /
            std::sqrt(static_cast<double>(bn.running_var.at(ci)) + bn.epsilon);
        float* w = kernel.data() + ci * per_filter;
        for (std::size_t i = 0; i < per_filter; ++i) {
            w[i] = static_cast<float>(w[i] * scale);
        }
        double b = static_cast<double>(bn.beta.at(ci)) - bn.running_mean.at(ci) * scale;
        if (conv.bias) b += conv.bias->at(ci) * scale;
        bias.at(ci) = static_cast<float>(b);
    }
    folded.kernel = std::move(kernel);
    folded.bias = std::move(bias);
    return folded;
}

Tensor prelu(const Tensor& x, const PReLUParams& p) {
    require(x.rank() == 4, "prelu: input must be rank-4");
    const int channels = x.dim(1);
    require(p.slopes.rank() == 1 && p.slopes.dim(0) == channels,
            "prelu: slope count " + std::to_string(p.slopes.dim(0)) + " != channels " +
                std::to_string(channels));
    for (float s : p.slopes.values()) {
        require(std::isfinite(s), "prelu: slopes must be finite");
    }

    const int batch = x.dim(0), plane = x.dim(2) * x.dim(3);
    Tensor out(x.shape());
    for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < channels; ++c) {
            const float slope = p.slopes.at(static_cast<std::size_t>(c));
            const float* src = x.data() + x.offset(n, c, 0, 0);
            float* dst = out.data() + out.offset(n, c, 0, 0);
            for (int i = 0; i < plane; ++i) {
                dst[i] = src[i] >= 0.0f ? src[i] : slope * src[i];
            }
        }
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float v = x.at(i);
        out.at(i) = v > 0.0f ? v : 0.0f;
    }
    return out;
}

Tensor fully_connected(const Tensor& x, const FcParams& p) {
    require(x.rank() == 1, "fully_connected: input must be rank-1");
    require(p.weight.rank() == 2, "fully_connected: weight must be rank-2");
    const int out_dim = p.weight.dim(0), in_dim = p.weight.dim(1);
    require(x.dim(0) == in_dim, "fully_connected: input length " + std::to_string(x.dim(0)) +
                                    " != weight in_dim " + std::to_string(in_dim));
    require(p.bias.rank() == 1 && p.bias.dim(0) == out_dim,
            "fully_connected: bias length mismatch");

    Tensor out({out_dim});
    const float* xv = x.data();
    for (int o = 0; o < out_dim; ++o) {
        const float* w = p.weight.data() + static_cast<std::size_t>(o) * in_dim;
        float acc = 0.0f;
        for (int i = 0; i < in_dim; ++i) {
            acc += w[i] * xv[i];
        }
        out.at(static_cast<std::size_t>(o)) = acc + p.bias.at(static_cast<std::size_t>(o));
    }
    return out;
}

Tensor residual_add(const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y)) {
        throw std::invalid_argument("residual_add: shape mismatch " + shape_string(x.shape()) +
                                    " vs " + shape_string(y.shape()));
    }
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.at(i) = x.at(i) + y.at(i);
    }
    return out;
}

Tensor flatten(const Tensor& x) {
    require(x.rank() == 4, "flatten: input must be rank-4, got rank " + std::to_string(x.rank()));
    const int batch = x.dim(0);
    const int per_sample = x.dim(1) * x.dim(2) * x.dim(3);
    Tensor out({batch, per_sample},
               std::vector<float>(x.values().begin(), x.values().end()));
    return out;
}

}  // namespace mobiface
