#include "mobiface/oracle.hpp"

#include <stdexcept>
#include <string>

namespace mobiface::oracle {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("oracle: " + msg);
}

}  // namespace

Tensor naive_conv2d(const Tensor& x, const ConvParams& p) {
    require(x.rank() == 4, "input must be rank-4");
    require(p.kernel.rank() == 4, "kernel must be rank-4");
    const int batch = x.dim(0), cin = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
    const int cout = p.kernel.dim(0), k_h = p.kernel.dim(2), k_w = p.kernel.dim(3);
    require(k_h == k_w, "kernel must be square");
    require(p.kernel.dim(1) == cin, "kernel channel count " + std::to_string(p.kernel.dim(1)) +
                                        " != input channels " + std::to_string(cin));
    require(p.stride >= 1 && p.pad >= 0, "bad stride/pad");
    if (p.bias) require(p.bias->rank() == 1 && p.bias->dim(0) == cout, "bias length mismatch");

    const int out_h = (in_h + 2 * p.pad - k_h) / p.stride + 1;
    const int out_w = (in_w + 2 * p.pad - k_w) / p.stride + 1;
    require(in_h + 2 * p.pad >= k_h && in_w + 2 * p.pad >= k_w && out_h >= 1 && out_w >= 1,
            "output dimension < 1");

    Tensor out({batch, cout, out_h, out_w});
    for (int n = 0; n < batch; ++n) {
        for (int oc = 0; oc < cout; ++oc) {
            for (int oh = 0; oh < out_h; ++oh) {
                for (int ow = 0; ow < out_w; ++ow) {
                    float acc = 0.0f;
                    for (int c = 0; c < cin; ++c) {
                        for (int kh = 0; kh < k_h; ++kh) {
                            for (int kw = 0; kw < k_w; ++kw) {
                                const int ih = oh * p.stride + kh - p.pad;
                                const int iw = ow * p.stride + kw - p.pad;
                                float v = 0.0f;
                                if (ih >= 0 && ih < in_h && iw >= 0 && iw < in_w) {
                                    v = x.at(n, c, ih, iw);
                                }
                                acc += v * p.kernel.at(oc, c, kh, kw);
                            }
                        }
                    }
                    if (p.bias) acc += p.bias->at(static_cast<std::size_t>(oc));
                    out.at(n, oc, oh, ow) = acc;
                }
            }
        }
    }
    return out;
}

Tensor naive_dwconv2d(const Tensor& x, const DwConvParams& p) {
    require(x.rank() == 4, "input must be rank-4");
    require(p.kernel.rank() == 4, "kernel must be rank-4");
    const int batch = x.dim(0), channels = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
    const int k_h = p.kernel.dim(2), k_w = p.kernel.dim(3);
    require(k_h == k_w, "kernel must be square");
    require(p.kernel.dim(0) == channels && p.kernel.dim(1) == 1,
            "kernel channel count " + std::to_string(p.kernel.dim(0)) + " != input channels " +
                std::to_string(channels));
    require(p.stride >= 1 && p.pad >= 0, "bad stride/pad");

    const int out_h = (in_h + 2 * p.pad - k_h) / p.stride + 1;
    const int out_w = (in_w + 2 * p.pad - k_w) / p.stride + 1;
    require(in_h + 2 * p.pad >= k_h && in_w + 2 * p.pad >= k_w && out_h >= 1 && out_w >= 1,
            "output dimension < 1");

    Tensor out({batch, channels, out_h, out_w});
    for (int n = 0; n < batch; ++n) {
        for (int c = 0; c < channels; ++c) {
            for (int oh = 0; oh < out_h; ++oh) {
                for (int ow = 0; ow < out_w; ++ow) {
                    float acc = 0.0f;
                    for (int kh = 0; kh < k_h; ++kh) {
                        for (int kw = 0; kw < k_w; ++kw) {
                            const int ih = oh * p.stride + kh - p.pad;
                            const int iw = ow * p.stride + kw - p.pad;
                            float v = 0.0f;
                            if (ih >= 0 && ih < in_h && iw >= 0 && iw < in_w) {
                                v = x.at(n, c, ih, iw);
                            }
                            acc += v * p.kernel.at(c, 0, kh, kw);
                        }
                    }
                    out.at(n, c, oh, ow) = acc;
                }
            }
        }
    }
    return out;
}

Tensor naive_fc(const Tensor& x, const FcParams& p) {
    require(x.rank() == 1, "input must be rank-1");
    require(p.weight.rank() == 2, "weight must be rank-2");
    const int out_dim = p.weight.dim(0), in_dim = p.weight.dim(1);
    require(x.dim(0) == in_dim, "input length " + std::to_string(x.dim(0)) +
                                    " != weight in_dim " + std::to_string(in_dim));
    require(p.bias.rank() == 1 && p.bias.dim(0) == out_dim, "bias length mismatch");

    Tensor out({out_dim});
    for (int o = 0; o < out_dim; ++o) {
        float acc = 0.0f;
        for (int i = 0; i < in_dim; ++i) {
            acc += p.weight.at(static_cast<std::size_t>(o) * in_dim + i) *
                   x.at(static_cast<std::size_t>(i));
        }
        out.at(static_cast<std::size_t>(o)) = acc + p.bias.at(static_cast<std::size_t>(o));
    }
    return out;
}

}  // namespace mobiface::oracle
