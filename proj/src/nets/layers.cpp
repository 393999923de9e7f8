#include "mmseg/nets/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmseg/kernels/kernels.hpp"

namespace mmseg {

Conv3d::Conv3d(int in_channels, int out_channels, int kernel, int stride_, int pad_)
    : in_c(in_channels),
      out_c(out_channels),
      k(kernel),
      stride(stride_),
      pad(pad_),
      w({out_channels, in_channels, kernel, kernel, kernel}),
      b({out_channels}),
      gw({out_channels, in_channels, kernel, kernel, kernel}),
      gb({out_channels}) {}

void Conv3d::init_params(Rng& rng) {
    // He initialization
    const double fan_in = static_cast<double>(in_c) * k * k * k;
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, std_dev);
    b.zero();
}

void Conv3d::zero_grad() {
    gw.zero();
    gb.zero();
}

std::vector<int> Conv3d::out_shape(const std::vector<int>& in_shape) const {
    if (in_shape.size() != 4 || in_shape[0] != in_c)
        throw std::invalid_argument("Conv3d: input must be (in_c,D,H,W)");
    std::vector<int> out = {out_c, 0, 0, 0};
    for (int axis = 0; axis < 3; ++axis) {
        const int extent = in_shape[axis + 1] + 2 * pad - k;
        if (extent < 0 || extent % stride != 0)
            throw std::invalid_argument("Conv3d: spatial extent incompatible with kernel/stride");
        out[axis + 1] = extent / stride + 1;
    }
    return out;
}

Tensor Conv3d::forward(const Tensor& x) const {
    const auto& in_shape = x.shape();
    const auto oshape = out_shape(in_shape);
    const int D = in_shape[1], H = in_shape[2], W = in_shape[3];
    const int Do = oshape[1], Ho = oshape[2], Wo = oshape[3];
    Tensor y(oshape);

    const std::size_t x_ch = static_cast<std::size_t>(D) * H * W;
    const std::size_t y_ch = static_cast<std::size_t>(Do) * Ho * Wo;

    for (int oc = 0; oc < out_c; ++oc) {
        double* ybase = y.data() + oc * y_ch;
        const double bias = b[oc];
        for (std::size_t i = 0; i < y_ch; ++i) ybase[i] = bias;
    }

    if (stride == 1) {
        for (int oc = 0; oc < out_c; ++oc) {
            double* ybase = y.data() + oc * y_ch;
            for (int ic = 0; ic < in_c; ++ic) {
                const double* xbase = x.data() + ic * x_ch;
                const double* wbase =
                    w.data() + (static_cast<std::size_t>(oc) * in_c + ic) * k * k * k;
                for (int kd = 0; kd < k; ++kd) {
                    for (int kh = 0; kh < k; ++kh) {
                        for (int kw = 0; kw < k; ++kw) {
                            const double wv = wbase[(kd * k + kh) * k + kw];
                            if (wv == 0.0) continue;
                            const int ow0 = std::max(0, pad - kw);
                            const int ow1 = std::min(Wo, W + pad - kw);
                            if (ow0 >= ow1) continue;
                            for (int od = 0; od < Do; ++od) {
                                const int id = od + kd - pad;
                                if (id < 0 || id >= D) continue;
                                for (int oh = 0; oh < Ho; ++oh) {
                                    const int ih = oh + kh - pad;
                                    if (ih < 0 || ih >= H) continue;
                                    double* yrow =
                                        ybase + (static_cast<std::size_t>(od) * Ho + oh) * Wo;
                                    const double* xrow =
                                        xbase + (static_cast<std::size_t>(id) * H + ih) * W +
                                        (ow0 + kw - pad);
                                    kernels::axpy(static_cast<std::size_t>(ow1 - ow0), wv,
                                                  xrow, yrow + ow0);
                                }
                            }
                        }
                    }
                }
            }
        }
        return y;
    }

    // generic strided path
    for (int oc = 0; oc < out_c; ++oc) {
        double* ybase = y.data() + oc * y_ch;
        for (int ic = 0; ic < in_c; ++ic) {
            const double* xbase = x.data() + ic * x_ch;
            const double* wbase =
                w.data() + (static_cast<std::size_t>(oc) * in_c + ic) * k * k * k;
            for (int od = 0; od < Do; ++od) {
                for (int oh = 0; oh < Ho; ++oh) {
                    for (int ow = 0; ow < Wo; ++ow) {
                        double acc = 0.0;
                        for (int kd = 0; kd < k; ++kd) {
                            const int id = od * stride + kd - pad;
                            if (id < 0 || id >= D) continue;
                            for (int kh = 0; kh < k; ++kh) {
                                const int ih = oh * stride + kh - pad;
                                if (ih < 0 || ih >= H) continue;
                                for (int kw = 0; kw < k; ++kw) {
                                    const int iw = ow * stride + kw - pad;
                                    if (iw < 0 || iw >= W) continue;
                                    acc += wbase[(kd * k + kh) * k + kw] *
                                           xbase[(static_cast<std::size_t>(id) * H + ih) * W + iw];
                                }
                            }
                        }
                        ybase[(static_cast<std::size_t>(od) * Ho + oh) * Wo + ow] += acc;
                    }
                }
            }
        }
    }
    return y;
}

Tensor Conv3d::backward(const Tensor& x, const Tensor& gy) {
    const auto& in_shape = x.shape();
    const auto oshape = out_shape(in_shape);
    if (gy.shape() != oshape)
        throw std::invalid_argument("Conv3d::backward: gradient shape mismatch");
    const int D = in_shape[1], H = in_shape[2], W = in_shape[3];
    const int Do = oshape[1], Ho = oshape[2], Wo = oshape[3];
    Tensor gx(in_shape);

    const std::size_t x_ch = static_cast<std::size_t>(D) * H * W;
    const std::size_t y_ch = static_cast<std::size_t>(Do) * Ho * Wo;

    for (int oc = 0; oc < out_c; ++oc) {
        gb[oc] += kernels::sum(y_ch, gy.data() + oc * y_ch);
    }

    if (stride == 1) {
        for (int oc = 0; oc < out_c; ++oc) {
            const double* gybase = gy.data() + oc * y_ch;
            for (int ic = 0; ic < in_c; ++ic) {
                const double* xbase = x.data() + ic * x_ch;
                double* gxbase = gx.data() + ic * x_ch;
                const std::size_t woff =
                    (static_cast<std::size_t>(oc) * in_c + ic) * k * k * k;
                for (int kd = 0; kd < k; ++kd) {
                    for (int kh = 0; kh < k; ++kh) {
                        for (int kw = 0; kw < k; ++kw) {
                            const double wv = w[woff + (kd * k + kh) * k + kw];
                            double wgrad = 0.0;
                            const int ow0 = std::max(0, pad - kw);
                            const int ow1 = std::min(Wo, W + pad - kw);
                            if (ow0 >= ow1) continue;
                            const std::size_t len = static_cast<std::size_t>(ow1 - ow0);
                            for (int od = 0; od < Do; ++od) {
                                const int id = od + kd - pad;
                                if (id < 0 || id >= D) continue;
                                for (int oh = 0; oh < Ho; ++oh) {
                                    const int ih = oh + kh - pad;
                                    if (ih < 0 || ih >= H) continue;
                                    const double* gyrow =
                                        gybase + (static_cast<std::size_t>(od) * Ho + oh) * Wo +
                                        ow0;
                                    const std::size_t xoff =
                                        (static_cast<std::size_t>(id) * H + ih) * W +
                                        (ow0 + kw - pad);
                                    wgrad += kernels::dot(len, xbase + xoff, gyrow);
                                    kernels::axpy(len, wv, gyrow, gxbase + xoff);
                                }
                            }
                            gw[woff + (kd * k + kh) * k + kw] += wgrad;
                        }
                    }
                }
            }
        }
        return gx;
    }

    for (int oc = 0; oc < out_c; ++oc) {
        const double* gybase = gy.data() + oc * y_ch;
        for (int ic = 0; ic < in_c; ++ic) {
            const double* xbase = x.data() + ic * x_ch;
            double* gxbase = gx.data() + ic * x_ch;
            const std::size_t woff = (static_cast<std::size_t>(oc) * in_c + ic) * k * k * k;
            for (int od = 0; od < Do; ++od) {
                for (int oh = 0; oh < Ho; ++oh) {
                    for (int ow = 0; ow < Wo; ++ow) {
                        const double g =
                            gybase[(static_cast<std::size_t>(od) * Ho + oh) * Wo + ow];
                        if (g == 0.0) continue;
                        for (int kd = 0; kd < k; ++kd) {
                            const int id = od * stride + kd - pad;
                            if (id < 0 || id >= D) continue;
                            for (int kh = 0; kh < k; ++kh) {
                                const int ih = oh * stride + kh - pad;
                                if (ih < 0 || ih >= H) continue;
                                for (int kw = 0; kw < k; ++kw) {
                                    const int iw = ow * stride + kw - pad;
                                    if (iw < 0 || iw >= W) continue;
                                    const std::size_t xoff =
                                        (static_cast<std::size_t>(id) * H + ih) * W + iw;
                                    gw[woff + (kd * k + kh) * k + kw] += xbase[xoff] * g;
                                    gxbase[xoff] += w[woff + (kd * k + kh) * k + kw] * g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return gx;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    kernels::relu_forward(x.numel(), x.data(), y.data());
    return y;
}

Tensor relu_grad(const Tensor& x, const Tensor& gy) {
    x.require_same_shape(gy, "relu_grad");
    Tensor gx(x.shape());
    kernels::relu_backward(x.numel(), x.data(), gy.data(), gx.data());
    return gx;
}

Tensor upsample2(const Tensor& x) {
    const auto& s = x.shape();
    if (s.size() != 4) throw std::invalid_argument("upsample2: input must be 4D");
    const int C = s[0], D = s[1], H = s[2], W = s[3];
    Tensor y({C, 2 * D, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c) {
        for (int z = 0; z < 2 * D; ++z) {
            for (int yy = 0; yy < 2 * H; ++yy) {
                const double* xrow =
                    x.data() + ((static_cast<std::size_t>(c) * D + z / 2) * H + yy / 2) * W;
                double* yrow =
                    y.data() +
                    ((static_cast<std::size_t>(c) * 2 * D + z) * 2 * H + yy) * 2 * W;
                for (int xx = 0; xx < W; ++xx) {
                    yrow[2 * xx] = xrow[xx];
                    yrow[2 * xx + 1] = xrow[xx];
                }
            }
        }
    }
    return y;
}

Tensor upsample2_grad(const std::vector<int>& in_shape, const Tensor& gy) {
    if (in_shape.size() != 4) throw std::invalid_argument("upsample2_grad: bad shape");
    const int C = in_shape[0], D = in_shape[1], H = in_shape[2], W = in_shape[3];
    if (gy.shape() != std::vector<int>{C, 2 * D, 2 * H, 2 * W})
        throw std::invalid_argument("upsample2_grad: gradient shape mismatch");
    Tensor gx(in_shape);
    for (int c = 0; c < C; ++c) {
        for (int z = 0; z < 2 * D; ++z) {
            for (int yy = 0; yy < 2 * H; ++yy) {
                double* gxrow =
                    gx.data() + ((static_cast<std::size_t>(c) * D + z / 2) * H + yy / 2) * W;
                const double* gyrow =
                    gy.data() +
                    ((static_cast<std::size_t>(c) * 2 * D + z) * 2 * H + yy) * 2 * W;
                for (int xx = 0; xx < W; ++xx) {
                    gxrow[xx] += gyrow[2 * xx] + gyrow[2 * xx + 1];
                }
            }
        }
    }
    return gx;
}

}  // namespace mmseg
