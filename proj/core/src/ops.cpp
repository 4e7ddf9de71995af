#include "dopplerkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "dopplerkit/errors.hpp"
#include "gemm.hpp"

namespace dopplerkit {

namespace {

void require_4d(const TensorRef& t, const char* who) {
    if (!t || t->shape.size() != 4) throw DimensionError(std::string(who) + ": expected a 4-D tensor");
}

bool wants_grad(Tape* tape, std::initializer_list<const TensorRef*> inputs) {
    if (!tape) return false;
    for (const TensorRef* t : inputs)
        if ((*t)->requires_grad) return true;
    return false;
}

TensorRef make_output(std::vector<int> shape, bool rec) {
    auto out = make_tensor(std::move(shape), rec);
    return out;
}

// Mirror (reflect-101) index into [0, n).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

// Direct stride-1 kernels: every (o, c, i, j) tap is one contiguous
// row-by-row multiply-accumulate sweep, so no patch matrix is materialized.

struct TapRange {
    int y0, y1, x0, x1, dy, dx;
};

inline TapRange tap_range(int i, int j, int pad, int H, int W, int Ho, int Wo) {
    TapRange r;
    r.dy = i - pad;
    r.dx = j - pad;
    r.y0 = std::max(0, -r.dy);
    r.y1 = std::min(Ho, H - r.dy);
    r.x0 = std::max(0, -r.dx);
    r.x1 = std::min(Wo, W - r.dx);
    return r;
}

void direct_conv_fwd(const double* x, const double* w, const double* b, double* y, int C, int H,
                     int W, int O, int k, int pad, int Ho, int Wo) {
    for (int o = 0; o < O; ++o) {
        double* yplane = y + static_cast<std::size_t>(o) * Ho * Wo;
        std::fill(yplane, yplane + static_cast<std::size_t>(Ho) * Wo, b[o]);
        for (int c = 0; c < C; ++c) {
            const double* xplane = x + static_cast<std::size_t>(c) * H * W;
            const double* wrow = w + (static_cast<std::size_t>(o) * C + c) * k * k;
            if (k == 3 && pad == 1 && Ho == H && Wo == W) {
                // fused nine-tap sweep, one pass over the plane per (o, c)
                for (int yy = 0; yy < H; ++yy) {
                    double* yrow = yplane + static_cast<std::size_t>(yy) * W;
                    for (int i = 0; i < 3; ++i) {
                        const int iy = yy + i - 1;
                        if (iy < 0 || iy >= H) continue;
                        const double* xrow = xplane + static_cast<std::size_t>(iy) * W;
                        const double w0 = wrow[i * 3], w1 = wrow[i * 3 + 1], w2 = wrow[i * 3 + 2];
                        yrow[0] += w1 * xrow[0] + w2 * xrow[1];
                        int xx = 1;
#ifdef DOPPLERKIT_GEMM_AVX2
                        const __m256d vw0 = _mm256_set1_pd(w0);
                        const __m256d vw1 = _mm256_set1_pd(w1);
                        const __m256d vw2 = _mm256_set1_pd(w2);
                        for (; xx + 4 <= W - 1; xx += 4) {
                            __m256d acc = _mm256_loadu_pd(yrow + xx);
                            acc = _mm256_fmadd_pd(vw0, _mm256_loadu_pd(xrow + xx - 1), acc);
                            acc = _mm256_fmadd_pd(vw1, _mm256_loadu_pd(xrow + xx), acc);
                            acc = _mm256_fmadd_pd(vw2, _mm256_loadu_pd(xrow + xx + 1), acc);
                            _mm256_storeu_pd(yrow + xx, acc);
                        }
#endif
                        for (; xx < W - 1; ++xx)
                            yrow[xx] += w0 * xrow[xx - 1] + w1 * xrow[xx] + w2 * xrow[xx + 1];
                        yrow[W - 1] += w0 * xrow[W - 2] + w1 * xrow[W - 1];
                    }
                }
                continue;
            }
            if (k == 1) {
                const double wv = wrow[0];
                for (int p = 0; p < H * W; ++p) yplane[p] += wv * xplane[p];
                continue;
            }
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) {
                    const double wv = wrow[i * k + j];
                    const TapRange r = tap_range(i, j, pad, H, W, Ho, Wo);
                    for (int yy = r.y0; yy < r.y1; ++yy) {
                        double* yrow = yplane + static_cast<std::size_t>(yy) * Wo;
                        const double* xrow = xplane + static_cast<std::size_t>(yy + r.dy) * W + r.dx;
                        for (int xx = r.x0; xx < r.x1; ++xx) yrow[xx] += wv * xrow[xx];
                    }
                }
            }
        }
    }
}

void direct_conv_dx(double* dx, const double* w, const double* dy, int C, int H, int W, int O,
                    int k, int pad, int Ho, int Wo) {
    for (int c = 0; c < C; ++c) {
        double* dxplane = dx + static_cast<std::size_t>(c) * H * W;
        for (int o = 0; o < O; ++o) {
            const double* dyplane = dy + static_cast<std::size_t>(o) * Ho * Wo;
            const double* wrow = w + (static_cast<std::size_t>(o) * C + c) * k * k;
            if (k == 3 && pad == 1 && Ho == H && Wo == W) {
                // gather form of the nine-tap sweep: dx[yy][xx] pulls from the
                // dy rows that used it, with the kernel indices mirrored
                for (int yy = 0; yy < H; ++yy) {
                    double* dxrow = dxplane + static_cast<std::size_t>(yy) * W;
                    for (int i = 0; i < 3; ++i) {
                        const int sy = yy - (i - 1);
                        if (sy < 0 || sy >= H) continue;
                        const double* dyrow = dyplane + static_cast<std::size_t>(sy) * W;
                        const double w0 = wrow[i * 3], w1 = wrow[i * 3 + 1], w2 = wrow[i * 3 + 2];
                        dxrow[0] += w1 * dyrow[0] + w0 * dyrow[1];
                        int xx = 1;
#ifdef DOPPLERKIT_GEMM_AVX2
                        const __m256d vw0 = _mm256_set1_pd(w0);
                        const __m256d vw1 = _mm256_set1_pd(w1);
                        const __m256d vw2 = _mm256_set1_pd(w2);
                        for (; xx + 4 <= W - 1; xx += 4) {
                            __m256d acc = _mm256_loadu_pd(dxrow + xx);
                            acc = _mm256_fmadd_pd(vw2, _mm256_loadu_pd(dyrow + xx - 1), acc);
                            acc = _mm256_fmadd_pd(vw1, _mm256_loadu_pd(dyrow + xx), acc);
                            acc = _mm256_fmadd_pd(vw0, _mm256_loadu_pd(dyrow + xx + 1), acc);
                            _mm256_storeu_pd(dxrow + xx, acc);
                        }
#endif
                        for (; xx < W - 1; ++xx)
                            dxrow[xx] += w2 * dyrow[xx - 1] + w1 * dyrow[xx] + w0 * dyrow[xx + 1];
                        dxrow[W - 1] += w2 * dyrow[W - 2] + w1 * dyrow[W - 1];
                    }
                }
                continue;
            }
            if (k == 1) {
                const double wv = wrow[0];
                for (int p = 0; p < H * W; ++p) dxplane[p] += wv * dyplane[p];
                continue;
            }
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) {
                    const double wv = wrow[i * k + j];
                    const TapRange r = tap_range(i, j, pad, H, W, Ho, Wo);
                    for (int yy = r.y0; yy < r.y1; ++yy) {
                        double* dxrow = dxplane + static_cast<std::size_t>(yy + r.dy) * W + r.dx;
                        const double* dyrow = dyplane + static_cast<std::size_t>(yy) * Wo;
                        for (int xx = r.x0; xx < r.x1; ++xx) dxrow[xx] += wv * dyrow[xx];
                    }
                }
            }
        }
    }
}

void direct_conv_dwdb(const double* x, const double* dy, double* dw, double* db, bool want_dw,
                      bool want_db, int C, int H, int W, int O, int k, int pad, int Ho, int Wo) {
    for (int o = 0; o < O; ++o) {
        const double* dyplane = dy + static_cast<std::size_t>(o) * Ho * Wo;
        if (want_db) {
            double acc = 0.0;
            for (int p = 0; p < Ho * Wo; ++p) acc += dyplane[p];
            db[o] += acc;
        }
        if (!want_dw) continue;
        for (int c = 0; c < C; ++c) {
            const double* xplane = x + static_cast<std::size_t>(c) * H * W;
            double* dwrow = dw + (static_cast<std::size_t>(o) * C + c) * k * k;
            if (k == 3 && pad == 1 && Ho == H && Wo == W) {
                double acc[9] = {};
                for (int yy = 0; yy < H; ++yy) {
                    const double* dyrow = dyplane + static_cast<std::size_t>(yy) * W;
                    for (int i = 0; i < 3; ++i) {
                        const int iy = yy + i - 1;
                        if (iy < 0 || iy >= H) continue;
                        const double* xrow = xplane + static_cast<std::size_t>(iy) * W;
                        double a0 = 0.0, a1 = 0.0, a2 = 0.0;
                        int xx = 1;
#ifdef DOPPLERKIT_GEMM_AVX2
                        __m256d v0 = _mm256_setzero_pd(), v1 = _mm256_setzero_pd(),
                                v2 = _mm256_setzero_pd();
                        for (; xx + 4 <= W - 1; xx += 4) {
                            const __m256d g = _mm256_loadu_pd(dyrow + xx);
                            v0 = _mm256_fmadd_pd(g, _mm256_loadu_pd(xrow + xx - 1), v0);
                            v1 = _mm256_fmadd_pd(g, _mm256_loadu_pd(xrow + xx), v1);
                            v2 = _mm256_fmadd_pd(g, _mm256_loadu_pd(xrow + xx + 1), v2);
                        }
                        a0 = detail::hsum(v0);
                        a1 = detail::hsum(v1);
                        a2 = detail::hsum(v2);
#endif
                        for (; xx < W - 1; ++xx) {
                            const double g = dyrow[xx];
                            a0 += g * xrow[xx - 1];
                            a1 += g * xrow[xx];
                            a2 += g * xrow[xx + 1];
                        }
                        a1 += dyrow[0] * xrow[0] + dyrow[W - 1] * xrow[W - 1];
                        a2 += dyrow[0] * xrow[1];
                        a0 += dyrow[W - 1] * xrow[W - 2];
                        acc[i * 3] += a0;
                        acc[i * 3 + 1] += a1;
                        acc[i * 3 + 2] += a2;
                    }
                }
                for (int t = 0; t < 9; ++t) dwrow[t] += acc[t];
                continue;
            }
            if (k == 1) {
                double acc = 0.0;
                for (int p = 0; p < H * W; ++p) acc += dyplane[p] * xplane[p];
                dwrow[0] += acc;
                continue;
            }
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) {
                    const TapRange r = tap_range(i, j, pad, H, W, Ho, Wo);
                    double acc = 0.0;
                    for (int yy = r.y0; yy < r.y1; ++yy) {
                        const double* dyrow = dyplane + static_cast<std::size_t>(yy) * Wo;
                        const double* xrow = xplane + static_cast<std::size_t>(yy + r.dy) * W + r.dx;
                        for (int xx = r.x0; xx < r.x1; ++xx) acc += dyrow[xx] * xrow[xx];
                    }
                    dwrow[i * k + j] += acc;
                }
            }
        }
    }
}

// positions-major patch matrix: col[p][ (c*k+i)*k+j ] with p = y*Wo + xo
void im2col(const double* x, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo,
            double* col) {
    const int CKK = C * k * k;
    for (int y = 0; y < Ho; ++y) {
        for (int xo = 0; xo < Wo; ++xo) {
            double* row = col + static_cast<std::size_t>(y * Wo + xo) * CKK;
            for (int c = 0; c < C; ++c) {
                const double* plane = x + static_cast<std::size_t>(c) * H * W;
                for (int i = 0; i < k; ++i) {
                    const int iy = y * stride + i - pad;
                    double* dst = row + static_cast<std::size_t>((c * k + i)) * k;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + k, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * W;
                    for (int j = 0; j < k; ++j) {
                        const int ix = xo * stride + j - pad;
                        dst[j] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* col, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo,
            double* dx) {
    const int CKK = C * k * k;
    for (int y = 0; y < Ho; ++y) {
        for (int xo = 0; xo < Wo; ++xo) {
            const double* row = col + static_cast<std::size_t>(y * Wo + xo) * CKK;
            for (int c = 0; c < C; ++c) {
                double* plane = dx + static_cast<std::size_t>(c) * H * W;
                for (int i = 0; i < k; ++i) {
                    const int iy = y * stride + i - pad;
                    if (iy < 0 || iy >= H) continue;
                    const double* src = row + static_cast<std::size_t>((c * k + i)) * k;
                    double* dst = plane + static_cast<std::size_t>(iy) * W;
                    for (int j = 0; j < k; ++j) {
                        const int ix = xo * stride + j - pad;
                        if (ix >= 0 && ix < W) dst[ix] += src[j];
                    }
                }
            }
        }
    }
}

}  // namespace

TensorRef conv2d(Tape* tape, const TensorRef& x, const TensorRef& w, const TensorRef& b,
                 int stride, int padding) {
    require_4d(x, "conv2d input");
    require_4d(w, "conv2d weight");
    if (!b || b->shape.size() != 1) throw DimensionError("conv2d bias: expected a 1-D tensor");
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const int O = w->shape[0], k = w->shape[2];
    if (w->shape[1] != C)
        throw DimensionError("conv2d: weight input channels (" + std::to_string(w->shape[1]) +
                             ") do not match input channels (" + std::to_string(C) + ")");
    if (w->shape[3] != k) throw DimensionError("conv2d: kernel must be square");
    if (b->shape[0] != O) throw DimensionError("conv2d: bias length must equal output channels");
    if (k > H + 2 * padding || k > W + 2 * padding)
        throw DimensionError("conv2d: kernel larger than padded input");

    const int Ho = (H + 2 * padding - k) / stride + 1;
    const int Wo = (W + 2 * padding - k) / stride + 1;
    const int P = Ho * Wo;
    const int CKK = C * k * k;

    const bool rec = wants_grad(tape, {&x, &w, &b});
    auto out = make_output({N, O, Ho, Wo}, rec);

    if (stride == 1) {
        for (int n = 0; n < N; ++n)
            direct_conv_fwd(x->data.data() + static_cast<std::size_t>(n) * C * H * W, w->data.data(),
                            b->data.data(), out->data.data() + static_cast<std::size_t>(n) * O * P,
                            C, H, W, O, k, padding, Ho, Wo);
    } else {
        // strided path: positions-major im2col against weights transposed to [CKK][O]
        std::vector<double> wt(static_cast<std::size_t>(CKK) * O);
        detail::transpose(static_cast<std::size_t>(O), static_cast<std::size_t>(CKK), w->data.data(), wt.data());
        std::vector<double> col(static_cast<std::size_t>(P) * CKK);
        std::vector<double> y_po(static_cast<std::size_t>(P) * O);
        for (int n = 0; n < N; ++n) {
            const double* xn = x->data.data() + static_cast<std::size_t>(n) * C * H * W;
            im2col(xn, C, H, W, k, stride, padding, Ho, Wo, col.data());
            std::fill(y_po.begin(), y_po.end(), 0.0);
            detail::gemm_ab(P, CKK, O, col.data(), wt.data(), y_po.data());
            double* yn = out->data.data() + static_cast<std::size_t>(n) * O * P;
            detail::transpose(static_cast<std::size_t>(P), static_cast<std::size_t>(O), y_po.data(), yn);
            for (int o = 0; o < O; ++o) {
                double* row = yn + static_cast<std::size_t>(o) * P;
                const double bias = b->data[o];
                for (int p = 0; p < P; ++p) row[p] += bias;
            }
        }
    }

    if (rec) {
        tape->record([x, w, b, out, stride, padding, N, C, H, W, O, k, Ho, Wo]() {
            const int P = Ho * Wo;
            const int CKK = C * k * k;
            if (x->requires_grad) x->ensure_grad();
            if (w->requires_grad) w->ensure_grad();
            if (b->requires_grad) b->ensure_grad();
            if (stride == 1) {
                for (int n = 0; n < N; ++n) {
                    const double* dyn = out->grad.data() + static_cast<std::size_t>(n) * O * P;
                    const double* xn = x->data.data() + static_cast<std::size_t>(n) * C * H * W;
                    direct_conv_dwdb(xn, dyn, w->requires_grad ? w->grad.data() : nullptr,
                                     b->requires_grad ? b->grad.data() : nullptr, w->requires_grad,
                                     b->requires_grad, C, H, W, O, k, padding, Ho, Wo);
                    if (x->requires_grad)
                        direct_conv_dx(x->grad.data() + static_cast<std::size_t>(n) * C * H * W,
                                       w->data.data(), dyn, C, H, W, O, k, padding, Ho, Wo);
                }
                return;
            }
            std::vector<double> col(static_cast<std::size_t>(P) * CKK);
            std::vector<double> dy_po(static_cast<std::size_t>(P) * O);
            std::vector<double> dcol;
            if (x->requires_grad) dcol.resize(static_cast<std::size_t>(P) * CKK);
            for (int n = 0; n < N; ++n) {
                const double* dyn = out->grad.data() + static_cast<std::size_t>(n) * O * P;
                detail::transpose(static_cast<std::size_t>(O), static_cast<std::size_t>(P), dyn, dy_po.data());
                if (b->requires_grad) {
                    for (int p = 0; p < P; ++p) {
                        const double* row = dy_po.data() + static_cast<std::size_t>(p) * O;
                        for (int o = 0; o < O; ++o) b->grad[o] += row[o];
                    }
                }
                if (w->requires_grad || x->requires_grad) {
                    const double* xn = x->data.data() + static_cast<std::size_t>(n) * C * H * W;
                    im2col(xn, C, H, W, k, stride, padding, Ho, Wo, col.data());
                }
                if (w->requires_grad)
                    detail::gemm_atb(P, O, CKK, dy_po.data(), col.data(), w->grad.data());
                if (x->requires_grad) {
                    std::fill(dcol.begin(), dcol.end(), 0.0);
                    detail::gemm_ab(P, O, CKK, dy_po.data(), w->data.data(), dcol.data());
                    double* dxn = x->grad.data() + static_cast<std::size_t>(n) * C * H * W;
                    col2im(dcol.data(), C, H, W, k, stride, padding, Ho, Wo, dxn);
                }
            }
        }, out);
    }
    return out;
}

std::vector<double> binomial_kernel(int k) {
    if (k < 1 || k % 2 == 0) throw ConfigError("binomial_kernel: k must be odd and positive");
    std::vector<double> row(k, 0.0);
    row[0] = 1.0;
    for (int n = 1; n < k; ++n)
        for (int i = n; i > 0; --i) row[i] += row[i - 1];
    const double norm = std::pow(2.0, k - 1);
    for (double& v : row) v /= norm;
    return row;
}

TensorRef blur_pool(Tape* tape, const TensorRef& x, int k, int stride) {
    require_4d(x, "blur_pool input");
    if (k % 2 == 0 || k < 1) throw ConfigError("blur_pool: kernel size must be odd");
    if (stride < 1) throw ConfigError("blur_pool: stride must be >= 1");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const int Ho = (H + stride - 1) / stride;
    const int Wo = (W + stride - 1) / stride;
    const int rad = (k - 1) / 2;
    const std::vector<double> kr = binomial_kernel(k);

    const bool rec = wants_grad(tape, {&x});
    auto out = make_output({N, C, Ho, Wo}, rec);

    std::vector<double> tmp1(static_cast<std::size_t>(H) * W), tmp2(static_cast<std::size_t>(H) * W);
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double* src = x->data.data() + x->at(n, c, 0, 0);
            // vertical then horizontal binomial pass, reflect padding
            for (int r = 0; r < H; ++r) {
                double* t1 = tmp1.data() + static_cast<std::size_t>(r) * W;
                std::fill(t1, t1 + W, 0.0);
                for (int i = 0; i < k; ++i) {
                    const double kv = kr[i];
                    const double* srow = src + static_cast<std::size_t>(reflect_index(r + i - rad, H)) * W;
                    for (int cc = 0; cc < W; ++cc) t1[cc] += kv * srow[cc];
                }
            }
            for (int r = 0; r < H; ++r) {
                const double* t1 = tmp1.data() + static_cast<std::size_t>(r) * W;
                double* t2 = tmp2.data() + static_cast<std::size_t>(r) * W;
                for (int cc = 0; cc < W; ++cc) {
                    double acc = 0.0;
                    for (int j = 0; j < k; ++j) acc += kr[j] * t1[reflect_index(cc + j - rad, W)];
                    t2[cc] = acc;
                }
            }
            double* dst = out->data.data() + out->at(n, c, 0, 0);
            for (int y = 0; y < Ho; ++y)
                for (int xo = 0; xo < Wo; ++xo) dst[y * Wo + xo] = tmp2[static_cast<std::size_t>(y) * stride * W + xo * stride];
        }
    }

    if (rec) {
        tape->record([x, out, k, stride, N, C, H, W, Ho, Wo, rad, kr]() {
            x->ensure_grad();
            std::vector<double> d2(static_cast<std::size_t>(H) * W), d1(static_cast<std::size_t>(H) * W);
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    const double* dy = out->grad.data() + out->at(n, c, 0, 0);
                    std::fill(d2.begin(), d2.end(), 0.0);
                    for (int y = 0; y < Ho; ++y)
                        for (int xo = 0; xo < Wo; ++xo)
                            d2[static_cast<std::size_t>(y) * stride * W + xo * stride] += dy[y * Wo + xo];
                    std::fill(d1.begin(), d1.end(), 0.0);
                    for (int r = 0; r < H; ++r) {
                        const double* d2r = d2.data() + static_cast<std::size_t>(r) * W;
                        double* d1r = d1.data() + static_cast<std::size_t>(r) * W;
                        for (int cc = 0; cc < W; ++cc) {
                            const double g = d2r[cc];
                            if (g == 0.0) continue;
                            for (int j = 0; j < k; ++j) d1r[reflect_index(cc + j - rad, W)] += kr[j] * g;
                        }
                    }
                    double* dx = x->grad.data() + x->at(n, c, 0, 0);
                    for (int r = 0; r < H; ++r) {
                        const double* d1r = d1.data() + static_cast<std::size_t>(r) * W;
                        for (int i = 0; i < k; ++i) {
                            const double kv = kr[i];
                            double* dxr = dx + static_cast<std::size_t>(reflect_index(r + i - rad, H)) * W;
                            for (int cc = 0; cc < W; ++cc) dxr[cc] += kv * d1r[cc];
                        }
                    }
                }
            }
        }, out);
    }
    return out;
}

TensorRef max_pool(Tape* tape, const TensorRef& x, int window, int stride) {
    require_4d(x, "max_pool input");
    if (window < 1 || stride < 1) throw ConfigError("max_pool: window and stride must be >= 1");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    if (window > H || window > W) throw DimensionError("max_pool: window exceeds spatial dims");
    const int Ho = (H - window) / stride + 1;
    const int Wo = (W - window) / stride + 1;

    const bool rec = wants_grad(tape, {&x});
    auto out = make_output({N, C, Ho, Wo}, rec);
    auto arg = std::make_shared<std::vector<std::size_t>>();
    if (rec) arg->resize(out->numel());

    std::size_t oi = 0;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y < Ho; ++y) {
                for (int xo = 0; xo < Wo; ++xo, ++oi) {
                    double best = -1.0;
                    std::size_t best_idx = 0;
                    bool first = true;
                    for (int i = 0; i < window; ++i) {
                        for (int j = 0; j < window; ++j) {
                            const std::size_t idx = x->at(n, c, y * stride + i, xo * stride + j);
                            const double v = x->data[idx];
                            if (first || v > best) {
                                best = v;
                                best_idx = idx;
                                first = false;
                            }
                        }
                    }
                    out->data[oi] = best;
                    if (rec) (*arg)[oi] = best_idx;
                }
            }
        }
    }

    if (rec) {
        tape->record([x, out, arg]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[(*arg)[i]] += out->grad[i];
        }, out);
    }
    return out;
}

TensorRef upsample_nearest2x(Tape* tape, const TensorRef& x) {
    require_4d(x, "upsample_nearest2x input");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const bool rec = wants_grad(tape, {&x});
    auto out = make_output({N, C, 2 * H, 2 * W}, rec);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double v = x->data[x->at(n, c, h, w)];
                    out->data[out->at(n, c, 2 * h, 2 * w)] = v;
                    out->data[out->at(n, c, 2 * h, 2 * w + 1)] = v;
                    out->data[out->at(n, c, 2 * h + 1, 2 * w)] = v;
                    out->data[out->at(n, c, 2 * h + 1, 2 * w + 1)] = v;
                }
    if (rec) {
        tape->record([x, out, N, C, H, W]() {
            x->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    for (int h = 0; h < H; ++h)
                        for (int w = 0; w < W; ++w)
                            x->grad[x->at(n, c, h, w)] +=
                                out->grad[out->at(n, c, 2 * h, 2 * w)] +
                                out->grad[out->at(n, c, 2 * h, 2 * w + 1)] +
                                out->grad[out->at(n, c, 2 * h + 1, 2 * w)] +
                                out->grad[out->at(n, c, 2 * h + 1, 2 * w + 1)];
        }, out);
    }
    return out;
}

TensorRef global_avg_pool(Tape* tape, const TensorRef& x) {
    require_4d(x, "global_avg_pool input");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const double inv = 1.0 / (static_cast<double>(H) * W);
    const bool rec = wants_grad(tape, {&x});
    auto out = make_output({N, C, 1, 1}, rec);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double* src = x->data.data() + x->at(n, c, 0, 0);
            double acc = 0.0;
            for (int i = 0; i < H * W; ++i) acc += src[i];
            out->data[static_cast<std::size_t>(n) * C + c] = acc * inv;
        }
    if (rec) {
        tape->record([x, out, N, C, H, W, inv]() {
            x->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const double g = out->grad[static_cast<std::size_t>(n) * C + c] * inv;
                    double* dst = x->grad.data() + x->at(n, c, 0, 0);
                    for (int i = 0; i < H * W; ++i) dst[i] += g;
                }
        }, out);
    }
    return out;
}

TensorRef relu(Tape* tape, const TensorRef& x) {
    const bool rec = wants_grad(tape, {&x});
    auto out = make_output(x->shape, rec);
    for (std::size_t i = 0; i < x->numel(); ++i) out->data[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
    if (rec) {
        tape->record([x, out]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->numel(); ++i)
                if (x->data[i] > 0.0) x->grad[i] += out->grad[i];
        }, out);
    }
    return out;
}

TensorRef sigmoid(Tape* tape, const TensorRef& x) {
    const bool rec = wants_grad(tape, {&x});
    auto out = make_output(x->shape, rec);
    for (std::size_t i = 0; i < x->numel(); ++i) out->data[i] = 1.0 / (1.0 + std::exp(-x->data[i]));
    if (rec) {
        tape->record([x, out]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->numel(); ++i) {
                const double s = out->data[i];
                x->grad[i] += out->grad[i] * s * (1.0 - s);
            }
        }, out);
    }
    return out;
}

TensorRef add(Tape* tape, const TensorRef& a, const TensorRef& b) {
    const bool rec = wants_grad(tape, {&a, &b});
    if (a->shape == b->shape) {
        auto out = make_output(a->shape, rec);
        for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] + b->data[i];
        if (rec) {
            tape->record([a, b, out]() {
                if (a->requires_grad) {
                    a->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
                }
            }, out);
        }
        return out;
    }
    // broadcast: one side N x C x 1 x 1 against N x C x H x W
    const bool b_is_context = a->shape.size() == 4 && b->shape.size() == 4 && b->shape[2] == 1 &&
                              b->shape[3] == 1 && a->shape[0] == b->shape[0] && a->shape[1] == b->shape[1];
    const bool a_is_context = a->shape.size() == 4 && b->shape.size() == 4 && a->shape[2] == 1 &&
                              a->shape[3] == 1 && a->shape[0] == b->shape[0] && a->shape[1] == b->shape[1];
    if (!b_is_context && !a_is_context) throw DimensionError("add: incompatible shapes");
    const TensorRef& full = b_is_context ? a : b;
    const TensorRef& ctx = b_is_context ? b : a;
    const int N = full->shape[0], C = full->shape[1], H = full->shape[2], W = full->shape[3];
    auto out = make_output(full->shape, rec);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double v = ctx->data[static_cast<std::size_t>(n) * C + c];
            const double* src = full->data.data() + full->at(n, c, 0, 0);
            double* dst = out->data.data() + out->at(n, c, 0, 0);
            for (int i = 0; i < H * W; ++i) dst[i] = src[i] + v;
        }
    if (rec) {
        tape->record([full, ctx, out, N, C, H, W]() {
            if (full->requires_grad) {
                full->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) full->grad[i] += out->grad[i];
            }
            if (ctx->requires_grad) {
                ctx->ensure_grad();
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                        const double* g = out->grad.data() + out->at(n, c, 0, 0);
                        double acc = 0.0;
                        for (int i = 0; i < H * W; ++i) acc += g[i];
                        ctx->grad[static_cast<std::size_t>(n) * C + c] += acc;
                    }
            }
        }, out);
    }
    return out;
}

TensorRef concat_channels(Tape* tape, const TensorRef& a, const TensorRef& b) {
    require_4d(a, "concat_channels lhs");
    require_4d(b, "concat_channels rhs");
    if (a->shape[0] != b->shape[0] || a->shape[2] != b->shape[2] || a->shape[3] != b->shape[3])
        throw DimensionError("concat_channels: N/H/W must match");
    const int N = a->shape[0], Ca = a->shape[1], Cb = b->shape[1], H = a->shape[2], W = a->shape[3];
    const bool rec = wants_grad(tape, {&a, &b});
    auto out = make_output({N, Ca + Cb, H, W}, rec);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        std::copy_n(a->data.data() + static_cast<std::size_t>(n) * Ca * plane, Ca * plane,
                    out->data.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane);
        std::copy_n(b->data.data() + static_cast<std::size_t>(n) * Cb * plane, Cb * plane,
                    out->data.data() + (static_cast<std::size_t>(n) * (Ca + Cb) + Ca) * plane);
    }
    if (rec) {
        tape->record([a, b, out, N, Ca, Cb, plane]() {
            for (int n = 0; n < N; ++n) {
                const double* g = out->grad.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane;
                if (a->requires_grad) {
                    a->ensure_grad();
                    double* da = a->grad.data() + static_cast<std::size_t>(n) * Ca * plane;
                    for (std::size_t i = 0; i < Ca * plane; ++i) da[i] += g[i];
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    double* db = b->grad.data() + static_cast<std::size_t>(n) * Cb * plane;
                    for (std::size_t i = 0; i < Cb * plane; ++i) db[i] += g[Ca * plane + i];
                }
            }
        }, out);
    }
    return out;
}

TensorRef cross_entropy(Tape* tape, const TensorRef& logits, const std::vector<int>& targets,
                        int ignore_index) {
    if (!logits || logits->shape.size() < 2) throw DimensionError("cross_entropy: logits need a class axis");
    const int N = logits->shape[0];
    const int C = logits->shape[1];
    std::size_t spatial = 1;
    for (std::size_t d = 2; d < logits->shape.size(); ++d) spatial *= static_cast<std::size_t>(logits->shape[d]);
    const std::size_t positions = static_cast<std::size_t>(N) * spatial;
    if (targets.size() != positions) throw DimensionError("cross_entropy: targets do not match logit positions");

    std::size_t valid = 0;
    double total = 0.0;
    for (std::size_t pos = 0; pos < positions; ++pos) {
        const int t = targets[pos];
        if (t == ignore_index) continue;
        if (t < 0 || t >= C) throw ContractError("cross_entropy: target class index out of range");
        const std::size_t n = pos / spatial, sp = pos % spatial;
        const double* l = logits->data.data() + (static_cast<std::size_t>(n) * C) * spatial + sp;
        double mx = l[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, l[static_cast<std::size_t>(c) * spatial]);
        double se = 0.0;
        for (int c = 0; c < C; ++c) se += std::exp(l[static_cast<std::size_t>(c) * spatial] - mx);
        total += mx + std::log(se) - l[static_cast<std::size_t>(t) * spatial];
        ++valid;
    }
    const double loss = valid > 0 ? total / static_cast<double>(valid) : 0.0;

    const bool rec = wants_grad(tape, {&logits});
    auto out = make_scalar(loss, rec);
    if (rec && valid > 0) {
        auto tgt = std::make_shared<std::vector<int>>(targets);
        const double inv = 1.0 / static_cast<double>(valid);
        tape->record([logits, out, tgt, ignore_index, C, spatial, positions, inv]() {
            logits->ensure_grad();
            const double g = out->grad[0] * inv;
            for (std::size_t pos = 0; pos < positions; ++pos) {
                const int t = (*tgt)[pos];
                if (t == ignore_index) continue;
                const std::size_t n = pos / spatial, sp = pos % spatial;
                const std::size_t base = (static_cast<std::size_t>(n) * C) * spatial + sp;
                const double* l = logits->data.data() + base;
                double mx = l[0];
                for (int c = 1; c < C; ++c) mx = std::max(mx, l[static_cast<std::size_t>(c) * spatial]);
                double se = 0.0;
                for (int c = 0; c < C; ++c) se += std::exp(l[static_cast<std::size_t>(c) * spatial] - mx);
                double* dl = logits->grad.data() + base;
                for (int c = 0; c < C; ++c) {
                    const double p = std::exp(l[static_cast<std::size_t>(c) * spatial] - mx) / se;
                    dl[static_cast<std::size_t>(c) * spatial] += g * (p - (c == t ? 1.0 : 0.0));
                }
            }
        }, out);
    }
    return out;
}

TensorRef sum(Tape* tape, const TensorRef& x) {
    const bool rec = wants_grad(tape, {&x});
    double acc = 0.0;
    for (double v : x->data) acc += v;
    auto out = make_scalar(acc, rec);
    if (rec) {
        tape->record([x, out]() {
            x->ensure_grad();
            const double g = out->grad[0];
            for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += g;
        }, out);
    }
    return out;
}

TensorRef mul(Tape* tape, const TensorRef& a, const TensorRef& b) {
    const bool rec = wants_grad(tape, {&a, &b});
    if (a->shape == b->shape) {
        auto out = make_output(a->shape, rec);
        for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] * b->data[i];
        if (rec) {
            tape->record([a, b, out]() {
                if (a->requires_grad) {
                    a->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
                }
            }, out);
        }
        return out;
    }
    const bool b_is_context = a->shape.size() == 4 && b->shape.size() == 4 && b->shape[2] == 1 &&
                              b->shape[3] == 1 && a->shape[0] == b->shape[0] && a->shape[1] == b->shape[1];
    const bool a_is_context = a->shape.size() == 4 && b->shape.size() == 4 && a->shape[2] == 1 &&
                              a->shape[3] == 1 && a->shape[0] == b->shape[0] && a->shape[1] == b->shape[1];
    if (!b_is_context && !a_is_context) throw DimensionError("mul: incompatible shapes");
    const TensorRef& full = b_is_context ? a : b;
    const TensorRef& ctx = b_is_context ? b : a;
    const int N = full->shape[0], C = full->shape[1], H = full->shape[2], W = full->shape[3];
    auto out = make_output(full->shape, rec);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double v = ctx->data[static_cast<std::size_t>(n) * C + c];
            const double* src = full->data.data() + full->at(n, c, 0, 0);
            double* dst = out->data.data() + out->at(n, c, 0, 0);
            for (int i = 0; i < H * W; ++i) dst[i] = src[i] * v;
        }
    if (rec) {
        tape->record([full, ctx, out, N, C, H, W]() {
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const std::size_t ci = static_cast<std::size_t>(n) * C + c;
                    const double* g = out->grad.data() + out->at(n, c, 0, 0);
                    if (full->requires_grad) {
                        full->ensure_grad();
                        const double v = ctx->data[ci];
                        double* df = full->grad.data() + full->at(n, c, 0, 0);
                        for (int i = 0; i < H * W; ++i) df[i] += g[i] * v;
                    }
                    if (ctx->requires_grad) {
                        ctx->ensure_grad();
                        const double* src = full->data.data() + full->at(n, c, 0, 0);
                        double acc = 0.0;
                        for (int i = 0; i < H * W; ++i) acc += g[i] * src[i];
                        ctx->grad[ci] += acc;
                    }
                }
        }, out);
    }
    return out;
}

TensorRef scale(Tape* tape, const TensorRef& x, double c) {
    const bool rec = wants_grad(tape, {&x});
    auto out = make_output(x->shape, rec);
    for (std::size_t i = 0; i < x->numel(); ++i) out->data[i] = c * x->data[i];
    if (rec) {
        tape->record([x, out, c]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += c * out->grad[i];
        }, out);
    }
    return out;
}

TensorRef reshape(Tape* tape, const TensorRef& x, std::vector<int> shape) {
    if (shape_numel(shape) != x->numel()) throw DimensionError("reshape: element count must be preserved");
    const bool rec = wants_grad(tape, {&x});
    auto out = make_tensor(std::move(shape), x->data, rec);
    if (rec) {
        tape->record([x, out]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
        }, out);
    }
    return out;
}

}  // namespace dopplerkit
