#include "cufsr/ops.hpp"

#include <cmath>
#include <initializer_list>

#include "cufsr/grid.hpp"

namespace cufsr {

namespace {

thread_local MultiplyCounter* active_counter = nullptr;

template <typename T>
Tape<T>* tape_of(std::initializer_list<const Var<T>*> inputs) {
    Tape<T>* tape = nullptr;
    for (const auto* v : inputs) {
        if (!v->requires_grad()) continue;
        if (tape && v->tape() != tape) throw std::logic_error("operands recorded on different tapes");
        tape = v->tape();
    }
    return tape;
}

template <typename T, typename MakeBackward>
Var<T> finish(Tensor<T> out, const char* op, Tape<T>* tape, MakeBackward&& make_backward) {
    check_finite(out, op);
    if (!tape) return Var<T>(std::move(out));
    return tape->record(std::move(out), make_backward());
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
    require(s.size() == rank, std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                                  ", got " + shape_str(s));
}

template <typename T>
std::vector<T> pad_hwc(const Tensor<T>& in, int p) {
    const auto H = in.dim(0), W = in.dim(1), C = in.dim(2);
    const auto Wp = W + 2 * p;
    std::vector<T> out(static_cast<std::size_t>((H + 2 * p) * Wp * C), T(0));
    const T* src = in.data().data();
    for (std::int64_t y = 0; y < H; ++y) {
        T* dst = out.data() + ((y + p) * Wp + p) * C;
        std::copy(src + y * W * C, src + (y + 1) * W * C, dst);
    }
    return out;
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

} // namespace

MultiplyCounter::MultiplyCounter() : previous_(active_counter) { active_counter = this; }

MultiplyCounter::~MultiplyCounter() { active_counter = previous_; }

void MultiplyCounter::add(std::int64_t n) {
    if (active_counter) active_counter->count_ += n;
}

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, int padding) {
    const auto& in = input.value();
    const auto& w = weight.value();
    require_rank(in.shape(), 3, "conv2d", "input");
    require_rank(w.shape(), 4, "conv2d", "weight");
    const auto H = in.dim(0), W = in.dim(1), Cin = in.dim(2);
    const auto Cout = w.dim(0), K = w.dim(2);
    require(w.dim(1) == Cin, "conv2d: weight expects " + std::to_string(w.dim(1)) + " input channels, input has " +
                                 std::to_string(Cin));
    require(w.dim(3) == K && K % 2 == 1, "conv2d: kernel must be square with odd size, got " + shape_str(w.shape()));
    require(padding == (K - 1) / 2, "conv2d: padding must equal (K-1)/2");
    require(bias.shape() == Shape{Cout}, "conv2d: bias must be [Cout]");

    const auto Wp = W + 2 * padding;
    const auto taps = K * K;
    auto padded = pad_hwc(in, padding);

    // [K*K, Cin, Cout] so the innermost loop runs over contiguous outputs
    std::vector<T> wt(static_cast<std::size_t>(taps * Cin * Cout));
    for (std::int64_t co = 0; co < Cout; ++co)
        for (std::int64_t ci = 0; ci < Cin; ++ci)
            for (std::int64_t t = 0; t < taps; ++t) wt[(t * Cin + ci) * Cout + co] = w[(co * Cin + ci) * taps + t];

    Tensor<T> out(Shape{H, W, Cout});
    T* o = out.data().data();
    const T* b = bias.value().data().data();
    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
            T* op = o + (y * W + x) * Cout;
            for (std::int64_t co = 0; co < Cout; ++co) op[co] = b[co];
            for (std::int64_t ki = 0; ki < K; ++ki) {
                for (std::int64_t kj = 0; kj < K; ++kj) {
                    const T* ip = padded.data() + ((y + ki) * Wp + (x + kj)) * Cin;
                    const T* wp = wt.data() + (ki * K + kj) * Cin * Cout;
                    for (std::int64_t ci = 0; ci < Cin; ++ci) {
                        const T v = ip[ci];
                        const T* wr = wp + ci * Cout;
                        for (std::int64_t co = 0; co < Cout; ++co) op[co] += v * wr[co];
                    }
                }
            }
        }
    }
    MultiplyCounter::add(H * W * taps * Cin * Cout);

    return finish(std::move(out), "conv2d", tape_of({&input, &weight, &bias}), [&]() {
        return [in_node = input.node(), w_node = weight.node(), b_node = bias.node(), padded = std::move(padded),
                wt = std::move(wt), H, W, Cin, Cout, K, padding](const Tensor<T>& g) {
            const auto Wp = W + 2 * padding;
            const auto taps = K * K;
            const T* gp = g.data().data();
            const bool need_in = in_node->requires_grad;
            const bool need_w = w_node->requires_grad;
            std::vector<T> gpad(need_in ? padded.size() : 0, T(0));
            std::vector<T> gwt(need_w ? wt.size() : 0, T(0));
            if (need_in || need_w) {
                for (std::int64_t y = 0; y < H; ++y) {
                    for (std::int64_t x = 0; x < W; ++x) {
                        const T* go = gp + (y * W + x) * Cout;
                        for (std::int64_t ki = 0; ki < K; ++ki) {
                            for (std::int64_t kj = 0; kj < K; ++kj) {
                                const auto off = ((y + ki) * Wp + (x + kj)) * Cin;
                                const auto t = ki * K + kj;
                                for (std::int64_t ci = 0; ci < Cin; ++ci) {
                                    if (need_in) {
                                        const T* wr = wt.data() + (t * Cin + ci) * Cout;
                                        T acc = 0;
                                        for (std::int64_t co = 0; co < Cout; ++co) acc += go[co] * wr[co];
                                        gpad[off + ci] += acc;
                                    }
                                    if (need_w) {
                                        const T v = padded[off + ci];
                                        T* gw = gwt.data() + (t * Cin + ci) * Cout;
                                        for (std::int64_t co = 0; co < Cout; ++co) gw[co] += v * go[co];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if (need_in) {
                auto& gi = in_node->grad_buffer();
                T* d = gi.data().data();
                for (std::int64_t y = 0; y < H; ++y)
                    for (std::int64_t x = 0; x < W; ++x)
                        for (std::int64_t c = 0; c < Cin; ++c)
                            d[(y * W + x) * Cin + c] += gpad[((y + padding) * Wp + x + padding) * Cin + c];
            }
            if (need_w) {
                auto& gw = w_node->grad_buffer();
                for (std::int64_t co = 0; co < Cout; ++co)
                    for (std::int64_t ci = 0; ci < Cin; ++ci)
                        for (std::int64_t t = 0; t < taps; ++t)
                            gw[(co * Cin + ci) * taps + t] += gwt[(t * Cin + ci) * Cout + co];
            }
            if (b_node->requires_grad) {
                auto& gb = b_node->grad_buffer();
                for (std::int64_t p = 0; p < H * W; ++p)
                    for (std::int64_t co = 0; co < Cout; ++co) gb[co] += gp[p * Cout + co];
            }
        };
    });
}

// ---------------------------------------------------------------------------
// depthwise_conv2d

template <typename T>
Var<T> depthwise_conv2d(const Var<T>& input, const Var<T>& weight, int padding, int multiplier) {
    const auto& in = input.value();
    const auto& w = weight.value();
    require_rank(in.shape(), 3, "depthwise_conv2d", "input");
    require_rank(w.shape(), 3, "depthwise_conv2d", "weight");
    require(multiplier >= 1, "depthwise_conv2d: multiplier must be >= 1");
    const auto H = in.dim(0), W = in.dim(1), C = in.dim(2);
    const auto K = w.dim(1);
    const std::int64_t M = multiplier;
    const auto Cout = C * M;
    require(w.dim(0) == Cout, "depthwise_conv2d: weight has " + std::to_string(w.dim(0)) + " filters, expected " +
                                  std::to_string(Cout));
    require(w.dim(2) == K && K % 2 == 1, "depthwise_conv2d: kernel must be square with odd size");
    require(padding == (K - 1) / 2, "depthwise_conv2d: padding must equal (K-1)/2");

    const auto Wp = W + 2 * padding;
    const auto taps = K * K;
    auto padded = pad_hwc(in, padding);
    std::vector<T> wt(static_cast<std::size_t>(taps * Cout));
    for (std::int64_t o = 0; o < Cout; ++o)
        for (std::int64_t t = 0; t < taps; ++t) wt[t * Cout + o] = w[o * taps + t];

    Tensor<T> out(Shape{H, W, Cout});
    T* op_base = out.data().data();
    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
            T* op = op_base + (y * W + x) * Cout;
            for (std::int64_t ki = 0; ki < K; ++ki) {
                for (std::int64_t kj = 0; kj < K; ++kj) {
                    const T* ip = padded.data() + ((y + ki) * Wp + (x + kj)) * C;
                    const T* wr = wt.data() + (ki * K + kj) * Cout;
                    for (std::int64_t c = 0; c < C; ++c) {
                        const T v = ip[c];
                        for (std::int64_t m = 0; m < M; ++m) op[c * M + m] += v * wr[c * M + m];
                    }
                }
            }
        }
    }
    MultiplyCounter::add(H * W * taps * Cout);

    return finish(std::move(out), "depthwise_conv2d", tape_of({&input, &weight}), [&]() {
        return [in_node = input.node(), w_node = weight.node(), padded = std::move(padded), wt = std::move(wt), H, W,
                C, M, K, padding](const Tensor<T>& g) {
            const auto Wp = W + 2 * padding;
            const auto Cout = C * M;
            const auto taps = K * K;
            const T* gp = g.data().data();
            std::vector<T> gpad(in_node->requires_grad ? padded.size() : 0, T(0));
            std::vector<T> gwt(w_node->requires_grad ? wt.size() : 0, T(0));
            for (std::int64_t y = 0; y < H; ++y) {
                for (std::int64_t x = 0; x < W; ++x) {
                    const T* go = gp + (y * W + x) * Cout;
                    for (std::int64_t t = 0; t < taps; ++t) {
                        const auto off = ((y + t / K) * Wp + (x + t % K)) * C;
                        for (std::int64_t c = 0; c < C; ++c) {
                            for (std::int64_t m = 0; m < M; ++m) {
                                const auto o = c * M + m;
                                if (!gpad.empty()) gpad[off + c] += go[o] * wt[t * Cout + o];
                                if (!gwt.empty()) gwt[t * Cout + o] += go[o] * padded[off + c];
                            }
                        }
                    }
                }
            }
            if (!gpad.empty()) {
                T* d = in_node->grad_buffer().data().data();
                for (std::int64_t y = 0; y < H; ++y)
                    for (std::int64_t x = 0; x < W; ++x)
                        for (std::int64_t c = 0; c < C; ++c)
                            d[(y * W + x) * C + c] += gpad[((y + padding) * Wp + x + padding) * C + c];
            }
            if (!gwt.empty()) {
                auto& gw = w_node->grad_buffer();
                for (std::int64_t o = 0; o < Cout; ++o)
                    for (std::int64_t t = 0; t < taps; ++t) gw[o * taps + t] += gwt[t * Cout + o];
            }
        };
    });
}

// ---------------------------------------------------------------------------
// dense

template <typename T>
Var<T> dense(const Var<T>& input, const Var<T>& weight, const Var<T>& bias) {
    const auto& in = input.value();
    const auto& w = weight.value();
    require(in.rank() >= 1, "dense: input must have rank >= 1");
    require_rank(w.shape(), 2, "dense", "weight");
    const auto Cin = in.dim(-1);
    const auto Cout = w.dim(1);
    require(w.dim(0) == Cin, "dense: last axis " + std::to_string(Cin) + " does not match weight " +
                                 shape_str(w.shape()));
    require(bias.shape() == Shape{Cout}, "dense: bias must be [Cout]");
    const auto rows = Cin == 0 ? 0 : in.numel() / Cin;

    Shape out_shape = in.shape();
    out_shape.back() = Cout;
    Tensor<T> out(out_shape);
    const T* ip = in.data().data();
    const T* wp = w.data().data();
    const T* bp = bias.value().data().data();
    T* op = out.data().data();
    for (std::int64_t r = 0; r < rows; ++r) {
        T* o = op + r * Cout;
        for (std::int64_t j = 0; j < Cout; ++j) o[j] = bp[j];
        const T* x = ip + r * Cin;
        for (std::int64_t i = 0; i < Cin; ++i) {
            const T v = x[i];
            const T* wr = wp + i * Cout;
            for (std::int64_t j = 0; j < Cout; ++j) o[j] += v * wr[j];
        }
    }
    MultiplyCounter::add(rows * Cin * Cout);

    return finish(std::move(out), "dense", tape_of({&input, &weight, &bias}), [&]() {
        return [in_node = input.node(), w_node = weight.node(), b_node = bias.node(), rows, Cin,
                Cout](const Tensor<T>& g) {
            const T* gp = g.data().data();
            if (in_node->requires_grad) {
                T* gi = in_node->grad_buffer().data().data();
                const T* wp = w_node->value.data().data();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const T* go = gp + r * Cout;
                    for (std::int64_t i = 0; i < Cin; ++i) {
                        const T* wr = wp + i * Cout;
                        T acc = 0;
                        for (std::int64_t j = 0; j < Cout; ++j) acc += go[j] * wr[j];
                        gi[r * Cin + i] += acc;
                    }
                }
            }
            if (w_node->requires_grad) {
                T* gw = w_node->grad_buffer().data().data();
                const T* ip = in_node->value.data().data();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const T* go = gp + r * Cout;
                    for (std::int64_t i = 0; i < Cin; ++i) {
                        const T v = ip[r * Cin + i];
                        T* gwr = gw + i * Cout;
                        for (std::int64_t j = 0; j < Cout; ++j) gwr[j] += v * go[j];
                    }
                }
            }
            if (b_node->requires_grad) {
                T* gb = b_node->grad_buffer().data().data();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < Cout; ++j) gb[j] += gp[r * Cout + j];
            }
        };
    });
}

// ---------------------------------------------------------------------------
// unfold

template <typename T>
Var<T> unfold(const Var<T>& input, int k) {
    const auto& in = input.value();
    require_rank(in.shape(), 3, "unfold", "input");
    require(k >= 1 && k % 2 == 1, "unfold: k must be odd and positive");
    const auto H = in.dim(0), W = in.dim(1), C = in.dim(2);
    const std::int64_t taps = static_cast<std::int64_t>(k) * k;
    const std::int64_t r = k / 2;
    Tensor<T> out(Shape{H, W, C * taps});
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
            for (std::int64_t ki = 0; ki < k; ++ki) {
                const auto sy = y + ki - r;
                if (sy < 0 || sy >= H) continue;
                for (std::int64_t kj = 0; kj < k; ++kj) {
                    const auto sx = x + kj - r;
                    if (sx < 0 || sx >= W) continue;
                    for (std::int64_t c = 0; c < C; ++c) out.at(y, x, c * taps + ki * k + kj) = in.at(sy, sx, c);
                }
            }

    return finish(std::move(out), "unfold", tape_of({&input}), [&]() {
        return [in_node = input.node(), H, W, C, k, taps, r](const Tensor<T>& g) {
            auto& gi = in_node->grad_buffer();
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t x = 0; x < W; ++x)
                    for (std::int64_t ki = 0; ki < k; ++ki) {
                        const auto sy = y + ki - r;
                        if (sy < 0 || sy >= H) continue;
                        for (std::int64_t kj = 0; kj < k; ++kj) {
                            const auto sx = x + kj - r;
                            if (sx < 0 || sx >= W) continue;
                            for (std::int64_t c = 0; c < C; ++c)
                                gi.at(sy, sx, c) += g.at(y, x, c * taps + ki * k + kj);
                        }
                    }
        };
    });
}

// ---------------------------------------------------------------------------
// nearest_sample

template <typename T>
Var<T> nearest_sample(const Var<T>& input, double s_h, double s_w) {
    const auto& in = input.value();
    require_rank(in.shape(), 3, "nearest_sample", "input");
    require(s_h >= 1.0 && s_w >= 1.0, "nearest_sample: scales must be >= 1");
    const auto H = in.dim(0), W = in.dim(1), C = in.dim(2);
    const auto Ho = scaled_extent(H, s_h), Wo = scaled_extent(W, s_w);
    std::vector<std::int64_t> rows(static_cast<std::size_t>(Ho)), cols(static_cast<std::size_t>(Wo));
    for (std::int64_t y = 0; y < Ho; ++y) rows[y] = subpixel_coord(y, s_h).source;
    for (std::int64_t x = 0; x < Wo; ++x) cols[x] = subpixel_coord(x, s_w).source;
    Tensor<T> out(Shape{Ho, Wo, C});
    for (std::int64_t y = 0; y < Ho; ++y)
        for (std::int64_t x = 0; x < Wo; ++x) {
            const T* src = &in.at(rows[y], cols[x], 0);
            std::copy(src, src + C, &out.at(y, x, 0));
        }

    return finish(std::move(out), "nearest_sample", tape_of({&input}), [&]() {
        return [in_node = input.node(), rows = std::move(rows), cols = std::move(cols), C](const Tensor<T>& g) {
            auto& gi = in_node->grad_buffer();
            for (std::size_t y = 0; y < rows.size(); ++y)
                for (std::size_t x = 0; x < cols.size(); ++x)
                    for (std::int64_t c = 0; c < C; ++c)
                        gi.at(rows[y], cols[x], c) += g.at(static_cast<std::int64_t>(y), static_cast<std::int64_t>(x), c);
        };
    });
}

// ---------------------------------------------------------------------------
// pixel_shuffle / pixel_unshuffle

namespace {

// Flat index pairs (shuffled, unshuffled) for a pixel-shuffle of scale s
// between [H,W,C*s*s] and [sH,sW,C].
template <typename F>
void for_each_shuffle_pair(std::int64_t H, std::int64_t W, std::int64_t C, std::int64_t s, F&& f) {
    const auto s2 = s * s;
    const auto Wo = W * s;
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
            for (std::int64_t c = 0; c < C; ++c)
                for (std::int64_t i = 0; i < s; ++i)
                    for (std::int64_t j = 0; j < s; ++j) {
                        const auto lo = (y * W + x) * C * s2 + c * s2 + i * s + j;
                        const auto hi = ((y * s + i) * Wo + (x * s + j)) * C + c;
                        f(hi, lo);
                    }
}

} // namespace

template <typename T>
Var<T> pixel_shuffle(const Var<T>& input, int s) {
    const auto& in = input.value();
    require_rank(in.shape(), 3, "pixel_shuffle", "input");
    require(s >= 1, "pixel_shuffle: scale must be >= 1");
    const auto H = in.dim(0), W = in.dim(1), Cs = in.dim(2);
    const std::int64_t s2 = static_cast<std::int64_t>(s) * s;
    require(Cs % s2 == 0, "pixel_shuffle: channel count " + std::to_string(Cs) + " not divisible by s^2 = " +
                              std::to_string(s2));
    const auto C = Cs / s2;
    Tensor<T> out(Shape{H * s, W * s, C});
    for_each_shuffle_pair(H, W, C, s, [&](std::int64_t hi, std::int64_t lo) { out[hi] = in[lo]; });

    return finish(std::move(out), "pixel_shuffle", tape_of({&input}), [&]() {
        return [in_node = input.node(), H, W, C, s](const Tensor<T>& g) {
            auto& gi = in_node->grad_buffer();
            for_each_shuffle_pair(H, W, C, s, [&](std::int64_t hi, std::int64_t lo) { gi[lo] += g[hi]; });
        };
    });
}

template <typename T>
Var<T> pixel_unshuffle(const Var<T>& input, int s) {
    const auto& in = input.value();
    require_rank(in.shape(), 3, "pixel_unshuffle", "input");
    require(s >= 1, "pixel_unshuffle: scale must be >= 1");
    const auto Hs = in.dim(0), Ws = in.dim(1), C = in.dim(2);
    require(Hs % s == 0 && Ws % s == 0, "pixel_unshuffle: spatial dims " + shape_str(in.shape()) +
                                            " not divisible by " + std::to_string(s));
    const auto H = Hs / s, W = Ws / s;
    Tensor<T> out(Shape{H, W, C * s * s});
    for_each_shuffle_pair(H, W, C, s, [&](std::int64_t hi, std::int64_t lo) { out[lo] = in[hi]; });

    return finish(std::move(out), "pixel_unshuffle", tape_of({&input}), [&]() {
        return [in_node = input.node(), H, W, C, s](const Tensor<T>& g) {
            auto& gi = in_node->grad_buffer();
            for_each_shuffle_pair(H, W, C, s, [&](std::int64_t hi, std::int64_t lo) { gi[hi] += g[lo]; });
        };
    });
}

// ---------------------------------------------------------------------------
// depthwise_gather

template <typename T>
Var<T> depthwise_gather(const Var<T>& features, const Var<T>& kernels, const GatherPlan& plan) {
    const auto& f = features.value();
    const auto& k = kernels.value();
    require_rank(f.shape(), 3, "depthwise_gather", "features");
    require_rank(k.shape(), 3, "depthwise_gather", "kernels");
    const auto U = k.dim(0), taps = k.dim(1), C = k.dim(2);
    require(f.dim(2) == C * taps, "depthwise_gather: features have " + std::to_string(f.dim(2)) +
                                      " channels, kernels expect " + std::to_string(C * taps));
    const auto npix = plan.out_h * plan.out_w;
    require(static_cast<std::int64_t>(plan.source.size()) == npix &&
                static_cast<std::int64_t>(plan.query.size()) == npix,
            "depthwise_gather: plan size mismatch");
    const auto nsrc = f.dim(0) * f.dim(1);
    for (std::int64_t p = 0; p < npix; ++p) {
        require(plan.source[p] >= 0 && plan.source[p] < nsrc, "depthwise_gather: source index out of range");
        require(plan.query[p] >= 0 && plan.query[p] < U, "depthwise_gather: query index out of range");
    }

    Tensor<T> out(Shape{plan.out_h, plan.out_w, C});
    const T* fp = f.data().data();
    const T* kp = k.data().data();
    T* op = out.data().data();
    const auto fc = C * taps;
    for (std::int64_t p = 0; p < npix; ++p) {
        const T* src = fp + plan.source[p] * fc;
        const T* ker = kp + static_cast<std::int64_t>(plan.query[p]) * taps * C;
        T* o = op + p * C;
        for (std::int64_t c = 0; c < C; ++c) {
            T acc = 0;
            for (std::int64_t t = 0; t < taps; ++t) acc += ker[t * C + c] * src[c * taps + t];
            o[c] = acc;
        }
    }
    MultiplyCounter::add(npix * C * taps);

    return finish(std::move(out), "depthwise_gather", tape_of({&features, &kernels}), [&]() {
        return [f_node = features.node(), k_node = kernels.node(), plan, taps, C](const Tensor<T>& g) {
            const auto npix = plan.out_h * plan.out_w;
            const auto fc = C * taps;
            const T* gp = g.data().data();
            const T* fp = f_node->value.data().data();
            const T* kp = k_node->value.data().data();
            T* gf = f_node->requires_grad ? f_node->grad_buffer().data().data() : nullptr;
            T* gk = k_node->requires_grad ? k_node->grad_buffer().data().data() : nullptr;
            for (std::int64_t p = 0; p < npix; ++p) {
                const auto so = plan.source[p] * fc;
                const auto ko = static_cast<std::int64_t>(plan.query[p]) * taps * C;
                const T* go = gp + p * C;
                for (std::int64_t c = 0; c < C; ++c) {
                    for (std::int64_t t = 0; t < taps; ++t) {
                        if (gf) gf[so + c * taps + t] += go[c] * kp[ko + t * C + c];
                        if (gk) gk[ko + t * C + c] += go[c] * fp[so + c * taps + t];
                    }
                }
            }
        };
    });
}

// ---------------------------------------------------------------------------
// shape plumbing

template <typename T>
Var<T> slice_hw(const Var<T>& input, std::int64_t y0, std::int64_t x0, std::int64_t h, std::int64_t w) {
    const auto& in = input.value();
    require_rank(in.shape(), 3, "slice_hw", "input");
    const auto H = in.dim(0), W = in.dim(1), C = in.dim(2);
    require(y0 >= 0 && x0 >= 0 && h >= 0 && w >= 0 && y0 + h <= H && x0 + w <= W,
            "slice_hw: window out of bounds for " + shape_str(in.shape()));
    Tensor<T> out(Shape{h, w, C});
    for (std::int64_t y = 0; y < h; ++y) {
        const T* src = &in.at(y0 + y, x0, 0);
        std::copy(src, src + w * C, &out.at(y, 0, 0));
    }
    return finish(std::move(out), "slice_hw", tape_of({&input}), [&]() {
        return [in_node = input.node(), y0, x0, h, w, C](const Tensor<T>& g) {
            auto& gi = in_node->grad_buffer();
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t x = 0; x < w; ++x)
                    for (std::int64_t c = 0; c < C; ++c) gi.at(y0 + y, x0 + x, c) += g.at(y, x, c);
        };
    });
}

template <typename T>
Var<T> reshape(const Var<T>& input, Shape shape) {
    Tensor<T> out = input.value().reshaped(std::move(shape));
    return finish(std::move(out), "reshape", tape_of({&input}), [&]() {
        return [in_node = input.node()](const Tensor<T>& g) {
            auto d = in_node->grad_buffer().data();
            auto s = g.data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
        };
    });
}

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
Var<T> relu(const Var<T>& input) {
    Tensor<T> out = input.value();
    for (auto& v : out.data()) v = v > T(0) ? v : T(0);
    return finish(std::move(out), "relu", tape_of({&input}), [&]() {
        return [in_node = input.node()](const Tensor<T>& g) {
            auto gi = in_node->grad_buffer().data();
            auto x = in_node->value.data();
            auto gd = g.data();
            for (std::size_t i = 0; i < gi.size(); ++i)
                if (x[i] > T(0)) gi[i] += gd[i];
        };
    });
}

namespace {

void require_same(const Shape& a, const Shape& b, const char* op) {
    require(a == b, std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

} // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    require_same(a.shape(), b.shape(), "add");
    Tensor<T> out = a.value();
    add_into(out, b.value());
    return finish(std::move(out), "add", tape_of({&a, &b}), [&]() {
        return [an = a.node(), bn = b.node()](const Tensor<T>& g) {
            if (an->requires_grad) add_into(an->grad_buffer(), g);
            if (bn->requires_grad) add_into(bn->grad_buffer(), g);
        };
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    require_same(a.shape(), b.shape(), "sub");
    Tensor<T> out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
    return finish(std::move(out), "sub", tape_of({&a, &b}), [&]() {
        return [an = a.node(), bn = b.node()](const Tensor<T>& g) {
            if (an->requires_grad) add_into(an->grad_buffer(), g);
            if (bn->requires_grad) {
                auto d = bn->grad_buffer().data();
                auto gd = g.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gd[i];
            }
        };
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    require_same(a.shape(), b.shape(), "mul");
    Tensor<T> out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
    MultiplyCounter::add(static_cast<std::int64_t>(o.size()));
    return finish(std::move(out), "mul", tape_of({&a, &b}), [&]() {
        return [an = a.node(), bn = b.node()](const Tensor<T>& g) {
            auto gd = g.data();
            if (an->requires_grad) {
                auto d = an->grad_buffer().data();
                auto bv = bn->value.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * bv[i];
            }
            if (bn->requires_grad) {
                auto d = bn->grad_buffer().data();
                auto av = an->value.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * av[i];
            }
        };
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
    Tensor<T> out = a.value();
    for (auto& v : out.data()) v *= factor;
    MultiplyCounter::add(out.numel());
    return finish(std::move(out), "scale", tape_of({&a}), [&]() {
        return [an = a.node(), factor](const Tensor<T>& g) {
            auto d = an->grad_buffer().data();
            auto gd = g.data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * factor;
        };
    });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
    double acc = 0.0;
    for (T v : a.value().data()) acc += static_cast<double>(v);
    return finish(Tensor<T>::scalar(static_cast<T>(acc)), "sum", tape_of({&a}), [&]() {
        return [an = a.node()](const Tensor<T>& g) {
            const T gv = g[0];
            for (auto& d : an->grad_buffer().data()) d += gv;
        };
    });
}

template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Var<T>& target) {
    require_same(pred.shape(), target.shape(), "l1_loss");
    const auto n = pred.value().numel();
    require(n > 0, "l1_loss: empty operands");
    double acc = 0.0;
    auto p = pred.value().data();
    auto t = target.value().data();
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(static_cast<double>(p[i]) - static_cast<double>(t[i]));
    return finish(Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))), "l1_loss",
                  tape_of({&pred, &target}), [&]() {
                      return [pn = pred.node(), tn = target.node(), n](const Tensor<T>& g) {
                          const T step = g[0] / static_cast<T>(n);
                          auto p = pn->value.data();
                          auto t = tn->value.data();
                          auto sign = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
                          if (pn->requires_grad) {
                              auto d = pn->grad_buffer().data();
                              for (std::size_t i = 0; i < d.size(); ++i) d[i] += step * sign(p[i] - t[i]);
                          }
                          if (tn->requires_grad) {
                              auto d = tn->grad_buffer().data();
                              for (std::size_t i = 0; i < d.size(); ++i) d[i] -= step * sign(p[i] - t[i]);
                          }
                      };
                  });
}

#define CUFSR_INSTANTIATE_OPS(T)                                                                      \
    template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int);                         \
    template Var<T> depthwise_conv2d(const Var<T>&, const Var<T>&, int, int);                         \
    template Var<T> dense(const Var<T>&, const Var<T>&, const Var<T>&);                               \
    template Var<T> unfold(const Var<T>&, int);                                                       \
    template Var<T> nearest_sample(const Var<T>&, double, double);                                    \
    template Var<T> pixel_shuffle(const Var<T>&, int);                                                \
    template Var<T> pixel_unshuffle(const Var<T>&, int);                                              \
    template Var<T> depthwise_gather(const Var<T>&, const Var<T>&, const GatherPlan&);                \
    template Var<T> slice_hw(const Var<T>&, std::int64_t, std::int64_t, std::int64_t, std::int64_t); \
    template Var<T> reshape(const Var<T>&, Shape);                                                    \
    template Var<T> relu(const Var<T>&);                                                              \
    template Var<T> add(const Var<T>&, const Var<T>&);                                                \
    template Var<T> sub(const Var<T>&, const Var<T>&);                                                \
    template Var<T> mul(const Var<T>&, const Var<T>&);                                                \
    template Var<T> scale(const Var<T>&, T);                                                          \
    template Var<T> sum(const Var<T>&);                                                               \
    template Var<T> l1_loss(const Var<T>&, const Var<T>&);

CUFSR_INSTANTIATE_OPS(float)
CUFSR_INSTANTIATE_OPS(double)

#undef CUFSR_INSTANTIATE_OPS

} // namespace cufsr
