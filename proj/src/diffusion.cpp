#include "herdgen/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "herdgen/rng.hpp"

namespace herdgen {

namespace {

void derive_schedule(NoiseSchedule& s) {
    s.T = int(s.beta.size());
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    double prod = 1.0;
    for (size_t i = 0; i < s.beta.size(); ++i) {
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
}

double silu(double z) { return z / (1.0 + std::exp(-z)); }

double silu_grad(double z) {
    double s = 1.0 / (1.0 + std::exp(-z));
    return s * (1.0 + z * (1.0 - s));
}

// 3x3 convolution, stride 1, zero padding 1. Weights laid out
// [out_c][in_c][3][3], biases [out_c].
void conv3x3(const Tensor& in, const double* w, const double* b, int out_c,
             Tensor& out) {
    const int h = in.h, wd = in.w, in_c = in.c;
    out = Tensor(out_c, h, wd);
    for (int oc = 0; oc < out_c; ++oc) {
        double* op = &out.v[size_t(oc) * h * wd];
        std::fill(op, op + size_t(h) * wd, b[oc]);
    }
    for (int oc = 0; oc < out_c; ++oc) {
        for (int ic = 0; ic < in_c; ++ic) {
            const double* wk = w + (size_t(oc) * in_c + ic) * 9;
            const double* ip = &in.v[size_t(ic) * h * wd];
            double* op = &out.v[size_t(oc) * h * wd];
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const double wv = wk[(dy + 1) * 3 + (dx + 1)];
                    const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                    for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
                        const double* irow = ip + size_t(y + dy) * wd + dx;
                        double* orow = op + size_t(y) * wd;
                        for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }
}

void conv3x3_grad_input(const double* w, int in_c, int out_c, const Tensor& d_out,
                        Tensor& d_in) {
    const int h = d_out.h, wd = d_out.w;
    d_in = Tensor(in_c, h, wd);
    for (int oc = 0; oc < out_c; ++oc) {
        for (int ic = 0; ic < in_c; ++ic) {
            const double* wk = w + (size_t(oc) * in_c + ic) * 9;
            const double* gp = &d_out.v[size_t(oc) * h * wd];
            double* ip = &d_in.v[size_t(ic) * h * wd];
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const double wv = wk[(dy + 1) * 3 + (dx + 1)];
                    const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                    for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
                        double* irow = ip + size_t(y + dy) * wd + dx;
                        const double* grow = gp + size_t(y) * wd;
                        for (int x = x0; x < x1; ++x) irow[x] += wv * grow[x];
                    }
                }
            }
        }
    }
}

void conv3x3_grad_params(const Tensor& in, const Tensor& d_out, double* d_w,
                         double* d_b) {
    const int h = in.h, wd = in.w, in_c = in.c, out_c = d_out.c;
    for (int oc = 0; oc < out_c; ++oc) {
        const double* gp = &d_out.v[size_t(oc) * h * wd];
        double bsum = 0.0;
        for (size_t i = 0; i < size_t(h) * wd; ++i) bsum += gp[i];
        d_b[oc] += bsum;
        for (int ic = 0; ic < in_c; ++ic) {
            const double* ip = &in.v[size_t(ic) * h * wd];
            double* wk = d_w + (size_t(oc) * in_c + ic) * 9;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                    double acc = 0.0;
                    for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
                        const double* irow = ip + size_t(y + dy) * wd + dx;
                        const double* grow = gp + size_t(y) * wd;
                        for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
                    }
                    wk[(dy + 1) * 3 + (dx + 1)] += acc;
                }
            }
        }
    }
}

void avgpool2(const Tensor& in, Tensor& out) {
    out = Tensor(in.c, in.h / 2, in.w / 2);
    for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x)
                out.at(c, y, x) =
                    0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                            in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1));
}

void avgpool2_backward(const Tensor& d_out, Tensor& d_in) {
    d_in = Tensor(d_out.c, d_out.h * 2, d_out.w * 2);
    for (int c = 0; c < d_out.c; ++c)
        for (int y = 0; y < d_out.h; ++y)
            for (int x = 0; x < d_out.w; ++x) {
                const double g = 0.25 * d_out.at(c, y, x);
                d_in.at(c, 2 * y, 2 * x) = g;
                d_in.at(c, 2 * y, 2 * x + 1) = g;
                d_in.at(c, 2 * y + 1, 2 * x) = g;
                d_in.at(c, 2 * y + 1, 2 * x + 1) = g;
            }
}

void upsample2(const Tensor& in, Tensor& out) {
    out = Tensor(in.c, in.h * 2, in.w * 2);
    for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
}

void upsample2_backward(const Tensor& d_out, Tensor& d_in) {
    d_in = Tensor(d_out.c, d_out.h / 2, d_out.w / 2);
    for (int c = 0; c < d_out.c; ++c)
        for (int y = 0; y < d_out.h; ++y)
            for (int x = 0; x < d_out.w; ++x)
                d_in.at(c, y / 2, x / 2) += d_out.at(c, y, x);
}

std::vector<double> sin_embedding(int t, int dim) {
    const int half = dim / 2;
    std::vector<double> emb(static_cast<size_t>(dim));
    for (int k = 0; k < half; ++k) {
        const double freq =
            half > 1 ? std::exp(-std::log(10000.0) * k / double(half - 1)) : 1.0;
        emb[k] = std::sin(t * freq);
        emb[half + k] = std::cos(t * freq);
    }
    return emb;
}

// Flat-vector offsets for every layer, in a fixed serialization order.
struct Offsets {
    size_t ci_w = 0, ci_b = 0;
    std::vector<size_t> d_w, d_b;
    size_t t1_w = 0, t1_b = 0, t2_w = 0, t2_b = 0;
    size_t mid_w = 0, mid_b = 0;
    std::vector<size_t> u_w, u_b; // indexed by level
    size_t out_w = 0, out_b = 0;
    size_t total = 0;
};

Offsets layout(const DenoiserConfig& cfg, std::vector<ParamGroup>* groups) {
    Offsets off;
    size_t pos = 0;
    auto add = [&](const std::string& name, size_t n) {
        if (groups) groups->push_back({name, pos, n});
        size_t at = pos;
        pos += n;
        return at;
    };
    const int L = cfg.levels;
    const int e0 = cfg.channels_at(0);
    const int eL = cfg.channels_at(L);

    off.ci_w = add("conv_in.w", size_t(e0) * cfg.in_channels * 9);
    off.ci_b = add("conv_in.b", size_t(e0));
    off.d_w.resize(L);
    off.d_b.resize(L);
    for (int i = 0; i < L; ++i) {
        const int ci = cfg.channels_at(i), co = cfg.channels_at(i + 1);
        off.d_w[i] = add("down" + std::to_string(i) + ".w", size_t(co) * ci * 9);
        off.d_b[i] = add("down" + std::to_string(i) + ".b", size_t(co));
    }
    off.t1_w = add("temb_lin1.w", size_t(eL) * cfg.temb_dim);
    off.t1_b = add("temb_lin1.b", size_t(eL));
    off.t2_w = add("temb_lin2.w", size_t(eL) * eL);
    off.t2_b = add("temb_lin2.b", size_t(eL));
    off.mid_w = add("conv_mid.w", size_t(eL) * eL * 9);
    off.mid_b = add("conv_mid.b", size_t(eL));
    off.u_w.resize(L);
    off.u_b.resize(L);
    for (int i = L - 1; i >= 0; --i) {
        const int ci = cfg.channels_at(i + 1) + cfg.channels_at(i);
        const int co = cfg.channels_at(i);
        off.u_w[i] = add("up" + std::to_string(i) + ".w", size_t(co) * ci * 9);
        off.u_b[i] = add("up" + std::to_string(i) + ".b", size_t(co));
    }
    off.out_w = add("conv_out.w", size_t(cfg.in_channels) * e0 * 9);
    off.out_b = add("conv_out.b", size_t(cfg.in_channels));
    off.total = pos;
    return off;
}

void validate_config(const DenoiserConfig& cfg) {
    if (cfg.resolution < 1 || cfg.in_channels < 1 || cfg.base_channels < 1 ||
        cfg.levels < 1)
        throw Error("denoiser config fields must be positive");
    if (cfg.temb_dim < 2 || cfg.temb_dim % 2 != 0)
        throw Error("temb_dim must be even and >= 2");
    if (cfg.resolution % (1 << cfg.levels) != 0)
        throw Error("resolution must be divisible by 2^levels");
}

// Every intermediate of one forward pass, kept for backprop.
struct Cache {
    Tensor input;
    Tensor pre_in;
    std::vector<Tensor> act; // post-silu encoder activations, act[0..L]
    std::vector<Tensor> pooled, pre_d;
    std::vector<double> emb, pre_t1, h_t1, temb_out;
    Tensor mid_in, pre_mid, h_mid;
    std::vector<Tensor> ups, cat, pre_u, h_u; // processing order, j = 0..L-1
    Tensor out;
};

void apply_silu(const Tensor& pre, Tensor& post) {
    post = Tensor(pre.c, pre.h, pre.w);
    for (size_t i = 0; i < pre.v.size(); ++i) post.v[i] = silu(pre.v[i]);
}

void forward_net(const DenoiserParams& params, const Offsets& off, const Tensor& xt,
                 int t, Cache& cc) {
    const DenoiserConfig& cfg = params.cfg;
    const int L = cfg.levels;
    const double* p = params.values.data();

    cc.input = xt;
    conv3x3(xt, p + off.ci_w, p + off.ci_b, cfg.channels_at(0), cc.pre_in);
    cc.act.resize(L + 1);
    apply_silu(cc.pre_in, cc.act[0]);

    cc.pooled.resize(L);
    cc.pre_d.resize(L);
    for (int i = 0; i < L; ++i) {
        avgpool2(cc.act[i], cc.pooled[i]);
        conv3x3(cc.pooled[i], p + off.d_w[i], p + off.d_b[i], cfg.channels_at(i + 1),
                cc.pre_d[i]);
        apply_silu(cc.pre_d[i], cc.act[i + 1]);
    }

    const int eL = cfg.channels_at(L);
    cc.emb = sin_embedding(t, cfg.temb_dim);
    cc.pre_t1.assign(size_t(eL), 0.0);
    for (int o = 0; o < eL; ++o) {
        double acc = p[off.t1_b + o];
        const double* wr = p + off.t1_w + size_t(o) * cfg.temb_dim;
        for (int k = 0; k < cfg.temb_dim; ++k) acc += wr[k] * cc.emb[k];
        cc.pre_t1[o] = acc;
    }
    cc.h_t1.resize(size_t(eL));
    for (int o = 0; o < eL; ++o) cc.h_t1[o] = silu(cc.pre_t1[o]);
    cc.temb_out.assign(size_t(eL), 0.0);
    for (int o = 0; o < eL; ++o) {
        double acc = p[off.t2_b + o];
        const double* wr = p + off.t2_w + size_t(o) * eL;
        for (int k = 0; k < eL; ++k) acc += wr[k] * cc.h_t1[k];
        cc.temb_out[o] = acc;
    }

    cc.mid_in = cc.act[L];
    const int plane = cc.mid_in.h * cc.mid_in.w;
    for (int c = 0; c < eL; ++c) {
        double* row = &cc.mid_in.v[size_t(c) * plane];
        for (int i = 0; i < plane; ++i) row[i] += cc.temb_out[c];
    }
    conv3x3(cc.mid_in, p + off.mid_w, p + off.mid_b, eL, cc.pre_mid);
    apply_silu(cc.pre_mid, cc.h_mid);

    cc.ups.resize(L);
    cc.cat.resize(L);
    cc.pre_u.resize(L);
    cc.h_u.resize(L);
    const Tensor* cur = &cc.h_mid;
    for (int j = 0; j < L; ++j) {
        const int lvl = L - 1 - j;
        upsample2(*cur, cc.ups[j]);
        const Tensor& skip = cc.act[lvl];
        Tensor& cat = cc.cat[j];
        cat = Tensor(cc.ups[j].c + skip.c, skip.h, skip.w);
        std::copy(cc.ups[j].v.begin(), cc.ups[j].v.end(), cat.v.begin());
        std::copy(skip.v.begin(), skip.v.end(),
                  cat.v.begin() + ptrdiff_t(cc.ups[j].v.size()));
        conv3x3(cat, p + off.u_w[lvl], p + off.u_b[lvl], cfg.channels_at(lvl),
                cc.pre_u[j]);
        apply_silu(cc.pre_u[j], cc.h_u[j]);
        cur = &cc.h_u[j];
    }

    conv3x3(*cur, p + off.out_w, p + off.out_b, cfg.in_channels, cc.out);
}

void mul_silu_grad(const Tensor& pre, const Tensor& d_post, Tensor& d_pre) {
    d_pre = Tensor(pre.c, pre.h, pre.w);
    for (size_t i = 0; i < pre.v.size(); ++i)
        d_pre.v[i] = d_post.v[i] * silu_grad(pre.v[i]);
}

// Accumulates parameter gradients into `grad` (flat parameter layout).
void backward_net(const DenoiserParams& params, const Offsets& off, const Cache& cc,
                  const Tensor& d_out, double* grad) {
    const DenoiserConfig& cfg = params.cfg;
    const int L = cfg.levels;
    const int eL = cfg.channels_at(L);
    const double* p = params.values.data();

    std::vector<Tensor> d_act(L + 1);
    for (int i = 0; i <= L; ++i)
        d_act[i] = Tensor(cc.act[i].c, cc.act[i].h, cc.act[i].w);

    conv3x3_grad_params(cc.h_u[L - 1], d_out, grad + off.out_w, grad + off.out_b);
    Tensor d_cur;
    conv3x3_grad_input(p + off.out_w, cc.h_u[L - 1].c, cfg.in_channels, d_out, d_cur);

    Tensor d_h_mid;
    for (int j = L - 1; j >= 0; --j) {
        const int lvl = L - 1 - j;
        Tensor d_pre_u;
        mul_silu_grad(cc.pre_u[j], d_cur, d_pre_u);
        conv3x3_grad_params(cc.cat[j], d_pre_u, grad + off.u_w[lvl],
                            grad + off.u_b[lvl]);
        Tensor d_cat;
        conv3x3_grad_input(p + off.u_w[lvl], cc.cat[j].c, cfg.channels_at(lvl),
                           d_pre_u, d_cat);
        const size_t up_n = cc.ups[j].v.size();
        Tensor d_ups(cc.ups[j].c, d_cat.h, d_cat.w);
        std::copy(d_cat.v.begin(), d_cat.v.begin() + ptrdiff_t(up_n),
                  d_ups.v.begin());
        for (size_t i = 0; i < d_act[lvl].v.size(); ++i)
            d_act[lvl].v[i] += d_cat.v[up_n + i];
        Tensor d_below;
        upsample2_backward(d_ups, d_below);
        if (j > 0)
            d_cur = std::move(d_below);
        else
            d_h_mid = std::move(d_below);
    }

    Tensor d_pre_mid;
    mul_silu_grad(cc.pre_mid, d_h_mid, d_pre_mid);
    conv3x3_grad_params(cc.mid_in, d_pre_mid, grad + off.mid_w, grad + off.mid_b);
    Tensor d_mid_in;
    conv3x3_grad_input(p + off.mid_w, eL, eL, d_pre_mid, d_mid_in);
    for (size_t i = 0; i < d_act[L].v.size(); ++i) d_act[L].v[i] += d_mid_in.v[i];

    const int plane = d_mid_in.h * d_mid_in.w;
    std::vector<double> d_temb(size_t(eL), 0.0);
    for (int c = 0; c < eL; ++c) {
        const double* row = &d_mid_in.v[size_t(c) * plane];
        double acc = 0.0;
        for (int i = 0; i < plane; ++i) acc += row[i];
        d_temb[c] = acc;
    }
    std::vector<double> d_h_t1(size_t(eL), 0.0);
    for (int o = 0; o < eL; ++o) {
        grad[off.t2_b + o] += d_temb[o];
        double* wg = grad + off.t2_w + size_t(o) * eL;
        const double* wr = p + off.t2_w + size_t(o) * eL;
        for (int k = 0; k < eL; ++k) {
            wg[k] += d_temb[o] * cc.h_t1[k];
            d_h_t1[k] += wr[k] * d_temb[o];
        }
    }
    for (int o = 0; o < eL; ++o) {
        const double d_pre = d_h_t1[o] * silu_grad(cc.pre_t1[o]);
        grad[off.t1_b + o] += d_pre;
        double* wg = grad + off.t1_w + size_t(o) * cfg.temb_dim;
        for (int k = 0; k < cfg.temb_dim; ++k) wg[k] += d_pre * cc.emb[k];
    }

    // encoder, deepest first so each d_act is complete before use
    for (int i = L - 1; i >= 0; --i) {
        Tensor d_pre_d;
        mul_silu_grad(cc.pre_d[i], d_act[i + 1], d_pre_d);
        conv3x3_grad_params(cc.pooled[i], d_pre_d, grad + off.d_w[i],
                            grad + off.d_b[i]);
        Tensor d_pooled;
        conv3x3_grad_input(p + off.d_w[i], cc.pooled[i].c, cfg.channels_at(i + 1),
                           d_pre_d, d_pooled);
        Tensor d_from_pool;
        avgpool2_backward(d_pooled, d_from_pool);
        for (size_t k = 0; k < d_act[i].v.size(); ++k)
            d_act[i].v[k] += d_from_pool.v[k];
    }

    Tensor d_pre_in;
    mul_silu_grad(cc.pre_in, d_act[0], d_pre_in);
    conv3x3_grad_params(cc.input, d_pre_in, grad + off.ci_w, grad + off.ci_b);
}

void check_tensor_shape(const DenoiserConfig& cfg, const Tensor& x) {
    if (x.c != cfg.in_channels || x.h != cfg.resolution || x.w != cfg.resolution)
        throw ShapeError("tensor shape does not match denoiser config");
}

// Per-sample losses/gradients reduced in fixed index groups of 8 so the
// result is byte-identical for any worker count.
constexpr size_t kReduceGroup = 8;

double grouped_loss_grad(const DenoiserParams& params, const Offsets& off,
                         const std::vector<Tensor>& xt, const std::vector<int>& ts,
                         const std::vector<Tensor>& targets, std::vector<double>* grad,
                         int workers) {
    const size_t n = xt.size();
    const size_t n_groups = (n + kReduceGroup - 1) / kReduceGroup;
    std::vector<double> group_loss(n_groups, 0.0);
    std::vector<std::vector<double>> group_grad;
    if (grad) group_grad.assign(n_groups, std::vector<double>());

    auto run_group = [&](size_t g, Cache& cc) {
        double loss_sum = 0.0;
        if (grad) group_grad[g].assign(off.total, 0.0);
        const size_t lo = g * kReduceGroup, hi = std::min(n, lo + kReduceGroup);
        for (size_t s = lo; s < hi; ++s) {
            forward_net(params, off, xt[s], ts[s], cc);
            const size_t coords = cc.out.v.size();
            Tensor d_out(cc.out.c, cc.out.h, cc.out.w);
            double l = 0.0;
            for (size_t i = 0; i < coords; ++i) {
                const double diff = cc.out.v[i] - targets[s].v[i];
                l += diff * diff;
                d_out.v[i] = 2.0 * diff / double(coords);
            }
            loss_sum += l / double(coords);
            if (grad) backward_net(params, off, cc, d_out, group_grad[g].data());
        }
        group_loss[g] = loss_sum;
    };

    const int nw = std::max(1, std::min<int>(workers, int(n_groups)));
    if (nw == 1) {
        Cache cc;
        for (size_t g = 0; g < n_groups; ++g) run_group(g, cc);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(size_t(nw));
        for (int w = 0; w < nw; ++w) {
            pool.emplace_back([&, w]() {
                Cache cc;
                for (size_t g = size_t(w); g < n_groups; g += size_t(nw))
                    run_group(g, cc);
            });
        }
        for (auto& th : pool) th.join();
    }

    double loss = 0.0;
    for (size_t g = 0; g < n_groups; ++g) loss += group_loss[g];
    loss /= double(n);
    if (grad) {
        grad->assign(off.total, 0.0);
        for (size_t g = 0; g < n_groups; ++g)
            for (size_t i = 0; i < off.total; ++i) (*grad)[i] += group_grad[g][i];
        for (double& v : *grad) v /= double(n);
    }
    return loss;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void put_bytes(std::ofstream& f, const void* p, size_t n) {
    f.write(reinterpret_cast<const char*>(p), std::streamsize(n));
}

void get_bytes(std::ifstream& f, void* p, size_t n) {
    f.read(reinterpret_cast<char*>(p), std::streamsize(n));
    if (!f) throw Error("checkpoint truncated");
}

template <typename T>
void put_pod(std::ofstream& f, T v) {
    put_bytes(f, &v, sizeof v);
}

template <typename T>
T get_pod(std::ifstream& f) {
    T v;
    get_bytes(f, &v, sizeof v);
    return v;
}

} // namespace

int DenoiserConfig::channels_at(int level) const {
    return base_channels * (1 << std::min(level, 2));
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ScheduleError("T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ScheduleError("need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.beta.resize(size_t(T));
    for (int t = 0; t < T; ++t)
        s.beta[t] = T == 1 ? beta_start
                           : beta_start + (beta_end - beta_start) * t / double(T - 1);
    derive_schedule(s);
    return s;
}

Tensor forward_sample(const Tensor& x0, int t, const Tensor& noise,
                      const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw TimestepError("timestep out of range");
    if (!x0.same_shape(noise)) throw ShapeError("x0/noise shape mismatch");
    const double ab = sched.alpha_bar[size_t(t) - 1];
    const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
    Tensor out(x0.c, x0.h, x0.w);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = sa * x0.v[i] + sn * noise.v[i];
    return out;
}

DenoiserParams init_denoiser(const DenoiserConfig& cfg, uint64_t seed,
                             bool zero_final) {
    validate_config(cfg);
    DenoiserParams params;
    params.cfg = cfg;
    Offsets off = layout(cfg, &params.groups);
    params.values.assign(off.total, 0.0);

    Rng rng(mix_seed(seed, 0x1217u));
    auto fill_uniform = [&](size_t at, size_t n, int fan_in) {
        const double s = 1.0 / std::sqrt(double(fan_in));
        for (size_t i = 0; i < n; ++i) params.values[at + i] = rng.uniform(-s, s);
    };
    const int L = cfg.levels;
    fill_uniform(off.ci_w, size_t(cfg.channels_at(0)) * cfg.in_channels * 9,
                 cfg.in_channels * 9);
    for (int i = 0; i < L; ++i)
        fill_uniform(off.d_w[i],
                     size_t(cfg.channels_at(i + 1)) * cfg.channels_at(i) * 9,
                     cfg.channels_at(i) * 9);
    const int eL = cfg.channels_at(L);
    fill_uniform(off.t1_w, size_t(eL) * cfg.temb_dim, cfg.temb_dim);
    fill_uniform(off.t2_w, size_t(eL) * eL, eL);
    fill_uniform(off.mid_w, size_t(eL) * eL * 9, eL * 9);
    for (int i = L - 1; i >= 0; --i) {
        const int ci = cfg.channels_at(i + 1) + cfg.channels_at(i);
        fill_uniform(off.u_w[i], size_t(cfg.channels_at(i)) * ci * 9, ci * 9);
    }
    if (!zero_final)
        fill_uniform(off.out_w, size_t(cfg.in_channels) * cfg.channels_at(0) * 9,
                     cfg.channels_at(0) * 9);
    return params;
}

Tensor predict_noise(const DenoiserParams& params, const Tensor& xt, int t) {
    check_tensor_shape(params.cfg, xt);
    if (t < 1) throw TimestepError("timestep must be >= 1");
    Offsets off = layout(params.cfg, nullptr);
    if (off.total != params.values.size())
        throw ShapeError("parameter vector does not match config");
    Cache cc;
    forward_net(params, off, xt, t, cc);
    return cc.out;
}

double diffusion_loss(const DenoiserParams& params, const std::vector<Tensor>& xt,
                      const std::vector<int>& ts, const std::vector<Tensor>& targets) {
    if (xt.empty() || xt.size() != ts.size() || xt.size() != targets.size())
        throw ShapeError("loss inputs must be nonempty and same length");
    for (size_t i = 0; i < xt.size(); ++i) {
        check_tensor_shape(params.cfg, xt[i]);
        check_tensor_shape(params.cfg, targets[i]);
    }
    Offsets off = layout(params.cfg, nullptr);
    return grouped_loss_grad(params, off, xt, ts, targets, nullptr, 1);
}

double diffusion_loss_grad(const DenoiserParams& params, const std::vector<Tensor>& xt,
                           const std::vector<int>& ts,
                           const std::vector<Tensor>& targets,
                           std::vector<double>& grad, int workers) {
    if (xt.empty() || xt.size() != ts.size() || xt.size() != targets.size())
        throw ShapeError("loss inputs must be nonempty and same length");
    for (size_t i = 0; i < xt.size(); ++i) {
        check_tensor_shape(params.cfg, xt[i]);
        check_tensor_shape(params.cfg, targets[i]);
    }
    Offsets off = layout(params.cfg, nullptr);
    if (off.total != params.values.size())
        throw ShapeError("parameter vector does not match config");
    return grouped_loss_grad(params, off, xt, ts, targets, &grad, workers);
}

AdamState init_adam(const DenoiserParams& params, double lr) {
    AdamState a;
    a.m.assign(params.count(), 0.0);
    a.v.assign(params.count(), 0.0);
    a.lr = lr;
    return a;
}

void adam_update(DenoiserParams& params, AdamState& adam,
                 const std::vector<double>& grad) {
    if (grad.size() != params.count() || adam.m.size() != params.count())
        throw ShapeError("gradient/optimizer size mismatch");
    adam.step += 1;
    const double bc1 = 1.0 - std::pow(adam.beta1, double(adam.step));
    const double bc2 = 1.0 - std::pow(adam.beta2, double(adam.step));
    for (size_t i = 0; i < grad.size(); ++i) {
        adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * grad[i];
        adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * grad[i] * grad[i];
        const double mh = adam.m[i] / bc1;
        const double vh = adam.v[i] / bc2;
        params.values[i] -= adam.lr * mh / (std::sqrt(vh) + adam.eps);
    }
}

TrainStepResult train_step(DenoiserParams& params, AdamState& adam,
                           const std::vector<Tensor>& batch,
                           const NoiseSchedule& sched, uint64_t seed, int workers) {
    if (batch.empty()) throw Error("empty training batch");
    std::vector<Tensor> xt(batch.size());
    std::vector<Tensor> targets(batch.size());
    std::vector<int> ts(batch.size());
    for (size_t s = 0; s < batch.size(); ++s) {
        check_tensor_shape(params.cfg, batch[s]);
        Rng rng(mix_seed(seed, 0xd1f5u, s));
        ts[s] = rng.range_int(1, sched.T);
        Tensor noise(batch[s].c, batch[s].h, batch[s].w);
        for (double& v : noise.v) v = rng.normal();
        xt[s] = forward_sample(batch[s], ts[s], noise, sched);
        targets[s] = std::move(noise);
    }

    std::vector<double> grad;
    const double loss = diffusion_loss_grad(params, xt, ts, targets, grad, workers);
    double gsq = 0.0;
    for (double g : grad) gsq += g * g;
    const double gnorm = std::sqrt(gsq);
    if (!std::isfinite(loss) || !std::isfinite(gnorm)) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "non-finite training step: loss=%g grad_norm=%g lr=%g step=%llu",
                      loss, gnorm, adam.lr, (unsigned long long)adam.step);
        throw Error(buf);
    }
    adam_update(params, adam, grad);
    if (!all_finite(params.values)) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "non-finite parameters after update: grad_norm=%g lr=%g step=%llu",
                      gnorm, adam.lr, (unsigned long long)adam.step);
        throw Error(buf);
    }
    return {loss, gnorm};
}

Tensor reverse_sample(const DenoiserParams& params, const NoiseSchedule& sched,
                      uint64_t seed) {
    const DenoiserConfig& cfg = params.cfg;
    Rng rng(mix_seed(seed, 0x5a3fu));
    Tensor x(cfg.in_channels, cfg.resolution, cfg.resolution);
    for (double& v : x.v) v = rng.normal();

    Offsets off = layout(cfg, nullptr);
    if (off.total != params.values.size())
        throw ShapeError("parameter vector does not match config");
    Cache cc;
    for (int t = sched.T; t >= 1; --t) {
        forward_net(params, off, x, t, cc);
        const double a = sched.alpha[size_t(t) - 1];
        const double ab = sched.alpha_bar[size_t(t) - 1];
        const double beta = sched.beta[size_t(t) - 1];
        const double coef = beta / std::sqrt(1.0 - ab);
        const double inv_sqrt_a = 1.0 / std::sqrt(a);
        const double sigma = std::sqrt(beta);
        for (size_t i = 0; i < x.v.size(); ++i) {
            double mu = inv_sqrt_a * (x.v[i] - coef * cc.out.v[i]);
            x.v[i] = t > 1 ? mu + sigma * rng.normal() : mu;
        }
        if (!all_finite(x.v)) throw SamplingDiverged(t);
    }
    for (double& v : x.v) v = std::clamp(v, -1.0, 1.0);
    return x;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open checkpoint for writing: " + path);
    f.write("HGCK", 4);
    put_pod<uint32_t>(f, 1); // format version
    const DenoiserConfig& c = ckpt.params.cfg;
    put_pod<int32_t>(f, c.resolution);
    put_pod<int32_t>(f, c.in_channels);
    put_pod<int32_t>(f, c.base_channels);
    put_pod<int32_t>(f, c.levels);
    put_pod<int32_t>(f, c.temb_dim);
    put_pod<uint64_t>(f, ckpt.params.count());
    put_bytes(f, ckpt.params.values.data(), ckpt.params.count() * sizeof(double));
    put_pod<uint64_t>(f, ckpt.adam.step);
    put_pod<double>(f, ckpt.adam.lr);
    put_pod<double>(f, ckpt.adam.beta1);
    put_pod<double>(f, ckpt.adam.beta2);
    put_pod<double>(f, ckpt.adam.eps);
    put_bytes(f, ckpt.adam.m.data(), ckpt.adam.m.size() * sizeof(double));
    put_bytes(f, ckpt.adam.v.data(), ckpt.adam.v.size() * sizeof(double));
    put_pod<int32_t>(f, ckpt.sched.T);
    put_bytes(f, ckpt.sched.beta.data(), ckpt.sched.beta.size() * sizeof(double));
    put_pod<uint64_t>(f, ckpt.train_seed);
    put_pod<uint64_t>(f, ckpt.steps_done);
    if (!f) throw Error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint: " + path);
    char magic[4];
    get_bytes(f, magic, 4);
    if (std::memcmp(magic, "HGCK", 4) != 0) throw Error("bad checkpoint magic");
    if (get_pod<uint32_t>(f) != 1) throw Error("unsupported checkpoint version");

    Checkpoint ckpt;
    DenoiserConfig cfg;
    cfg.resolution = get_pod<int32_t>(f);
    cfg.in_channels = get_pod<int32_t>(f);
    cfg.base_channels = get_pod<int32_t>(f);
    cfg.levels = get_pod<int32_t>(f);
    cfg.temb_dim = get_pod<int32_t>(f);
    validate_config(cfg);
    ckpt.params.cfg = cfg;
    Offsets off = layout(cfg, &ckpt.params.groups);
    const uint64_t n = get_pod<uint64_t>(f);
    if (n != off.total) throw Error("checkpoint parameter count mismatch");
    ckpt.params.values.resize(n);
    get_bytes(f, ckpt.params.values.data(), n * sizeof(double));
    ckpt.adam.step = get_pod<uint64_t>(f);
    ckpt.adam.lr = get_pod<double>(f);
    ckpt.adam.beta1 = get_pod<double>(f);
    ckpt.adam.beta2 = get_pod<double>(f);
    ckpt.adam.eps = get_pod<double>(f);
    ckpt.adam.m.resize(n);
    ckpt.adam.v.resize(n);
    get_bytes(f, ckpt.adam.m.data(), n * sizeof(double));
    get_bytes(f, ckpt.adam.v.data(), n * sizeof(double));
    const int32_t T = get_pod<int32_t>(f);
    if (T < 1) throw Error("checkpoint schedule invalid");
    ckpt.sched.beta.resize(size_t(T));
    get_bytes(f, ckpt.sched.beta.data(), size_t(T) * sizeof(double));
    derive_schedule(ckpt.sched);
    ckpt.train_seed = get_pod<uint64_t>(f);
    ckpt.steps_done = get_pod<uint64_t>(f);
    return ckpt;
}

} // namespace herdgen
