#include <cmath>
#include <vector>

#include <doctest.h>

#include "herdgen/diffusion.hpp"
#include "herdgen/rng.hpp"

using namespace herdgen;

namespace {

Tensor make_tensor(int c, int h, int w, double fill = 0.0) {
    Tensor t;
    t.c = c;
    t.h = h;
    t.w = w;
    t.v.assign(size_t(c) * h * w, fill);
    return t;
}

Tensor random_tensor(int c, int h, int w, uint64_t seed, double lo = -1, double hi = 1) {
    Tensor t = make_tensor(c, h, w);
    Rng rng(seed);
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

Tensor normal_tensor(int c, int h, int w, uint64_t seed) {
    Tensor t = make_tensor(c, h, w);
    Rng rng(seed);
    for (double& v : t.v) v = rng.normal();
    return t;
}

// 8x8 blob image pair used by the training smoke test
std::vector<Tensor> two_blob_dataset() {
    std::vector<Tensor> out;
    for (int which = 0; which < 2; ++which) {
        Tensor t = make_tensor(3, 8, 8, -0.6);
        const int cx = which == 0 ? 2 : 5, cy = which == 0 ? 2 : 5;
        for (int c = 0; c < 3; ++c)
            for (int y = cy - 1; y <= cy + 1; ++y)
                for (int x = cx - 1; x <= cx + 1; ++x) t.at(c, y, x) = 0.7;
        out.push_back(std::move(t));
    }
    return out;
}

DenoiserConfig toy_config() {
    DenoiserConfig cfg;
    cfg.resolution = 4;
    cfg.in_channels = 3;
    cfg.base_channels = 3;
    cfg.levels = 2;
    cfg.temb_dim = 4;
    return cfg;
}

} // namespace

TEST_CASE("make_schedule stated cases and oracle product") {
    const NoiseSchedule one = make_schedule(1, 0.5, 0.5);
    REQUIRE(one.T == 1);
    CHECK(one.alpha_bar[0] == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(make_schedule(1000, 0.02, 1e-4), ScheduleError);
    CHECK_THROWS_AS(make_schedule(0), ScheduleError);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02), ScheduleError);
    CHECK_THROWS_AS(make_schedule(10, 0.1, 1.0), ScheduleError);

    const NoiseSchedule s = make_schedule(1000);
    REQUIRE(s.T == 1000);
    CHECK(s.beta.front() == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta.back() == doctest::Approx(0.02).epsilon(1e-12));

    // independent long-double product oracle
    long double prod = 1.0L;
    for (int t = 1; t <= 1000; ++t) {
        const long double beta = 1e-4L + (t - 1) * (0.02L - 1e-4L) / 999.0L;
        prod *= (1.0L - beta);
        if (t == 1000) break;
    }
    CHECK(std::abs(s.alpha_bar.back() - double(prod)) / double(prod) < 1e-9);
    CHECK(s.alpha_bar.back() == doctest::Approx(4.0e-5).epsilon(0.05));

    // monotone decreasing alpha_bar
    for (int t = 1; t < s.T; ++t) CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
}

TEST_CASE("forward_sample closed form, limits, and errors") {
    const NoiseSchedule s = make_schedule(100);
    const Tensor x0 = random_tensor(3, 4, 4, 10);
    const Tensor eps = normal_tensor(3, 4, 4, 11);

    const int t = 37;
    const Tensor xt = forward_sample(x0, t, eps, s);
    const double sa = std::sqrt(s.alpha_bar[t - 1]);
    const double sb = std::sqrt(1.0 - s.alpha_bar[t - 1]);
    for (size_t i = 0; i < xt.v.size(); ++i)
        CHECK(xt.v[i] == doctest::Approx(sa * x0.v[i] + sb * eps.v[i]).epsilon(1e-12));

    // hypothetical alpha_bar = 1 -> x_t = x_0 exactly
    NoiseSchedule degenerate = s;
    degenerate.alpha_bar[0] = 1.0;
    const Tensor same = forward_sample(x0, 1, eps, degenerate);
    for (size_t i = 0; i < same.v.size(); ++i) CHECK(same.v[i] == x0.v[i]);

    // x0 = 0 -> pure scaled noise
    const Tensor zero = make_tensor(3, 4, 4, 0.0);
    const Tensor noise_only = forward_sample(zero, t, eps, s);
    for (size_t i = 0; i < noise_only.v.size(); ++i)
        CHECK(noise_only.v[i] == doctest::Approx(sb * eps.v[i]).epsilon(1e-12));

    CHECK_THROWS_AS(forward_sample(x0, 0, eps, s), TimestepError);
    CHECK_THROWS_AS(forward_sample(x0, 101, eps, s), TimestepError);
    CHECK_THROWS_AS(forward_sample(x0, t, normal_tensor(3, 4, 5, 1), s), ShapeError);
}

TEST_CASE("forward_sample Monte-Carlo statistics (reduced pin)") {
    const NoiseSchedule s = make_schedule(1000);
    const Tensor x0 = random_tensor(1, 2, 2, 21);
    const int n = 4000;
    for (int t : {1, 500}) {
        std::vector<double> mean(x0.v.size(), 0.0), m2(x0.v.size(), 0.0);
        for (int k = 0; k < n; ++k) {
            const Tensor eps = normal_tensor(1, 2, 2, mix_seed(500, t, k));
            const Tensor xt = forward_sample(x0, t, eps, s);
            for (size_t i = 0; i < xt.v.size(); ++i) {
                const double d = xt.v[i] - mean[i];
                mean[i] += d / (k + 1);
                m2[i] += d * (xt.v[i] - mean[i]);
            }
        }
        const double abar = s.alpha_bar[t - 1];
        const double var_true = 1.0 - abar;
        for (size_t i = 0; i < x0.v.size(); ++i) {
            const double se_mean = std::sqrt(var_true / n);
            CHECK(std::abs(mean[i] - std::sqrt(abar) * x0.v[i]) <= 3 * se_mean);
            const double var = m2[i] / (n - 1);
            const double se_var = var_true * std::sqrt(2.0 / (n - 1));
            CHECK(std::abs(var - var_true) <= 3 * se_var);
        }
    }
}

TEST_CASE("denoiser config, init, and zero final layer") {
    const DenoiserConfig cfg; // defaults: base 12, levels 3
    CHECK(cfg.channels_at(0) == 12);
    CHECK(cfg.channels_at(1) == 24);
    CHECK(cfg.channels_at(2) == 48);
    CHECK(cfg.channels_at(3) == 48);

    const DenoiserParams p = init_denoiser(toy_config(), 5);
    size_t covered = 0;
    for (size_t g = 0; g < p.groups.size(); ++g) {
        CHECK(p.groups[g].offset == covered);
        covered += p.groups[g].size;
    }
    CHECK(covered == p.count());

    const DenoiserParams p2 = init_denoiser(toy_config(), 5);
    CHECK(p.values == p2.values);
    const DenoiserParams p3 = init_denoiser(toy_config(), 6);
    CHECK(p.values != p3.values);

    // zero-initialized final conv -> output is the zero tensor
    const NoiseSchedule s = make_schedule(10, 1e-4, 0.02);
    const Tensor xt = random_tensor(3, 4, 4, 7);
    const Tensor out = predict_noise(p, xt, 3);
    for (double v : out.v) CHECK(v == 0.0);
    (void)s;
}

TEST_CASE("predict_noise is deterministic, shape-checked, and uses the timestep") {
    const DenoiserParams p = init_denoiser(toy_config(), 9, /*zero_final=*/false);
    const Tensor xt = random_tensor(3, 4, 4, 8);
    const Tensor a = predict_noise(p, xt, 2);
    const Tensor b = predict_noise(p, xt, 2);
    CHECK(a.v == b.v);
    CHECK(a.c == 3);
    CHECK(a.h == 4);
    CHECK(a.w == 4);

    const Tensor c = predict_noise(p, xt, 9);
    double diff = 0;
    for (size_t i = 0; i < a.v.size(); ++i) diff += std::abs(a.v[i] - c.v[i]);
    CHECK(diff > 1e-9); // timestep embedding reaches the output

    CHECK_THROWS_AS(predict_noise(p, random_tensor(3, 8, 8, 1), 2), ShapeError);
    CHECK_THROWS_AS(predict_noise(p, xt, 0), TimestepError);
}

TEST_CASE("diffusion loss zero when targets equal predictions") {
    const DenoiserParams p = init_denoiser(toy_config(), 12, false);
    const std::vector<Tensor> xt{random_tensor(3, 4, 4, 13), random_tensor(3, 4, 4, 14)};
    const std::vector<int> ts{2, 7};
    std::vector<Tensor> targets;
    for (size_t i = 0; i < xt.size(); ++i) targets.push_back(predict_noise(p, xt[i], ts[i]));
    CHECK(diffusion_loss(p, xt, ts, targets) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("analytic gradient matches finite differences on sampled params") {
    DenoiserParams p = init_denoiser(toy_config(), 31, /*zero_final=*/false);
    const std::vector<Tensor> xt{random_tensor(3, 4, 4, 32), random_tensor(3, 4, 4, 33)};
    const std::vector<int> ts{3, 8};
    const std::vector<Tensor> targets{normal_tensor(3, 4, 4, 34), normal_tensor(3, 4, 4, 35)};

    std::vector<double> grad;
    diffusion_loss_grad(p, xt, ts, targets, grad);
    REQUIRE(grad.size() == p.count());

    const double h = 1e-4;
    Rng rng(36);
    for (const ParamGroup& g : p.groups) {
        // first, last, and a few random params per group
        std::vector<size_t> picks{g.offset, g.offset + g.size - 1};
        for (int k = 0; k < 4; ++k) picks.push_back(g.offset + rng.bounded(g.size));
        for (size_t idx : picks) {
            const double keep = p.values[idx];
            p.values[idx] = keep + h;
            const double up = diffusion_loss(p, xt, ts, targets);
            p.values[idx] = keep - h;
            const double dn = diffusion_loss(p, xt, ts, targets);
            p.values[idx] = keep;
            const double fd = (up - dn) / (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(grad[idx]), 1e-8});
            CHECK(std::abs(fd - grad[idx]) / denom <= 1e-3);
        }
    }
}

TEST_CASE("diffusion_loss_grad is independent of worker count") {
    const DenoiserParams p = init_denoiser(toy_config(), 41, false);
    std::vector<Tensor> xt;
    std::vector<int> ts;
    std::vector<Tensor> targets;
    for (int i = 0; i < 19; ++i) { // not a multiple of the reduction group
        xt.push_back(random_tensor(3, 4, 4, mix_seed(42, i)));
        ts.push_back(1 + i % 10);
        targets.push_back(normal_tensor(3, 4, 4, mix_seed(43, i)));
    }
    std::vector<double> g1, g3;
    const double l1 = diffusion_loss_grad(p, xt, ts, targets, g1, 1);
    const double l3 = diffusion_loss_grad(p, xt, ts, targets, g3, 3);
    CHECK(l1 == l3);
    CHECK(g1 == g3);
}

TEST_CASE("adam first step has closed form") {
    DenoiserParams p;
    p.cfg = toy_config();
    p.values = {1.0};
    p.groups = {{"w", 0, 1}};
    AdamState adam = init_adam(p, 2e-4);
    adam_update(p, adam, {0.5});
    CHECK(p.values[0] == doctest::Approx(1.0 - 2e-4).epsilon(1e-6));
    CHECK(adam.step == 1);
}

TEST_CASE("train_step with zero learning rate leaves parameters bit-identical") {
    DenoiserParams p = init_denoiser(toy_config(), 51, false);
    const std::vector<double> before = p.values;
    AdamState adam = init_adam(p, 0.0);
    const NoiseSchedule s = make_schedule(10, 1e-4, 0.02);
    const std::vector<Tensor> batch{random_tensor(3, 4, 4, 52), random_tensor(3, 4, 4, 53)};
    const TrainStepResult r = train_step(p, adam, batch, s, 99);
    CHECK(p.values == before);
    CHECK(r.loss > 0.0);
}

TEST_CASE("train_step aborts with diagnostics on non-finite loss") {
    DenoiserParams p = init_denoiser(toy_config(), 61, false);
    for (double& v : p.values) v = 1e200;
    AdamState adam = init_adam(p, 2e-4);
    const NoiseSchedule s = make_schedule(10, 1e-4, 0.02);
    const std::vector<Tensor> batch{random_tensor(3, 4, 4, 62)};
    try {
        train_step(p, adam, batch, s, 1);
        FAIL("expected a diagnostic error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("lr") != std::string::npos);
    }
}

TEST_CASE("train_step is deterministic and worker-invariant") {
    const NoiseSchedule s = make_schedule(50, 1e-4, 0.02);
    const std::vector<Tensor> batch{random_tensor(3, 4, 4, 70), random_tensor(3, 4, 4, 71),
                                    random_tensor(3, 4, 4, 72)};
    auto run = [&](int workers) {
        DenoiserParams p = init_denoiser(toy_config(), 73, false);
        AdamState adam = init_adam(p, 1e-3);
        TrainStepResult last{};
        for (int i = 0; i < 3; ++i) last = train_step(p, adam, batch, s, mix_seed(74, i), workers);
        return std::make_pair(p.values, last.loss);
    };
    const auto [v1, l1] = run(1);
    const auto [v2, l2] = run(4);
    CHECK(v1 == v2);
    CHECK(l1 == l2);
}

TEST_CASE("training on the two-blob dataset halves the loss") {
    const NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    DenoiserParams p = init_denoiser({8, 3, 12, 3, 32, }, 80);
    AdamState adam = init_adam(p, 1e-3);
    const std::vector<Tensor> batch = two_blob_dataset();

    double first10 = 0.0;
    double best_trailing = 1e300;
    std::vector<double> window;
    for (int step = 0; step < 500; ++step) {
        const TrainStepResult r = train_step(p, adam, batch, s, mix_seed(81, step));
        if (step < 10) first10 += r.loss / 10;
        window.push_back(r.loss);
        if (window.size() > 10) window.erase(window.begin());
        if (step >= 10 && window.size() == 10) {
            double avg = 0;
            for (double v : window) avg += v / 10;
            best_trailing = std::min(best_trailing, avg);
        }
    }
    CHECK(best_trailing <= 0.5 * first10);
}

TEST_CASE("reverse_sample shape, clamp, determinism") {
    const DenoiserConfig cfg{8, 3, 6, 2, 8};
    const DenoiserParams p = init_denoiser(cfg, 90, false);
    const NoiseSchedule s = make_schedule(20, 1e-4, 0.02);
    const Tensor a = reverse_sample(p, s, 123);
    CHECK(a.c == 3);
    CHECK(a.h == 8);
    CHECK(a.w == 8);
    for (double v : a.v) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    const Tensor b = reverse_sample(p, s, 123);
    CHECK(a.v == b.v);
    const Tensor c = reverse_sample(p, s, 124);
    CHECK(a.v != c.v);
}

TEST_CASE("checkpoint round-trip preserves training trajectory bit-exactly") {
    const NoiseSchedule s = make_schedule(30, 1e-4, 0.02);
    const std::vector<Tensor> batch{random_tensor(3, 4, 4, 95), random_tensor(3, 4, 4, 96)};

    DenoiserParams p = init_denoiser(toy_config(), 97, false);
    AdamState adam = init_adam(p, 1e-3);
    for (int i = 0; i < 4; ++i) train_step(p, adam, batch, s, mix_seed(98, i));

    Checkpoint ck;
    ck.params = p;
    ck.adam = adam;
    ck.sched = s;
    ck.train_seed = 98;
    ck.steps_done = 4;
    const std::string path = "test_ckpt.bin";
    save_checkpoint(path, ck);
    Checkpoint back = load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(back.params.values == p.values);
    CHECK(back.adam.m == adam.m);
    CHECK(back.adam.v == adam.v);
    CHECK(back.adam.step == adam.step);
    CHECK(back.sched.beta == s.beta);
    CHECK(back.train_seed == 98);
    CHECK(back.steps_done == 4);

    // resumed training equals uninterrupted training
    DenoiserParams p_cont = p;
    AdamState adam_cont = adam;
    for (int i = 4; i < 8; ++i) train_step(p_cont, adam_cont, batch, s, mix_seed(98, i));
    for (int i = 4; i < 8; ++i) train_step(back.params, back.adam, batch, s, mix_seed(98, i));
    CHECK(back.params.values == p_cont.values);
}
