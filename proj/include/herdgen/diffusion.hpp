#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "herdgen/tensor.hpp"

namespace herdgen {

struct ScheduleError : Error {
    explicit ScheduleError(const std::string& msg) : Error(msg) {}
};
struct TimestepError : Error {
    explicit TimestepError(const std::string& msg) : Error(msg) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};
struct SamplingDiverged : Error {
    int timestep;
    SamplingDiverged(int t)
        : Error("non-finite value during reverse sampling at t=" + std::to_string(t)),
          timestep(t) {}
};

// beta_t with the derived alpha products, 1-indexed by timestep (beta[t-1]).
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
};

NoiseSchedule make_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);

// Closed-form marginal x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
Tensor forward_sample(const Tensor& x0, int t, const Tensor& noise,
                      const NoiseSchedule& sched);

struct DenoiserConfig {
    int resolution = 64;
    int in_channels = 3;
    int base_channels = 12;
    int levels = 3; // downsampling steps; resolution must divide by 2^levels
    int temb_dim = 32;

    int channels_at(int level) const; // encoder width at a given depth
};

struct ParamGroup {
    std::string name;
    size_t offset = 0;
    size_t size = 0;
};

// Noise-prediction network: conv stem, `levels` pooled conv blocks down, a
// bottleneck conv with a sinusoidal timestep embedding added, `levels`
// nearest-upsample conv blocks with concatenated skips, zero-initialized
// output conv.
struct DenoiserParams {
    DenoiserConfig cfg;
    std::vector<double> values;
    std::vector<ParamGroup> groups;

    size_t count() const { return values.size(); }
};

DenoiserParams init_denoiser(const DenoiserConfig& cfg, uint64_t seed,
                             bool zero_final = true);

Tensor predict_noise(const DenoiserParams& params, const Tensor& xt, int t);

// Mean over coordinates and samples of (prediction - target)^2.
double diffusion_loss(const DenoiserParams& params, const std::vector<Tensor>& xt,
                      const std::vector<int>& ts, const std::vector<Tensor>& targets);

// Analytic gradient of diffusion_loss w.r.t. every parameter. Samples are
// accumulated in fixed index groups of 8, so the result is byte-identical
// for any worker count.
double diffusion_loss_grad(const DenoiserParams& params, const std::vector<Tensor>& xt,
                           const std::vector<int>& ts, const std::vector<Tensor>& targets,
                           std::vector<double>& grad, int workers = 1);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    uint64_t step = 0;
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState init_adam(const DenoiserParams& params, double lr = 2e-4);
void adam_update(DenoiserParams& params, AdamState& adam, const std::vector<double>& grad);

struct TrainStepResult {
    double loss = 0.0;
    double grad_norm = 0.0;
};

// One noise-prediction step: per sample draw t ~ U[1,T], draw eps, form x_t,
// regress the network output onto eps, apply one Adam update. The per-sample
// RNG streams derive from (seed, sample index), so results do not depend on
// the worker count.
TrainStepResult train_step(DenoiserParams& params, AdamState& adam,
                           const std::vector<Tensor>& batch,
                           const NoiseSchedule& sched, uint64_t seed, int workers = 1);

// Ancestral sampler with fixed variance beta_t; z is omitted on the final
// step and the output is clamped to [-1, 1].
Tensor reverse_sample(const DenoiserParams& params, const NoiseSchedule& sched,
                      uint64_t seed);

struct Checkpoint {
    DenoiserParams params;
    AdamState adam;
    NoiseSchedule sched;
    uint64_t train_seed = 0;
    uint64_t steps_done = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace herdgen
