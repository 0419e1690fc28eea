#ifndef GTFD_TRAIN_HPP
#define GTFD_TRAIN_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gtfd/data.hpp"
#include "gtfd/nn.hpp"
#include "gtfd/optim.hpp"

namespace gtfd {

enum class TrainMode { dual_critic, plain_wgan, supervised_l2 };

struct TrainConfig {
  int64_t batch_size = 8;
  double lambda = 10.0;
  AdamHyper adam_g;  // (2e-4, .5, .9) defaults
  AdamHyper adam_c;
  int64_t total_batches = 1000;
  int64_t n_critic = 1;
  TrainMode mode = TrainMode::dual_critic;
  ResidualMode residual_mode = ResidualMode::additive;
  uint64_t seed = 0;
  int64_t eval_every = 100;
  int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  double clamp_min = 1e-3;
  bool use_obs1 = true;  // renoising term / critic on noisy data
  bool use_obs2 = true;  // residual term / critic on noise
};

struct MetricsRecord {
  int64_t step = 0;
  double loss_c_yd = 0;
  double loss_c_eta = 0;
  double loss_g = 0;
  double gp_yd = 0;
  double gp_eta = 0;
  double w1_yd = 0;  // negated critic loss without penalty
  double w1_eta = 0;
  std::optional<double> psnr;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);

struct DataSources {
  // ydelta samples (dual/supervised) or real data y (plain wgan)
  std::function<Tensor(Rng&, int64_t)> sample_noisy;
  // eta samples (dual) or latent draws (plain wgan)
  std::function<Tensor(Rng&, int64_t)> sample_noise;
  // clean y; required for supervised_l2 only
  std::function<Tensor(Rng&, int64_t)> sample_clean;
  // optional held-out PSNR hook evaluated at metric steps
  std::function<double(const NetworkSpec&, const ParamStore&)> eval_psnr;
};

struct GanNets {
  NetworkSpec gen;
  ParamStore gen_params;
  NetworkSpec critic_yd;
  ParamStore critic_yd_params;
  NetworkSpec critic_eta;  // unused in plain_wgan / supervised modes
  ParamStore critic_eta_params;
};

// ydelta - yhat, or pointwise ydelta / clamp_abs_min(yhat, clamp_min).
Tensor residual(const Tensor& ydelta, const Tensor& yhat, ResidualMode mode, double clamp_min);

// mean over the batch of relu(||grad_x C(x)|| - 1)^2 at per-sample
// uniform interpolates between real and fake; differentiable w.r.t. the
// critic parameters in `params`.
Tensor gradient_penalty(const NetworkSpec& critic, const ParamMap& params, Tape& tape,
                        const Tensor& real, const Tensor& fake, Rng& rng);

class Trainer {
 public:
  Trainer(GanNets nets, TrainConfig config, DataSources data);

  struct CriticLosses {
    double loss_yd = 0, loss_eta = 0, gp_yd = 0, gp_eta = 0, w1_yd = 0, w1_eta = 0;
  };

  // One Adam step for both critics on the given batches; the generator
  // output is treated as constant.
  CriticLosses critic_step(const Tensor& yd_batch, const Tensor& eta_batch);

  // One Adam step for the generator on fresh batches; critics constant.
  double generator_step(const Tensor& yd_batch, const Tensor& eta_batch, const Tensor& clean);

  // Full Algorithm-1 schedule. Metric rows are appended to the returned
  // vector and passed to `sink` when set.
  std::vector<MetricsRecord> train(const std::function<void(const MetricsRecord&)>& sink = {},
                                   const std::function<void(int64_t)>& checkpoint_hook = {});

  GanNets& nets() { return nets_; }
  const TrainConfig& config() const { return config_; }
  AdamState& adam_g() { return adam_g_; }
  AdamState& adam_c_yd() { return adam_c_yd_; }
  AdamState& adam_c_eta() { return adam_c_eta_; }
  int64_t step() const { return step_; }
  void set_step(int64_t s) { step_ = s; }
  Rng& rng() { return rng_; }

 private:
  struct OneCritic {
    double loss, gp, w1;
  };
  OneCritic train_one_critic(const NetworkSpec& spec, ParamStore& store, AdamState& adam,
                             const Tensor& real, const Tensor& fake);

  GanNets nets_;
  TrainConfig config_;
  DataSources data_;
  AdamState adam_g_, adam_c_yd_, adam_c_eta_;
  Rng rng_;
  int64_t step_ = 0;
};

}  // namespace gtfd

#endif
