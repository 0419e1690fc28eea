#include "gtfd/train.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gtfd {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// eta applied through the forward model: additive -> x + eta,
// multiplicative -> x .* eta. Works on tracked tensors.
Tensor apply_noise(const Tensor& x, const Tensor& eta, ResidualMode mode) {
  return mode == ResidualMode::additive ? ops::add(x, eta) : ops::mul(x, eta);
}

}  // namespace

std::string metrics_csv_header() {
  return "step,loss_c_yd,loss_c_eta,loss_g,gp_yd,gp_eta,w1_yd,w1_eta,psnr";
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.step);
  for (double v : {r.loss_c_yd, r.loss_c_eta, r.loss_g, r.gp_yd, r.gp_eta, r.w1_yd, r.w1_eta})
    row += "," + fmt(v);
  row += ",";
  if (r.psnr) row += fmt(*r.psnr);
  return row;
}

Tensor residual(const Tensor& ydelta, const Tensor& yhat, ResidualMode mode, double clamp_min) {
  if (mode == ResidualMode::additive) return ops::sub(ydelta, yhat);
  return ops::mul(ydelta, ops::reciprocal(ops::clamp_abs_min(yhat, clamp_min)));
}

Tensor gradient_penalty(const NetworkSpec& critic, const ParamMap& params, Tape& tape,
                        const Tensor& real, const Tensor& fake, Rng& rng) {
  if (real.shape() != fake.shape())
    throw std::runtime_error("gradient_penalty: shape mismatch " + shape_str(real.shape()) +
                             " vs " + shape_str(fake.shape()));
  int64_t n = real.shape()[0];
  int64_t per = real.size() / n;
  std::vector<double> mix(static_cast<size_t>(real.size()));
  auto rd = real.data();
  auto fd = fake.data();
  for (int64_t i = 0; i < n; ++i) {
    double eps = rng.uniform();  // one draw per sample
    for (int64_t j = 0; j < per; ++j) {
      int64_t k = i * per + j;
      mix[static_cast<size_t>(k)] = eps * rd[k] + (1.0 - eps) * fd[k];
    }
  }
  Tensor xbar = tape.leaf(Tensor(real.shape(), std::move(mix)));
  Tensor score = ops::sum(forward(critic, params, xbar));
  Tensor grad = tape.backward(score, std::array{xbar}, /*create_graph=*/true)[0];
  Tensor excess = ops::relu(ops::add_const(ops::l2norm(grad), -1.0));
  return ops::mean(ops::mul(excess, excess));
}

Trainer::Trainer(GanNets nets, TrainConfig config, DataSources data)
    : nets_(std::move(nets)),
      config_(config),
      data_(std::move(data)),
      rng_(config.seed) {
  adam_g_.hyper = config_.adam_g;
  adam_c_yd_.hyper = config_.adam_c;
  adam_c_eta_.hyper = config_.adam_c;
  if (config_.mode == TrainMode::dual_critic && !config_.use_obs1 && !config_.use_obs2)
    throw std::runtime_error("train: dual_critic needs at least one observation term");
}

Trainer::OneCritic Trainer::train_one_critic(const NetworkSpec& spec, ParamStore& store,
                                             AdamState& adam, const Tensor& real,
                                             const Tensor& fake) {
  Tape tape;
  ParamMap pm = attach(tape, store, /*trainable=*/true);
  Tensor base = ops::sub(ops::mean(forward(spec, pm, fake)), ops::mean(forward(spec, pm, real)));
  Tensor gp = gradient_penalty(spec, pm, tape, real, fake, rng_);
  Tensor loss = ops::add(base, ops::scale(gp, config_.lambda));
  if (!std::isfinite(loss.item()))
    throw std::runtime_error("train: non-finite critic loss at step " + std::to_string(step_) +
                             " (base " + fmt(base.item()) + ", gp " + fmt(gp.item()) + ")");

  std::vector<std::string> names;
  std::vector<Tensor> wrt;
  for (auto& [name, t] : pm) {
    names.push_back(name);
    wrt.push_back(t);
  }
  std::vector<Tensor> grads = tape.backward(loss, wrt);
  std::map<std::string, Tensor> gmap;
  for (size_t i = 0; i < names.size(); ++i) {
    if (!all_finite(grads[i].data()))
      throw std::runtime_error("train: non-finite critic gradient for " + names[i] + " at step " +
                               std::to_string(step_));
    gmap.emplace(names[i], grads[i]);
  }
  adam_step(store, gmap, adam);
  return {loss.item(), gp.item(), -base.item()};
}

Trainer::CriticLosses Trainer::critic_step(const Tensor& yd_batch, const Tensor& eta_batch) {
  CriticLosses out;
  if (config_.mode == TrainMode::plain_wgan) {
    // yd_batch: real data, eta_batch: latent input to G
    Tensor fake = forward_detached(nets_.gen, nets_.gen_params, eta_batch);
    OneCritic c = train_one_critic(nets_.critic_yd, nets_.critic_yd_params, adam_c_yd_, yd_batch,
                                   fake);
    out.loss_yd = c.loss;
    out.gp_yd = c.gp;
    out.w1_yd = c.w1;
    return out;
  }

  // the same noisy draw serves as generator input and real example, and
  // the same eta draw as renoising noise and real noise example
  Tensor yhat = forward_detached(nets_.gen, nets_.gen_params, yd_batch);
  if (config_.use_obs1) {
    Tensor renoised = apply_noise(yhat, eta_batch, config_.residual_mode);
    OneCritic c = train_one_critic(nets_.critic_yd, nets_.critic_yd_params, adam_c_yd_, yd_batch,
                                   renoised);
    out.loss_yd = c.loss;
    out.gp_yd = c.gp;
    out.w1_yd = c.w1;
  }
  if (config_.use_obs2) {
    Tensor res = residual(yd_batch, yhat, config_.residual_mode, config_.clamp_min);
    OneCritic c = train_one_critic(nets_.critic_eta, nets_.critic_eta_params, adam_c_eta_,
                                   eta_batch, res);
    out.loss_eta = c.loss;
    out.gp_eta = c.gp;
    out.w1_eta = c.w1;
  }
  return out;
}

double Trainer::generator_step(const Tensor& yd_batch, const Tensor& eta_batch,
                               const Tensor& clean) {
  Tape tape;
  ParamMap gp = attach(tape, nets_.gen_params, /*trainable=*/true);
  Tensor input = config_.mode == TrainMode::plain_wgan ? eta_batch : yd_batch;
  Tensor yhat = forward(nets_.gen, gp, tape.constant(input));

  Tensor loss;
  if (config_.mode == TrainMode::supervised_l2) {
    Tensor d = ops::sub(yhat, clean);
    loss = ops::mean(ops::mul(d, d));
  } else if (config_.mode == TrainMode::plain_wgan) {
    ParamMap cp = attach(tape, nets_.critic_yd_params, /*trainable=*/false);
    loss = ops::neg(ops::mean(forward(nets_.critic_yd, cp, yhat)));
  } else {
    if (config_.use_obs1) {
      ParamMap cp = attach(tape, nets_.critic_yd_params, /*trainable=*/false);
      Tensor renoised = apply_noise(yhat, eta_batch, config_.residual_mode);
      loss = ops::neg(ops::mean(forward(nets_.critic_yd, cp, renoised)));
    }
    if (config_.use_obs2) {
      ParamMap cp = attach(tape, nets_.critic_eta_params, /*trainable=*/false);
      Tensor res = residual(yd_batch, yhat, config_.residual_mode, config_.clamp_min);
      Tensor term = ops::neg(ops::mean(forward(nets_.critic_eta, cp, res)));
      loss = loss.defined() ? ops::add(loss, term) : term;
    }
  }
  if (!std::isfinite(loss.item()))
    throw std::runtime_error("train: non-finite generator loss at step " + std::to_string(step_));

  std::vector<std::string> names;
  std::vector<Tensor> wrt;
  for (auto& [name, t] : gp) {
    names.push_back(name);
    wrt.push_back(t);
  }
  std::vector<Tensor> grads = tape.backward(loss, wrt);
  std::map<std::string, Tensor> gmap;
  for (size_t i = 0; i < names.size(); ++i) {
    if (!all_finite(grads[i].data()))
      throw std::runtime_error("train: non-finite generator gradient for " + names[i] +
                               " at step " + std::to_string(step_));
    gmap.emplace(names[i], grads[i]);
  }
  adam_step(nets_.gen_params, gmap, adam_g_);
  return loss.item();
}

std::vector<MetricsRecord> Trainer::train(const std::function<void(const MetricsRecord&)>& sink,
                                          const std::function<void(int64_t)>& checkpoint_hook) {
  std::vector<MetricsRecord> log;
  int64_t b = config_.batch_size;
  while (step_ < config_.total_batches) {
    CriticLosses cl;
    if (config_.mode != TrainMode::supervised_l2) {
      for (int64_t i = 0; i < config_.n_critic; ++i) {
        Tensor yd = data_.sample_noisy(rng_, b);
        Tensor eta = data_.sample_noise(rng_, b);
        cl = critic_step(yd, eta);
      }
    }

    Tensor clean, yd, eta;
    if (config_.mode == TrainMode::supervised_l2) {
      // paired data: compose the measurement from the clean draw
      clean = data_.sample_clean(rng_, b);
      eta = data_.sample_noise(rng_, b);
      yd = make_noisy(clean, eta, config_.residual_mode);
    } else {
      yd = data_.sample_noisy(rng_, b);
      eta = data_.sample_noise(rng_, b);
    }
    double lg = generator_step(yd, eta, clean);
    ++step_;

    if (config_.eval_every > 0 && step_ % config_.eval_every == 0) {
      MetricsRecord r;
      r.step = step_;
      r.loss_c_yd = cl.loss_yd;
      r.loss_c_eta = cl.loss_eta;
      r.loss_g = lg;
      r.gp_yd = cl.gp_yd;
      r.gp_eta = cl.gp_eta;
      r.w1_yd = cl.w1_yd;
      r.w1_eta = cl.w1_eta;
      if (data_.eval_psnr) r.psnr = data_.eval_psnr(nets_.gen, nets_.gen_params);
      log.push_back(r);
      if (sink) sink(r);
    }
    if (checkpoint_hook && config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0)
      checkpoint_hook(step_);
  }
  return log;
}

}  // namespace gtfd
