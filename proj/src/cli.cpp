#include "gtfd/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "gtfd/eval.hpp"
#include "gtfd/oracle.hpp"
#include "gtfd/recon.hpp"

namespace gtfd::cli {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- raw io

void write_raw(const std::string& path, const Tensor& t, json sidecar) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(t.data().data()),
          static_cast<std::streamsize>(t.size() * 8));
  if (!f) throw std::runtime_error("write failed for " + path);
  sidecar["shape"] = t.shape();
  std::ofstream s(path + ".json", std::ios::trunc);
  s << sidecar.dump(2) << "\n";
  if (!s) throw std::runtime_error("write failed for " + path + ".json");
}

Tensor read_raw(const std::string& path) {
  std::ifstream s(path + ".json");
  if (!s) throw std::runtime_error("missing sidecar " + path + ".json");
  json sidecar = json::parse(s);
  Shape shape = sidecar.at("shape").get<Shape>();
  int64_t n = numel(shape);
  std::vector<double> vals(static_cast<size_t>(n));
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(n * 8));
  if (f.gcount() != n * 8)
    throw std::runtime_error(path + ": expected " + std::to_string(n * 8) + " bytes, got " +
                             std::to_string(f.gcount()));
  return Tensor(std::move(shape), std::move(vals));
}

// 8-bit PGM (1 channel) or PPM (3 channels), values clipped to [0,1].
void write_pnm(const std::string& path, const Tensor& img) {
  Shape s = img.shape();
  if (s.size() == 2) s = {1, s[0], s[1]};
  if (s.size() != 3 || (s[0] != 1 && s[0] != 3))
    throw std::runtime_error("pnm: need [H,W], [1,H,W] or [3,H,W], got " + shape_str(img.shape()));
  int64_t c = s[0], h = s[1], w = s[2];
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << (c == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
  auto d = img.data();
  for (int64_t r = 0; r < h; ++r)
    for (int64_t col = 0; col < w; ++col)
      for (int64_t ch = 0; ch < c; ++ch) {
        double v = std::clamp(d[ch * h * w + r * w + col], 0.0, 1.0);
        f.put(static_cast<char>(std::lround(v * 255.0)));
      }
  if (!f) throw std::runtime_error("write failed for " + path);
}

// ------------------------------------------------------------- config

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const std::string& where) {
  for (auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* key : keys) ok = ok || k == key;
    if (!ok) throw std::runtime_error("config: unknown key \"" + where + "." + k + "\"");
  }
}

NoiseModel noise_from_json(const json& j) {
  reject_unknown(j, {"variant", "sigma", "sigma_max", "n_points", "pos_std", "amp_std"},
                 "data.noise");
  NoiseModel m;
  std::string v = j.value("variant", "gaussian");
  if (v == "gaussian") m.variant = NoiseModel::Variant::gaussian;
  else if (v == "localized") m.variant = NoiseModel::Variant::localized;
  else if (v == "mixed") m.variant = NoiseModel::Variant::mixed;
  else throw std::runtime_error("config: unknown noise variant \"" + v + "\"");
  m.sigma = j.value("sigma", m.sigma);
  m.sigma_max = j.value("sigma_max", m.sigma_max);
  m.n_points = j.value("n_points", m.n_points);
  m.pos_std = j.value("pos_std", m.pos_std);
  m.amp_std = j.value("amp_std", m.amp_std);
  return m;
}

struct DataSpec {
  std::string kind;
  int64_t len = 128;
  double nu_max = 5.0;
  int64_t size = 16, channels = 1, n_rects = 3;
  std::string path;
  int64_t crop = 0, max_images = -1;
  double peak = 1.0;
  NoiseModel noise;
  int64_t eval_n = 0;
  Shape sample_shape;  // per-sample, without batch axis
};

DataSpec data_from_json(const json& j) {
  reject_unknown(j,
                 {"kind", "len", "nu_max", "size", "channels", "n_rects", "path", "crop",
                  "max_images", "peak", "noise", "eval_n"},
                 "data");
  DataSpec d;
  d.kind = j.at("kind").get<std::string>();
  d.len = j.value("len", d.len);
  d.nu_max = j.value("nu_max", d.nu_max);
  d.size = j.value("size", d.size);
  d.channels = j.value("channels", d.channels);
  d.n_rects = j.value("n_rects", d.n_rects);
  d.path = j.value("path", d.path);
  d.crop = j.value("crop", d.crop);
  d.max_images = j.value("max_images", d.max_images);
  d.peak = j.value("peak", d.peak);
  if (j.contains("noise")) d.noise = noise_from_json(j.at("noise"));
  d.eval_n = j.value("eval_n", d.eval_n);
  if (d.kind == "sine") d.sample_shape = {1, d.len};
  else if (d.kind == "scalar") d.sample_shape = {1};
  else if (d.kind == "rects") d.sample_shape = {d.channels, d.size, d.size};
  else if (d.kind == "stl10") {
    int64_t e = d.crop > 0 ? d.crop : 96;
    d.sample_shape = {3, e, e};
  } else
    throw std::runtime_error("config: unknown data kind \"" + d.kind + "\"");
  return d;
}

std::function<Tensor(Rng&, int64_t)> clean_source(const DataSpec& d) {
  if (d.kind == "sine")
    return [d](Rng& rng, int64_t k) { return sample_sine_batch(rng, k, d.len, d.nu_max); };
  if (d.kind == "scalar")
    return [](Rng& rng, int64_t k) {
      std::vector<double> v(static_cast<size_t>(k));
      for (double& x : v) x = rng.normal();
      return Tensor({k, 1}, std::move(v));
    };
  if (d.kind == "rects")
    return [d](Rng& rng, int64_t k) {
      return sample_rect_images(rng, k, d.size, d.channels, d.n_rects);
    };
  // stl10: load once, then draw uniformly from the pool
  auto pool = std::make_shared<std::vector<Tensor>>(load_stl10(d.path, d.max_images, d.crop));
  if (pool->empty()) throw std::runtime_error("stl10: no images loaded from " + d.path);
  Shape per = d.sample_shape;
  return [pool, per](Rng& rng, int64_t k) {
    Shape s{k};
    s.insert(s.end(), per.begin(), per.end());
    Tensor out = Tensor::zeros(s);
    int64_t stride = numel(per);
    for (int64_t i = 0; i < k; ++i) {
      const Tensor& img = (*pool)[static_cast<size_t>(rng.uniform_int(
          static_cast<int64_t>(pool->size())))];
      std::copy(img.data().begin(), img.data().end(), out.data().begin() + i * stride);
    }
    return out;
  };
}

NetworkSpec gen_from_json(const json& j, const DataSpec& d) {
  reject_unknown(j, {"type", "widths", "bottleneck"}, "gen");
  std::string type = j.at("type").get<std::string>();
  if (type == "scalar_linear") return build_scalar_linear(d.sample_shape);
  std::vector<int64_t> widths = j.value("widths", std::vector<int64_t>{16, 32, 64});
  if (type == "generator_1d") {
    if (d.sample_shape.size() != 2)
      throw std::runtime_error("config: generator_1d needs 1d data");
    return build_generator_1d(d.sample_shape[1], widths, j.value("bottleneck", int64_t{64}));
  }
  if (type == "unet") {
    if (d.sample_shape.size() != 3) throw std::runtime_error("config: unet needs image data");
    return build_generator_unet(d.sample_shape[0], {d.sample_shape[1], d.sample_shape[2]}, widths);
  }
  throw std::runtime_error("config: unknown gen type \"" + type + "\"");
}

NetworkSpec critic_from_json(const json& j, const DataSpec& d) {
  reject_unknown(j, {"type", "base_width", "n_blocks", "hidden"}, "critic");
  std::string type = j.value("type", "conv");
  if (type == "mlp") {
    if (d.sample_shape.size() != 1)
      throw std::runtime_error("config: mlp critic needs flat samples");
    return build_dense_mlp(d.sample_shape[0],
                           j.value("hidden", std::vector<int64_t>{32, 32}));
  }
  if (type != "conv") throw std::runtime_error("config: unknown critic type \"" + type + "\"");
  int64_t bw = j.value("base_width", int64_t{16});
  int64_t nb = j.value("n_blocks", int64_t{5});
  if (d.sample_shape.size() == 2)
    return build_critic(1, d.sample_shape[0], {d.sample_shape[1]}, bw, nb);
  if (d.sample_shape.size() == 3)
    return build_critic(2, d.sample_shape[0], {d.sample_shape[1], d.sample_shape[2]}, bw, nb);
  throw std::runtime_error("config: conv critic needs 1d or 2d data");
}

uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<uint64_t>(rd()) << 32) | rd();
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

Experiment build_experiment(const json& doc) {
  reject_unknown(doc, {"train", "data", "gen", "critic"}, "");
  Experiment ex;
  ex.doc = doc;
  ex.train = config_from_json(doc.value("train", json::object()));
  DataSpec d = data_from_json(doc.at("data"));
  ex.peak = d.peak;
  ex.eval_n = d.eval_n;

  ex.nets.gen = gen_from_json(doc.at("gen"), d);
  ex.nets.gen_params = init_params(ex.nets.gen, ex.train.seed ^ 0x67656e0000000001ULL);
  bool wgan = ex.train.mode == TrainMode::plain_wgan;
  bool need_yd = wgan || ex.train.use_obs1;
  bool need_eta = !wgan && ex.train.mode == TrainMode::dual_critic && ex.train.use_obs2;
  json cj = doc.value("critic", json::object());
  if (ex.train.mode != TrainMode::supervised_l2) {
    if (need_yd) {
      ex.nets.critic_yd = critic_from_json(cj, d);
      ex.nets.critic_yd_params = init_params(ex.nets.critic_yd, ex.train.seed ^ 0x6379640000000002ULL);
    }
    if (need_eta) {
      ex.nets.critic_eta = critic_from_json(cj, d);
      ex.nets.critic_eta_params =
          init_params(ex.nets.critic_eta, ex.train.seed ^ 0x6365746100000003ULL);
    }
  }

  auto clean = clean_source(d);
  NoiseModel noise = d.noise;
  ResidualMode rmode = ex.train.residual_mode;
  ex.data.sample_clean = clean;
  ex.data.sample_noise = [noise, d](Rng& rng, int64_t k) {
    Shape s{k};
    s.insert(s.end(), d.sample_shape.begin(), d.sample_shape.end());
    return sample_noise(noise, s, rng);
  };
  if (wgan) {
    ex.data.sample_noisy = clean;  // real data; sample_noise provides latents
  } else {
    auto sn = ex.data.sample_noise;
    ex.data.sample_noisy = [clean, sn, rmode](Rng& rng, int64_t k) {
      Tensor y = clean(rng, k);
      return make_noisy(y, sn(rng, k), rmode);
    };
  }
  if (d.eval_n > 0 && !wgan) {
    uint64_t seed = ex.train.seed;
    double peak = d.peak;
    int64_t n = d.eval_n;
    ex.data.eval_psnr = [clean, noise, rmode, seed, peak, n](const NetworkSpec& g,
                                                            const ParamStore& p) {
      Rng er = Rng(seed).substream(0x6576616cULL);  // same eval set every call
      return evaluate(g, p, clean, noise, n, rmode, peak, er).mean_denoised;
    };
  }
  return ex;
}

namespace {

// ------------------------------------------------------------ commands

struct TrainArgs {
  std::string config_path, metrics_path, checkpoint_path, resume_path;
  int64_t seed = -1;
  int64_t total_batches = -1;
};

int cmd_train(const TrainArgs& a) {
  json doc = json::parse(read_file(a.config_path));
  if (a.seed >= 0) doc["train"]["seed"] = static_cast<uint64_t>(a.seed);
  if (!doc.contains("train") || !doc["train"].contains("seed")) {
    uint64_t s = entropy_seed();
    doc["train"]["seed"] = s;
    std::cout << "seed: " << s << "\n";
  }
  if (a.total_batches > 0) doc["train"]["total_batches"] = a.total_batches;
  Experiment ex = build_experiment(doc);
  Trainer trainer(std::move(ex.nets), ex.train, ex.data);
  bool resumed = false;
  if (!a.resume_path.empty()) {
    restore(trainer, load_checkpoint(a.resume_path));
    resumed = true;
  }

  std::ofstream metrics;
  if (!a.metrics_path.empty()) {
    metrics.open(a.metrics_path, resumed ? std::ios::app : std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot open " + a.metrics_path + " for writing");
    if (!resumed) metrics << metrics_csv_header() << "\n";
  }
  auto sink = [&](const MetricsRecord& r) {
    std::string row = metrics_csv_row(r);
    if (metrics) metrics << row << "\n" << std::flush;
    std::cout << row << "\n";
  };
  auto hook = [&](int64_t) {
    if (!a.checkpoint_path.empty()) save_checkpoint(a.checkpoint_path, snapshot(trainer, doc));
  };
  trainer.train(sink, hook);
  if (!a.checkpoint_path.empty()) save_checkpoint(a.checkpoint_path, snapshot(trainer, doc));
  std::cout << "trained " << trainer.step() << " steps\n";
  return 0;
}

int cmd_denoise(const std::string& ckpt, const std::string& input, const std::string& output) {
  Checkpoint ck = load_checkpoint(ckpt);
  Experiment ex = build_experiment(ck.config);
  Trainer trainer(std::move(ex.nets), ex.train, ex.data);
  restore(trainer, ck);
  Tensor x = read_raw(input);
  Tensor y = forward_detached(trainer.nets().gen, trainer.nets().gen_params, x);
  write_raw(output, y, {{"source", input}, {"checkpoint", ckpt}});
  std::cout << "denoised " << shape_str(x.shape()) << " -> " << output << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, int64_t n, int64_t seed, const std::string& out_path,
             const std::string& dump_prefix) {
  Checkpoint ck = load_checkpoint(ckpt);
  Experiment ex = build_experiment(ck.config);
  Trainer trainer(std::move(ex.nets), ex.train, ex.data);
  restore(trainer, ck);
  if (seed < 0) {
    seed = static_cast<int64_t>(entropy_seed() & 0x7fffffffffffffffULL);
    std::cout << "seed: " << seed << "\n";
  }
  DataSpec d = data_from_json(ck.config.at("data"));
  Rng rng(static_cast<uint64_t>(seed));
  EvalReport rep = evaluate(trainer.nets().gen, trainer.nets().gen_params, clean_source(d),
                            d.noise, n, ex.train.residual_mode, d.peak, rng);
  json out = {{"count", rep.count},
              {"peak", rep.peak},
              {"mean_psnr_denoised", rep.mean_denoised},
              {"std_psnr_denoised", rep.std_denoised},
              {"mean_psnr_noisy", rep.mean_noisy},
              {"psnr_denoised", rep.psnr_denoised},
              {"psnr_noisy", rep.psnr_noisy}};
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::trunc);
    f << out.dump(2) << "\n";
    if (!f) throw std::runtime_error("write failed for " + out_path);
  }
  std::cout << "psnr_denoised " << rep.mean_denoised << " (noisy " << rep.mean_noisy << ", n "
            << rep.count << ")\n";
  if (!dump_prefix.empty()) {
    Rng dr(static_cast<uint64_t>(seed));
    auto clean = clean_source(d);
    Tensor y = clean(dr, std::min<int64_t>(n, 8));
    Tensor eta = ex.data.sample_noise(dr, y.shape()[0]);
    Tensor yd = make_noisy(y, eta, ex.train.residual_mode);
    Tensor den = forward_detached(trainer.nets().gen, trainer.nets().gen_params, yd);
    write_raw(dump_prefix + "_clean.f64", y, {});
    write_raw(dump_prefix + "_noisy.f64", yd, {});
    write_raw(dump_prefix + "_denoised.f64", den, {});
  }
  return 0;
}

int cmd_oracle(double sigma_lo, double sigma_hi, int64_t steps) {
  std::printf("sigma,g1,g2,map,argmin_obs1,argmin_obs2\n");
  for (int64_t i = 0; i < steps; ++i) {
    double s = steps == 1 ? sigma_lo
                          : sigma_lo + (sigma_hi - sigma_lo) * static_cast<double>(i) /
                                           static_cast<double>(steps - 1);
    oracle::LinearFactors f = oracle::linear_factors(s);
    double a1 = oracle::linear_argmin(oracle::LinearObjective::obs1, s);
    double a2 = oracle::linear_argmin(oracle::LinearObjective::obs2, s);
    std::printf("%.5f,%.5f,%.5f,%.5f,%.5f,%.5f\n", s, f.g1, f.g2, f.map, a1, a2);
  }
  return 0;
}

struct DatagenArgs {
  std::string kind = "sine";
  int64_t n = 16, len = 128, size = 16, channels = 1;
  double nu_max = 5.0;
  std::string noise_variant = "gaussian";
  double sigma = 1.0;
  std::string out;
  int64_t seed = -1;
};

int cmd_datagen(DatagenArgs a) {
  if (a.seed < 0) {
    a.seed = static_cast<int64_t>(entropy_seed() & 0x7fffffffffffffffULL);
    std::cout << "seed: " << a.seed << "\n";
  }
  json dj = {{"kind", a.kind},
             {"len", a.len},
             {"nu_max", a.nu_max},
             {"size", a.size},
             {"channels", a.channels},
             {"noise", {{"variant", a.noise_variant}, {"sigma", a.sigma}}}};
  DataSpec d = data_from_json(dj);
  Rng rng(static_cast<uint64_t>(a.seed));
  Tensor y = clean_source(d)(rng, a.n);
  Tensor eta = sample_noise(d.noise, y.shape(), rng);
  Tensor yd = make_noisy(y, eta, ResidualMode::additive);
  json model = {{"seed", a.seed}, {"model", dj}};
  write_raw(a.out + "_clean.f64", y, model);
  write_raw(a.out + "_noisy.f64", yd, model);
  std::cout << "wrote " << a.out << "_clean.f64 and " << a.out << "_noisy.f64, shape "
            << shape_str(y.shape()) << "\n";
  return 0;
}

struct ReconArgs {
  std::string input, output, reference;
  double lambda = 1e-3, tol = 1e-8, peak = 1.0, ls_factor = 2.0;
  int64_t iters = 2000, ls_steps = 5;
  bool line_search = false, no_blur = false;
};

int cmd_recon(const ReconArgs& a) {
  Tensor b = read_raw(a.input);
  recon::TvOptions opt;
  opt.lambda = a.lambda;
  opt.iters = a.iters;
  opt.tol = a.tol;
  opt.use_blur = !a.no_blur;
  double lam = a.lambda;
  if (a.line_search) {
    if (a.reference.empty())
      throw std::runtime_error("recon: --line-search needs --reference");
    Tensor ref = read_raw(a.reference);
    auto pipeline = [&](double l) {
      recon::TvOptions o = opt;
      o.lambda = l;
      return recon::tv_reconstruct(b, o);
    };
    recon::LineSearchResult r =
        recon::lambda_line_search(pipeline, a.lambda, a.ls_factor, a.ls_steps, ref, a.peak);
    lam = r.lambda;
    std::cout << "lambda* " << r.lambda << " psnr " << r.psnr << "\n";
  }
  opt.lambda = lam;
  Tensor x = recon::tv_reconstruct(b, opt);
  write_raw(a.output + ".f64", x, {{"lambda", lam}, {"input", a.input}});
  Shape s = x.shape();
  if (s.size() == 2 || (s.size() == 3 && (s[0] == 1 || s[0] == 3)))
    write_pnm(a.output + (s.size() == 3 && s[0] == 3 ? ".ppm" : ".pgm"), x);
  std::cout << "reconstructed " << shape_str(x.shape()) << " at lambda " << lam << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  if (const char* tn = std::getenv("GTFD_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(tn, &end, 10);
    if (!end || *end != '\0' || v < 1) {
      std::cerr << "GTFD_THREADS must be a positive integer\n";
      return 1;
    }
    // single producer in this build; the bound is honored trivially
  }

  CLI::App app{"ground-truth-free denoiser training and evaluation"};
  app.require_subcommand(1);

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "train a denoiser from a config file");
  train->add_option("--config", ta.config_path, "JSON config")->required();
  train->add_option("--seed", ta.seed, "seed override");
  train->add_option("--metrics", ta.metrics_path, "metrics CSV output");
  train->add_option("--checkpoint", ta.checkpoint_path, "checkpoint output path");
  train->add_option("--resume", ta.resume_path, "checkpoint to resume from");
  train->add_option("--total-batches", ta.total_batches, "override total batches");

  std::string dn_ckpt, dn_in, dn_out;
  CLI::App* denoise = app.add_subcommand("denoise", "apply a trained denoiser to a raw batch");
  denoise->add_option("--checkpoint", dn_ckpt)->required();
  denoise->add_option("--input", dn_in, "raw f64 input with .json sidecar")->required();
  denoise->add_option("--output", dn_out)->required();

  std::string ev_ckpt, ev_out, ev_dump;
  int64_t ev_n = 128, ev_seed = -1;
  CLI::App* eval_cmd = app.add_subcommand("eval", "PSNR report for a checkpoint");
  eval_cmd->add_option("--checkpoint", ev_ckpt)->required();
  eval_cmd->add_option("--n", ev_n, "evaluation samples");
  eval_cmd->add_option("--seed", ev_seed);
  eval_cmd->add_option("--out", ev_out, "report JSON path");
  eval_cmd->add_option("--dump", ev_dump, "prefix for clean/noisy/denoised raw dumps");

  double or_sigma = 1.0, or_hi = -1.0;
  int64_t or_steps = 1;
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "closed-form linear-case table");
  oracle_cmd->add_option("--sigma", or_sigma, "noise level (or grid start)");
  oracle_cmd->add_option("--sigma-max", or_hi, "grid end");
  oracle_cmd->add_option("--steps", or_steps, "grid size");

  DatagenArgs da;
  CLI::App* datagen = app.add_subcommand("datagen", "dump sample batches as raw f64");
  datagen->add_option("--kind", da.kind, "sine | scalar | rects");
  datagen->add_option("--n", da.n);
  datagen->add_option("--len", da.len);
  datagen->add_option("--size", da.size);
  datagen->add_option("--channels", da.channels);
  datagen->add_option("--nu-max", da.nu_max);
  datagen->add_option("--noise", da.noise_variant, "gaussian | localized | mixed");
  datagen->add_option("--sigma", da.sigma);
  datagen->add_option("--out", da.out, "output prefix")->required();
  datagen->add_option("--seed", da.seed);

  ReconArgs ra;
  CLI::App* recon_cmd = app.add_subcommand("recon", "TV deblurring of a raw image");
  recon_cmd->add_option("--input", ra.input)->required();
  recon_cmd->add_option("--output", ra.output, "output prefix")->required();
  recon_cmd->add_option("--lambda", ra.lambda);
  recon_cmd->add_option("--iters", ra.iters);
  recon_cmd->add_option("--tol", ra.tol);
  recon_cmd->add_option("--peak", ra.peak);
  recon_cmd->add_flag("--line-search", ra.line_search);
  recon_cmd->add_option("--reference", ra.reference, "clean image for line search");
  recon_cmd->add_option("--ls-factor", ra.ls_factor);
  recon_cmd->add_option("--ls-steps", ra.ls_steps);
  recon_cmd->add_flag("--no-blur", ra.no_blur, "A = identity (pure denoising)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*denoise) return cmd_denoise(dn_ckpt, dn_in, dn_out);
    if (*eval_cmd) return cmd_eval(ev_ckpt, ev_n, ev_seed, ev_out, ev_dump);
    if (*oracle_cmd)
      return cmd_oracle(or_sigma, or_hi > 0 ? or_hi : or_sigma, or_hi > 0 ? or_steps : 1);
    if (*datagen) return cmd_datagen(da);
    if (*recon_cmd) return cmd_recon(ra);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace gtfd::cli
