#include "gtfd/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace gtfd {

namespace {

using nlohmann::json;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n, const char* what) {
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint: truncated reading " + std::string(what) +
                               " at offset " + std::to_string(pos));
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  float f32(const char* what) {
    uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64(const char* what) {
    uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

const char* mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::dual_critic: return "dual_critic";
    case TrainMode::plain_wgan: return "plain_wgan";
    case TrainMode::supervised_l2: return "supervised_l2";
  }
  return "?";
}

TrainMode mode_from(const std::string& s) {
  if (s == "dual_critic") return TrainMode::dual_critic;
  if (s == "plain_wgan") return TrainMode::plain_wgan;
  if (s == "supervised_l2") return TrainMode::supervised_l2;
  throw std::runtime_error("config: unknown mode \"" + s + "\"");
}

json adam_to_json(const AdamHyper& h) {
  return {{"alpha", h.alpha}, {"beta1", h.beta1}, {"beta2", h.beta2}, {"eps", h.eps}};
}

AdamHyper adam_from_json(const json& j, const std::string& where) {
  AdamHyper h;
  for (auto& [k, v] : j.items()) {
    if (k == "alpha") h.alpha = v.get<double>();
    else if (k == "beta1") h.beta1 = v.get<double>();
    else if (k == "beta2") h.beta2 = v.get<double>();
    else if (k == "eps") h.eps = v.get<double>();
    else throw std::runtime_error("config: unknown key \"" + where + "." + k + "\"");
  }
  return h;
}

void gather(const std::string& prefix, const ParamStore& store, AdamState& adam,
            const std::string& adam_key, Checkpoint& ck) {
  for (auto& [name, t] : store.entries) ck.records[prefix + "/" + name] = t;
  for (auto& [name, mv] : adam.moments) {
    ck.records["adam/" + adam_key + "/m/" + name] = mv.first;
    ck.records["adam/" + adam_key + "/v/" + name] = mv.second;
  }
  ck.adam_steps[adam_key] = adam.step;
}

const Tensor& pick(const Checkpoint& ck, const std::string& key) {
  auto it = ck.records.find(key);
  if (it == ck.records.end()) throw std::runtime_error("checkpoint: missing record \"" + key + "\"");
  return it->second;
}

void scatter(const std::string& prefix, ParamStore& store, AdamState& adam,
             const std::string& adam_key, const Checkpoint& ck) {
  for (auto& [name, t] : store.entries) {
    const Tensor& src = pick(ck, prefix + "/" + name);
    if (src.shape() != t.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + prefix + "/" + name);
    std::copy(src.data().begin(), src.data().end(), t.data().begin());
  }
  adam.moments.clear();
  for (auto& [key, t] : ck.records) {
    std::string mpfx = "adam/" + adam_key + "/m/";
    if (key.rfind(mpfx, 0) == 0) {
      std::string name = key.substr(mpfx.size());
      adam.moments[name] = {t.clone(), pick(ck, "adam/" + adam_key + "/v/" + name).clone()};
    }
  }
  auto it = ck.adam_steps.find(adam_key);
  if (it == ck.adam_steps.end())
    throw std::runtime_error("checkpoint: missing adam step counter \"" + adam_key + "\"");
  adam.step = it->second;
}

}  // namespace

json config_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lambda", c.lambda},
          {"adam_g", adam_to_json(c.adam_g)},
          {"adam_c", adam_to_json(c.adam_c)},
          {"total_batches", c.total_batches},
          {"n_critic", c.n_critic},
          {"mode", mode_name(c.mode)},
          {"residual_mode", c.residual_mode == ResidualMode::additive ? "additive" : "multiplicative"},
          {"seed", c.seed},
          {"eval_every", c.eval_every},
          {"checkpoint_every", c.checkpoint_every},
          {"clamp_min", c.clamp_min},
          {"use_obs1", c.use_obs1},
          {"use_obs2", c.use_obs2}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  for (auto& [k, v] : j.items()) {
    if (k == "batch_size") c.batch_size = v.get<int64_t>();
    else if (k == "lambda") c.lambda = v.get<double>();
    else if (k == "adam_g") c.adam_g = adam_from_json(v, "adam_g");
    else if (k == "adam_c") c.adam_c = adam_from_json(v, "adam_c");
    else if (k == "total_batches") c.total_batches = v.get<int64_t>();
    else if (k == "n_critic") c.n_critic = v.get<int64_t>();
    else if (k == "mode") c.mode = mode_from(v.get<std::string>());
    else if (k == "residual_mode") {
      std::string s = v.get<std::string>();
      if (s == "additive") c.residual_mode = ResidualMode::additive;
      else if (s == "multiplicative") c.residual_mode = ResidualMode::multiplicative;
      else throw std::runtime_error("config: unknown residual_mode \"" + s + "\"");
    } else if (k == "seed") c.seed = v.get<uint64_t>();
    else if (k == "eval_every") c.eval_every = v.get<int64_t>();
    else if (k == "checkpoint_every") c.checkpoint_every = v.get<int64_t>();
    else if (k == "clamp_min") c.clamp_min = v.get<double>();
    else if (k == "use_obs1") c.use_obs1 = v.get<bool>();
    else if (k == "use_obs2") c.use_obs2 = v.get<bool>();
    else throw std::runtime_error("config: unknown key \"" + k + "\"");
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string out;
  out += "GTFD";
  put_u32(out, 1);
  put_u32(out, static_cast<uint32_t>(ck.records.size()));
  for (auto& [name, t] : ck.records) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<uint32_t>(t.shape().size()));
    for (int64_t d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
    for (double v : t.data()) put_f32(out, static_cast<float>(v));
  }
  json blob = {{"config", ck.config},
               {"step", ck.step},
               {"rng_state", ck.rng_state},
               {"adam_steps", ck.adam_steps}};
  std::string js = blob.dump();
  put_u64(out, js.size());
  out += js;
  // 64-bit masters in table order, for exact resume
  for (auto& [name, t] : ck.records)
    for (double v : t.data()) put_f64(out, v);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};
  if (r.bytes(4, "magic") != "GTFD") throw std::runtime_error("checkpoint: bad magic in " + path);
  uint32_t version = r.u32("version");
  if (version != 1)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  uint32_t count = r.u32("record count");
  std::vector<std::string> order;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32("name length"), "name");
    uint32_t ndim = r.u32("ndim");
    Shape shape;
    int64_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<int64_t>(r.u32("dim")));
      n *= shape.back();
    }
    std::vector<double> vals(static_cast<size_t>(n));
    for (int64_t k = 0; k < n; ++k) vals[static_cast<size_t>(k)] = r.f32("record data");
    ck.records.emplace(name, Tensor(std::move(shape), std::move(vals)));
    order.push_back(std::move(name));
  }
  std::string js = r.bytes(r.u64("json length"), "json blob");
  json blob = json::parse(js);
  ck.config = blob.at("config");
  ck.step = blob.at("step").get<int64_t>();
  ck.rng_state = blob.at("rng_state").get<uint64_t>();
  if (blob.contains("adam_steps"))
    ck.adam_steps = blob.at("adam_steps").get<std::map<std::string, int64_t>>();
  // overwrite with the 64-bit masters
  for (const std::string& name : order) {
    Tensor& t = ck.records.at(name);
    for (double& v : t.data()) v = r.f64("master data");
  }
  return ck;
}

Checkpoint snapshot(Trainer& trainer, json config) {
  Checkpoint ck;
  ck.config = std::move(config);
  ck.step = trainer.step();
  ck.rng_state = trainer.rng().state();
  GanNets& nets = trainer.nets();
  gather("gen", nets.gen_params, trainer.adam_g(), "g", ck);
  gather("critic_yd", nets.critic_yd_params, trainer.adam_c_yd(), "c_yd", ck);
  gather("critic_eta", nets.critic_eta_params, trainer.adam_c_eta(), "c_eta", ck);
  return ck;
}

void restore(Trainer& trainer, const Checkpoint& ck) {
  GanNets& nets = trainer.nets();
  scatter("gen", nets.gen_params, trainer.adam_g(), "g", ck);
  scatter("critic_yd", nets.critic_yd_params, trainer.adam_c_yd(), "c_yd", ck);
  scatter("critic_eta", nets.critic_eta_params, trainer.adam_c_eta(), "c_eta", ck);
  trainer.set_step(ck.step);
  trainer.rng().set_state(ck.rng_state);
}

}  // namespace gtfd
