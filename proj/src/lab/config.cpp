#include "dppo/lab/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

namespace dppo::lab {

using nlohmann::json;

PolicyKind policy_kind_from_string(std::string_view s) {
  if (s == "diffusion") return PolicyKind::kDiffusion;
  if (s == "gaussian") return PolicyKind::kGaussian;
  throw std::invalid_argument("unknown policy kind '" + std::string(s) + "'");
}

std::string_view to_string(PolicyKind k) { return k == PolicyKind::kDiffusion ? "diffusion" : "gaussian"; }

Method method_from_string(std::string_view s) {
  if (s == "dppo") return Method::kDppo;
  if (s == "gaussian") return Method::kGaussianPpo;
  if (s == "drwr") return Method::kDrwr;
  if (s == "dawr") return Method::kDawr;
  throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kDppo: return "dppo";
    case Method::kGaussianPpo: return "gaussian";
    case Method::kDrwr: return "drwr";
    case Method::kDawr: return "dawr";
  }
  return "?";
}

envlab::AvoidConfig EnvSection::avoid() const {
  envlab::AvoidConfig a;
  a.horizon = horizon;
  a.max_step = max_step;
  a.goal_line_x = goal_line_x;
  a.top_mode_y = top_mode_y;
  return a;
}

int PretrainSection::resolved_epochs() const {
  if (epochs) return *epochs;
  return policy == PolicyKind::kDiffusion ? 10000 : 5000;
}

envlab::RunnerConfig RunConfig::runner() const {
  envlab::RunnerConfig rc;
  rc.n_envs = env.n_envs;
  rc.T_p = policy.T_p;
  rc.T_a = policy.T_a;
  rc.env = env.avoid();
  rc.seed = seed;
  rc.noise = noise;
  return rc;
}

namespace {

// Enum fields travel as strings.
template <typename E>
struct EnumCodec;
template <>
struct EnumCodec<envlab::ModeSet> {
  static envlab::ModeSet read(const std::string& s) { return envlab::mode_set_from_string(s); }
  static std::string write(envlab::ModeSet v) { return std::string(envlab::to_string(v)); }
};
template <>
struct EnumCodec<diffusion::SamplerKind> {
  static diffusion::SamplerKind read(const std::string& s) { return diffusion::sampler_from_string(s); }
  static std::string write(diffusion::SamplerKind v) { return std::string(diffusion::to_string(v)); }
};
template <>
struct EnumCodec<nd::Activation> {
  static nd::Activation read(const std::string& s) { return nd::activation_from_string(s); }
  static std::string write(nd::Activation v) { return std::string(nd::to_string(v)); }
};
template <>
struct EnumCodec<PolicyKind> {
  static PolicyKind read(const std::string& s) { return policy_kind_from_string(s); }
  static std::string write(PolicyKind v) { return std::string(to_string(v)); }
};
template <>
struct EnumCodec<Method> {
  static Method read(const std::string& s) { return method_from_string(s); }
  static std::string write(Method v) { return std::string(to_string(v)); }
};

template <typename T>
void read_value(const json& j, T& v) {
  if constexpr (std::is_enum_v<T>) {
    v = EnumCodec<T>::read(j.get<std::string>());
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) throw ConfigError("expected a boolean");
    v = j.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) throw ConfigError("expected an integer");
    if (std::is_unsigned_v<T> && j.get<std::int64_t>() < 0 && !j.is_number_unsigned()) {
      throw ConfigError("expected a non-negative integer");
    }
    v = j.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) throw ConfigError("expected a number");
    v = j.get<T>();
  } else {
    v = j.get<T>();
  }
}

template <typename T>
void read_value(const json& j, std::optional<T>& v) {
  if (j.is_null()) {
    v.reset();
    return;
  }
  T x{};
  read_value(j, x);
  v = x;
}

template <typename T>
json write_value(const T& v) {
  if constexpr (std::is_enum_v<T>) {
    return EnumCodec<T>::write(v);
  } else {
    return v;
  }
}

template <typename T>
json write_value(const std::optional<T>& v) {
  return v ? write_value(*v) : json(nullptr);
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + trimmed() + "' must be an object");
  }

  template <typename T>
  void field(const char* key, T& v) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      read_value(*it, v);
    } catch (const std::exception& e) {
      throw ConfigError("config: bad value for '" + path_ + key + "': " + e.what());
    }
  }

  template <typename F>
  void section(const char* key, F&& visit) {
    seen_.insert(key);
    static const json empty = json::object();
    const auto it = j_.find(key);
    Reader sub(it == j_.end() ? empty : *it, path_ + key + ".");
    visit(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("config: unknown key '" + path_ + k + "'");
    }
  }

 private:
  std::string trimmed() const { return path_.empty() ? "<root>" : path_.substr(0, path_.size() - 1); }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(json& j) : j_(j) { j_ = json::object(); }

  template <typename T>
  void field(const char* key, const T& v) {
    j_[key] = write_value(v);
  }

  template <typename F>
  void section(const char* key, F&& visit) {
    Writer sub(j_[key]);
    visit(sub);
  }

 private:
  json& j_;
};

// One visitor per struct drives both reading and writing, so the echo and
// the parser cannot drift apart.
template <typename IO, typename C>
void visit_net(IO& io, C& n) {
  io.field("time_dim", n.time_dim);
  io.field("state_hidden", n.state_hidden);
  io.field("state_features", n.state_features);
  io.field("head_hidden", n.head_hidden);
  io.field("activation", n.activation);
  io.field("residual", n.residual);
}

template <typename IO, typename C>
void visit_policy(IO& io, C& p) {
  io.field("K", p.K);
  io.field("K_prime", p.K_prime);
  io.field("T_p", p.T_p);
  io.field("T_a", p.T_a);
  io.field("act_dim", p.act_dim);
  io.field("sampler", p.sampler);
  io.field("ddim_steps", p.ddim_steps);
  io.field("eta_train", p.eta_train);
  io.field("eta_eval", p.eta_eval);
  io.field("sigma_exp_min", p.sigma_exp_min);
  io.field("sigma_prob_min", p.sigma_prob_min);
  io.field("sigma_eval_floor", p.sigma_eval_floor);
  io.field("schedule_s", p.schedule_s);
  io.section("net", [&](IO& s) { visit_net(s, p.net); });
}

template <typename IO, typename C>
void visit_gaussian(IO& io, C& g) {
  io.field("T_p", g.T_p);
  io.field("T_a", g.T_a);
  io.field("act_dim", g.act_dim);
  io.field("hidden", g.hidden);
  io.field("activation", g.activation);
  io.field("sigma_init", g.sigma_init);
  io.field("sigma_min", g.sigma_min);
  io.field("sigma_max", g.sigma_max);
  io.field("sample_clip", g.sample_clip);
}

template <typename IO, typename C>
void visit_dppo(IO& io, C& d) {
  io.field("iterations", d.iterations);
  io.field("steps_per_iter", d.steps_per_iter);
  io.field("gamma_env", d.gamma_env);
  io.field("gamma_denoise", d.gamma_denoise);
  io.field("gae_lambda", d.gae_lambda);
  io.field("clip_eps", d.clip_eps);
  io.field("clip_decay", d.clip_decay);
  io.field("actor_lr", d.actor_lr);
  io.field("actor_lr_end", d.actor_lr_end);
  io.field("critic_lr", d.critic_lr);
  io.field("weight_decay", d.weight_decay);
  io.field("actor_epochs", d.actor_epochs);
  io.field("critic_epochs", d.critic_epochs);
  io.field("actor_batch", d.actor_batch);
  io.field("critic_batch", d.critic_batch);
  io.field("kl_stop", d.kl_stop);
  io.field("normalize_advantage", d.normalize_advantage);
  io.field("critic_hidden", d.critic_hidden);
  io.field("eval_every", d.eval_every);
  io.field("eval_episodes", d.eval_episodes);
  io.field("target_success", d.target_success);
}

template <typename IO, typename C>
void visit_wr(IO& io, C& w) {
  io.field("iterations", w.iterations);
  io.field("steps_per_iter", w.steps_per_iter);
  io.field("gamma_env", w.gamma_env);
  io.field("beta", w.beta);
  io.field("w_max", w.w_max);
  io.field("actor_replay", w.actor_replay);
  io.field("critic_replay", w.critic_replay);
  io.field("lambda", w.lambda);
  io.field("buffer_capacity", w.buffer_capacity);
  io.field("batch_size", w.batch_size);
  io.field("actor_lr", w.actor_lr);
  io.field("actor_lr_end", w.actor_lr_end);
  io.field("critic_lr", w.critic_lr);
  io.field("weight_decay", w.weight_decay);
  io.field("critic_hidden", w.critic_hidden);
  io.field("eval_every", w.eval_every);
  io.field("eval_episodes", w.eval_episodes);
  io.field("target_success", w.target_success);
}

template <typename IO, typename C>
void visit_run(IO& io, C& c) {
  io.field("seed", c.seed);
  io.field("out", c.out);
  io.section("env", [&](IO& s) {
    s.field("mode_set", c.env.mode_set);
    s.field("n_demos", c.env.n_demos);
    s.field("jitter_std", c.env.jitter_std);
    s.field("horizon", c.env.horizon);
    s.field("max_step", c.env.max_step);
    s.field("goal_line_x", c.env.goal_line_x);
    s.field("top_mode_y", c.env.top_mode_y);
    s.field("n_envs", c.env.n_envs);
  });
  io.section("policy", [&](IO& s) { visit_policy(s, c.policy); });
  io.section("gaussian", [&](IO& s) { visit_gaussian(s, c.gaussian); });
  io.section("pretrain", [&](IO& s) {
    s.field("policy", c.pretrain.policy);
    s.field("dataset", c.pretrain.dataset);
    s.field("epochs", c.pretrain.epochs);
    s.field("batch_size", c.pretrain.train.batch_size);
    s.field("lr", c.pretrain.train.lr);
    s.field("lr_end", c.pretrain.train.lr_end);
    s.field("weight_decay", c.pretrain.train.weight_decay);
    s.field("ema_decay", c.pretrain.train.ema_decay);
    s.field("stride", c.pretrain.train.stride);
    s.field("eval_every", c.pretrain.eval_every);
    s.field("eval_episodes", c.pretrain.eval_episodes);
  });
  io.section("finetune", [&](IO& s) {
    s.field("method", c.finetune.method);
    s.field("checkpoint", c.finetune.checkpoint);
    s.field("k_prime", c.finetune.k_prime);
    s.field("sigma_exp_min", c.finetune.sigma_exp_min);
    s.field("T_a", c.finetune.T_a);
    s.field("checkpoint_every", c.finetune.checkpoint_every);
    visit_dppo(s, c.finetune.dppo);
  });
  io.section("baseline", [&](IO& s) { visit_wr(s, c.baseline); });
  io.section("noise", [&](IO& s) {
    s.field("enabled", c.noise.enabled);
    s.field("start_iter", c.noise.start_iter);
    s.field("full_iter", c.noise.full_iter);
    s.field("lo", c.noise.lo);
    s.field("hi", c.noise.hi);
  });
  io.section("ablation", [&](IO& s) {
    s.field("sweep", c.ablation.sweep);
    s.field("values", c.ablation.values);
  });
  io.section("eval", [&](IO& s) {
    s.field("checkpoint", c.eval.checkpoint);
    s.field("episodes", c.eval.episodes);
    s.field("noise_lo", c.eval.noise_lo);
    s.field("noise_hi", c.eval.noise_hi);
    s.field("trajectories", c.eval.trajectories);
  });
  io.section("plot", [&](IO& s) {
    s.field("inputs", c.plot.inputs);
    s.field("output", c.plot.output);
  });
  io.section("report", [&](IO& s) { s.field("runs", c.report.runs); });
}

void validate(const RunConfig& c) {
  static const std::set<std::string> sweeps{"", "K_prime", "sigma_exp_min", "T_a", "gamma_denoise"};
  if (!sweeps.count(c.ablation.sweep)) throw ConfigError("config: unknown ablation.sweep '" + c.ablation.sweep + "'");
  if (!c.ablation.sweep.empty() && c.ablation.values.empty()) throw ConfigError("config: ablation.values is empty");
  if (c.env.n_demos < 2) throw ConfigError("config: env.n_demos must be at least 2");
  if (c.env.n_envs < 1) throw ConfigError("config: env.n_envs must be positive");
  if (c.finetune.checkpoint_every < 0) throw ConfigError("config: finetune.checkpoint_every must be non-negative");
  if (c.out.empty()) throw ConfigError("config: out must not be empty");
  try {
    c.policy.validate();
    c.gaussian.validate();
    c.finetune.dppo.validate();
    c.baseline.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig c;
  Reader r(j, "");
  visit_run(r, c);
  r.finish();
  validate(c);
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  Writer w(j);
  visit_run(w, c);
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

void apply_env_overrides(RunConfig& c) {
  if (const char* s = std::getenv("DPPO_SEED"); s && *s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (*end != '\0' || s[0] == '-') throw ConfigError("config: DPPO_SEED must be a non-negative integer");
    c.seed = v;
  }
  if (const char* o = std::getenv("DPPO_OUT"); o && *o) c.out = o;
}

json to_json(const diffusion::PolicyConfig& c) {
  json j;
  Writer w(j);
  visit_policy(w, c);
  return j;
}

diffusion::PolicyConfig policy_config_from_json(const json& j) {
  diffusion::PolicyConfig c;
  Reader r(j, "policy.");
  visit_policy(r, c);
  r.finish();
  return c;
}

json to_json(const baselines::GaussianConfig& c) {
  json j;
  Writer w(j);
  visit_gaussian(w, c);
  return j;
}

baselines::GaussianConfig gaussian_config_from_json(const json& j) {
  baselines::GaussianConfig c;
  Reader r(j, "gaussian.");
  visit_gaussian(r, c);
  r.finish();
  return c;
}

std::string config_hash(const json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dppo::lab
