#include "dppo/lab/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"

#include "dppo/baselines/gaussian_ppo.hpp"
#include "dppo/baselines/weighted_regression.hpp"
#include "dppo/envlab/dataset.hpp"
#include "dppo/lab/policy_io.hpp"
#include "dppo/lab/report.hpp"
#include "dppo/lab/svg.hpp"
#include "dppo/rl/samplers.hpp"
#include "dppo/rl/train_log.hpp"

namespace dppo::lab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Echoes the resolved config and returns the output directory.
fs::path begin_command(const RunConfig& cfg, const std::string& command) {
  const fs::path out(cfg.out);
  fs::create_directories(out);
  std::ofstream f(echo_path(out, command), std::ios::binary);
  if (!f) throw std::runtime_error("cannot write config echo in " + out.string());
  f << to_json(cfg).dump(2) << "\n";
  return out;
}

json eval_json(const envlab::EvalSummary& s) {
  return {{"episodes", s.episodes},
          {"success_rate", s.success_rate()},
          {"reach_rate", s.reach_rate()},
          {"mean_length", s.mean_length},
          {"events",
           {{"goal_top", s.goal_top}, {"goal_other", s.goal_other}, {"collision", s.collision},
            {"timeout", s.timeout}}}};
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << "\n";
}

PolicyBundle load_checked(const std::string& stem) {
  if (stem.empty()) throw InputError("no checkpoint configured");
  if (!fs::exists(stem + ".json") || !fs::exists(stem + ".bin")) throw InputError("missing checkpoint '" + stem + "'");
  return load_policy(stem);
}

envlab::RunnerConfig runner_for(const RunConfig& cfg, std::size_t T_p, std::size_t T_a, std::uint64_t stream) {
  envlab::RunnerConfig rc = cfg.runner();
  rc.T_p = T_p;
  rc.T_a = T_a;
  rc.seed = nd::derive_seed(cfg.seed, stream);
  return rc;
}

// Seed streams. Distinct per purpose so no two consumers share randomness.
constexpr std::uint64_t kInitStream = 10, kPretrainStream = 11, kPretrainEvalStream = 12;
constexpr std::uint64_t kFinetuneRunnerStream = 20, kFinetuneStream = 21, kEvalStream = 30;

void apply_sweep(RunConfig& c, const std::string& sweep, double v) {
  if (sweep == "K_prime") {
    c.finetune.k_prime = static_cast<int>(v);
  } else if (sweep == "sigma_exp_min") {
    c.finetune.sigma_exp_min = v;
  } else if (sweep == "T_a") {
    c.finetune.T_a = static_cast<std::size_t>(v);
  } else if (sweep == "gamma_denoise") {
    c.finetune.dppo.gamma_denoise = v;
  }
}

void apply_overrides(const RunConfig& cfg, PolicyBundle& b) {
  if (b.diffusion) {
    diffusion::PolicyConfig pc = b.diffusion->config();
    if (cfg.finetune.k_prime) pc.K_prime = *cfg.finetune.k_prime;
    if (cfg.finetune.sigma_exp_min) pc.sigma_exp_min = *cfg.finetune.sigma_exp_min;
    if (cfg.finetune.T_a) pc.T_a = *cfg.finetune.T_a;
    try {
      pc.validate();
      if (to_json(pc) != to_json(b.diffusion->config())) b.diffusion.emplace(reconfigure(*b.diffusion, pc));
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("incompatible checkpoint/config: ") + e.what());
    }
    return;
  }
  if (cfg.finetune.k_prime || cfg.finetune.sigma_exp_min) {
    throw InputError("incompatible checkpoint/config: K' and sigma_exp_min apply to diffusion policies only");
  }
  if (cfg.finetune.T_a && *cfg.finetune.T_a != b.gaussian->config().T_a) {
    baselines::GaussianConfig gc = b.gaussian->config();
    gc.T_a = *cfg.finetune.T_a;
    try {
      baselines::GaussianPolicy g(gc, 0);
      auto dst = g.named_parameters();
      auto src = b.gaussian->named_parameters();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i].tensor->storage() = src[i].tensor->storage();
      b.gaussian.emplace(std::move(g));
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("incompatible checkpoint/config: ") + e.what());
    }
  }
}

std::unique_ptr<rl::Finetuner> make_trainer(const RunConfig& cfg, const PolicyBundle& b,
                                            const envlab::RunnerConfig& rc) {
  const std::uint64_t seed = nd::derive_seed(cfg.seed, kFinetuneStream);
  const Method m = cfg.finetune.method;
  if ((m == Method::kGaussianPpo) != (b.kind == PolicyKind::kGaussian)) {
    throw InputError("incompatible checkpoint/config: method '" + std::string(to_string(m)) +
                     "' cannot fine-tune a " + std::string(to_string(b.kind)) + " checkpoint");
  }
  switch (m) {
    case Method::kDppo:
      return std::make_unique<rl::DppoTrainer>(*b.diffusion, b.norm, rc, cfg.finetune.dppo, seed);
    case Method::kGaussianPpo:
      return std::make_unique<baselines::GaussianPpoTrainer>(*b.gaussian, b.norm, rc, cfg.finetune.dppo, seed);
    case Method::kDrwr:
      return std::make_unique<baselines::DrwrTrainer>(*b.diffusion, b.norm, rc, cfg.baseline, seed);
    case Method::kDawr:
      return std::make_unique<baselines::DawrTrainer>(*b.diffusion, b.norm, rc, cfg.baseline, seed);
  }
  throw std::logic_error("unreachable");
}

// Copies the trained policy back into the bundle for saving.
void take_policy(rl::Finetuner& t, PolicyBundle& b) {
  if (auto* d = dynamic_cast<rl::DppoTrainer*>(&t)) b.diffusion.emplace(d->policy());
  if (auto* g = dynamic_cast<baselines::GaussianPpoTrainer*>(&t)) b.gaussian.emplace(g->policy());
  if (auto* r = dynamic_cast<baselines::DrwrTrainer*>(&t)) b.diffusion.emplace(r->policy());
  if (auto* a = dynamic_cast<baselines::DawrTrainer*>(&t)) b.diffusion.emplace(a->policy());
}

std::vector<nd::NamedTensor> critic_tensors(rl::Finetuner& t) {
  if (auto* d = dynamic_cast<rl::DppoTrainer*>(&t)) return d->critic().named_parameters();
  if (auto* g = dynamic_cast<baselines::GaussianPpoTrainer*>(&t)) return g->critic().named_parameters();
  if (auto* a = dynamic_cast<baselines::DawrTrainer*>(&t)) return a->critic().named_parameters();
  return {};
}

FinetuneResult finetune_one(const RunConfig& cfg, const std::string& label) {
  const fs::path out = begin_command(cfg, "finetune");
  PolicyBundle b = load_checked(with_seed(cfg.finetune.checkpoint, cfg.seed));
  apply_overrides(cfg, b);
  const envlab::RunnerConfig rc = runner_for(cfg, b.T_p(), b.T_a(), kFinetuneRunnerStream);
  std::unique_ptr<rl::Finetuner> tr = make_trainer(cfg, b, rc);
  const bool wr = cfg.finetune.method == Method::kDrwr || cfg.finetune.method == Method::kDawr;
  const std::size_t n_eval = wr ? cfg.baseline.eval_episodes : cfg.finetune.dppo.eval_episodes;

  FinetuneResult res;
  res.dir = out;
  rl::TrainLog log(out / kTrainCsv);
  rl::IterationStats first;
  res.pretrained_success = tr->evaluate(n_eval).success_rate();
  first.eval_success = res.pretrained_success;
  first.event = "pretrained";
  log.write(first);
  const json echo = to_json(cfg);
  tr->train([&](const rl::IterationStats& s) {
    log.write(s);
    res.stats.push_back(s);
    const int every = cfg.finetune.checkpoint_every;
    if (every > 0 && s.iteration % every == 0) {
      PolicyBundle snap = b;
      take_policy(*tr, snap);
      fs::create_directories(out / "ckpt");
      save_policy(out / "ckpt" / ("iter_" + std::to_string(s.iteration)), snap, echo, cfg.seed, critic_tensors(*tr));
    }
    std::printf("[%s seed %llu] iter %d success %.3f%s\n", label.c_str(), static_cast<unsigned long long>(cfg.seed),
                s.iteration, s.success_rate, s.eval_success ? (" eval " + num(*s.eval_success)).c_str() : "");
    std::fflush(stdout);
    return true;
  });
  res.final_eval = tr->evaluate(n_eval);

  take_policy(*tr, b);
  const auto critic = critic_tensors(*tr);
  save_policy(out / kFinetunedStem, b, echo, cfg.seed, critic);
  write_json(out / kEvalJson, eval_json(res.final_eval));
  write_json(out / kRunJson, {{"label", label},
                              {"method", to_string(cfg.finetune.method)},
                              {"seed", cfg.seed},
                              {"config_hash", config_hash(echo)},
                              {"pretrained_success", res.pretrained_success},
                              {"final_success", res.final_eval.success_rate()},
                              {"iterations", tr->iteration()},
                              {"env_steps", tr->env_steps()},
                              {"reached_target", tr->reached_target()}});
  return res;
}

}  // namespace

fs::path echo_path(const fs::path& out, const std::string& command) { return out / (command + ".config.json"); }

std::string with_seed(std::string pattern, std::uint64_t seed) {
  const std::string key = "{seed}";
  for (std::size_t p = pattern.find(key); p != std::string::npos; p = pattern.find(key, p)) {
    pattern.replace(p, key.size(), std::to_string(seed));
  }
  return pattern;
}

void cmd_gen_demos(const RunConfig& cfg) {
  const fs::path out = begin_command(cfg, "gen-demos");
  envlab::DemonstratorConfig dc;
  dc.jitter_std = cfg.env.jitter_std;
  const envlab::DemoDataset ds = envlab::generate_demos(cfg.env.mode_set, cfg.env.n_demos, cfg.seed, dc, cfg.env.avoid());
  envlab::save_dataset(out / kDemos, ds);
}

PretrainResult cmd_pretrain(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  cfg.pretrain.epochs = cfg.pretrain.resolved_epochs();
  const fs::path out = begin_command(cfg, "pretrain");
  const fs::path data = cfg.pretrain.dataset.empty() ? out / kDemos : fs::path(with_seed(cfg.pretrain.dataset, cfg.seed));
  if (!fs::exists(data)) throw InputError("missing dataset '" + data.string() + "'");
  const envlab::DemoDataset ds = envlab::load_dataset(data);

  PolicyBundle b;
  b.kind = cfg.pretrain.policy;
  b.norm = ds.normalizer;
  const std::uint64_t init = nd::derive_seed(cfg.seed, kInitStream);
  if (b.kind == PolicyKind::kDiffusion) {
    b.diffusion.emplace(cfg.policy, init);
  } else {
    b.gaussian.emplace(cfg.gaussian, init);
  }
  PretrainConfig pc = cfg.pretrain.train;
  pc.epochs = *cfg.pretrain.epochs;
  const std::size_t stride = pc.stride ? pc.stride : b.T_a();
  const envlab::ChunkSamples samples = envlab::build_chunk_samples(ds, b.T_p(), stride);
  const envlab::RunnerConfig rc = runner_for(cfg, b.T_p(), b.T_a(), kPretrainEvalStream);

  std::ofstream loss_csv(out / kPretrainCsv, std::ios::binary);
  loss_csv << kPretrainLogVersion << "\nepoch,loss\n";
  std::ofstream eval_csv(out / kPretrainEvalCsv, std::ios::binary);
  eval_csv << kPretrainLogVersion << "\nepoch,episodes,goal_top,goal_other,collision,timeout,success_rate,reach_rate\n";
  auto eval_row = [&](int epoch, const envlab::EvalSummary& s) {
    eval_csv << epoch << "," << s.episodes << "," << s.goal_top << "," << s.goal_other << "," << s.collision << ","
             << s.timeout << "," << num(s.success_rate()) << "," << num(s.reach_rate()) << "\n";
    eval_csv.flush();
  };
  auto hook = [&](int epoch, double loss) {
    loss_csv << epoch << "," << num(loss) << "\n";
    if (cfg.pretrain.eval_every > 0 && epoch % cfg.pretrain.eval_every == 0 && epoch < pc.epochs) {
      // Live weights; the EMA copy is only loaded at the end.
      eval_row(epoch, envlab::run_episodes(rc, b.norm, b.eval_sampler(), cfg.pretrain.eval_episodes));
    }
    return true;
  };
  PretrainResult res;
  const std::uint64_t train_seed = nd::derive_seed(cfg.seed, kPretrainStream);
  res.losses = b.diffusion ? pretrain_diffusion(*b.diffusion, samples, pc, train_seed, hook)
                           : pretrain_gaussian(*b.gaussian, samples, pc, train_seed, hook);
  loss_csv.flush();
  res.eval = envlab::run_episodes(rc, b.norm, b.eval_sampler(), cfg.pretrain.eval_episodes);
  eval_row(pc.epochs, res.eval);
  write_json(out / kEvalJson, eval_json(res.eval));
  save_policy(out / kPolicyStem, b, to_json(cfg), cfg.seed);
  return res;
}

std::vector<FinetuneResult> cmd_finetune(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  if (cfg.finetune.checkpoint.empty()) cfg.finetune.checkpoint = (fs::path(cfg.out) / kPolicyStem).string();
  std::vector<FinetuneResult> out;
  const std::string method(to_string(cfg.finetune.method));
  if (cfg.ablation.sweep.empty()) {
    out.push_back(finetune_one(cfg, method));
    return out;
  }
  begin_command(cfg, "finetune");
  for (double v : cfg.ablation.values) {
    RunConfig sub = cfg;
    sub.ablation = {};
    apply_sweep(sub, cfg.ablation.sweep, v);
    const std::string tag = cfg.ablation.sweep + "_" + num(v);
    sub.out = (fs::path(cfg.out) / tag).string();
    out.push_back(finetune_one(sub, method + " " + cfg.ablation.sweep + "=" + num(v)));
  }
  return out;
}

envlab::EvalSummary cmd_eval(const RunConfig& cfg) {
  const fs::path out = begin_command(cfg, "eval");
  const std::string ckpt = cfg.eval.checkpoint.empty() ? (out / kFinetunedStem).string()
                                                      : with_seed(cfg.eval.checkpoint, cfg.seed);
  envlab::EvalSummary s;
  const envlab::NoiseBand band{cfg.eval.noise_lo, cfg.eval.noise_hi};
  if (ckpt == "scripted") {
    const envlab::Normalizer norm = envlab::generate_demos(cfg.env.mode_set, cfg.env.n_demos, cfg.seed).normalizer;
    const envlab::RunnerConfig rc = runner_for(cfg, cfg.policy.T_p, cfg.policy.T_a, kEvalStream);
    s = envlab::run_episodes(rc, norm, envlab::scripted_sampler(norm, rc.T_p, {2, 2}, cfg.env.max_step),
                             cfg.eval.episodes, band);
  } else {
    const PolicyBundle b = load_checked(ckpt);
    const envlab::RunnerConfig rc = runner_for(cfg, b.T_p(), b.T_a(), kEvalStream);
    s = envlab::run_episodes(rc, b.norm, b.eval_sampler(), cfg.eval.episodes, band);
  }
  json j = eval_json(s);
  j["checkpoint"] = ckpt;
  j["seed"] = cfg.seed;
  j["noise"] = {{"lo", band.lo}, {"hi", band.hi}};
  write_json(out / kEvalJson, j);
  if (cfg.eval.trajectories) envlab::save_trajectories(out / kTrajectories, s.records);
  return s;
}

void cmd_plot(const RunConfig& cfg) {
  const fs::path out = begin_command(cfg, "plot");
  std::vector<std::string> inputs = cfg.plot.inputs;
  if (inputs.empty()) inputs.push_back((out / kTrajectories).string());
  std::vector<envlab::EpisodeRecord> eps;
  for (const auto& in : inputs) {
    if (!fs::exists(in)) throw InputError("missing trajectory file '" + in + "'");
    try {
      for (auto& e : envlab::load_trajectories(in)) eps.push_back(std::move(e));
    } catch (const std::runtime_error& e) {
      throw InputError(e.what());
    }
  }
  const fs::path target = cfg.plot.output.empty() ? out / kTrajectorySvg : fs::path(cfg.plot.output);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  std::ofstream f(target, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + target.string());
  f << trajectories_svg(cfg.env.avoid(), eps);
}

void cmd_report(const RunConfig& cfg) {
  const fs::path out = begin_command(cfg, "report");
  std::vector<fs::path> dirs;
  if (cfg.report.runs.empty()) {
    dirs = discover_runs(out);
  } else {
    for (const auto& r : cfg.report.runs) {
      for (auto& d : discover_runs(r)) dirs.push_back(std::move(d));
    }
  }
  if (dirs.empty()) throw InputError("report: no fine-tuning runs found");
  write_report(out, build_report(dirs));
}

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("--seeds expects a comma-separated list of non-negative integers");
    }
    out.push_back(std::stoull(item));
  }
  if (out.empty()) throw ConfigError("--seeds is empty");
  return out;
}

void emit_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"dppo_lab: pre-train and fine-tune diffusion policies on the Avoid environment"};
  app.require_subcommand(1, 1);
  std::string config_path, seeds, out;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Run seed (overrides config and DPPO_SEED)");
  app.add_option("--seeds", seeds, "Comma-separated seeds; one subdirectory per seed");
  app.add_option("--out", out, "Output directory (overrides config and DPPO_OUT)");
  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen-demos", "Generate the scripted demonstration dataset"},
      {"pretrain", "Behavior-clone a diffusion or Gaussian policy"},
      {"finetune", "Fine-tune with DPPO, Gaussian PPO, DRWR or DAWR"},
      {"eval", "Evaluate a checkpoint and export trajectories"},
      {"plot", "Render trajectories to SVG"},
      {"report", "Aggregate fine-tuning runs across seeds"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig cfg = config_path.empty() ? parse_config(json::object()) : load_config(config_path);
    apply_env_overrides(cfg);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    std::vector<std::uint64_t> seed_list;
    if (!seeds.empty()) {
      if (seed) throw ConfigError("--seed and --seeds are mutually exclusive");
      seed_list = parse_seeds(seeds);
    }
    auto run = [&](const RunConfig& c) {
      if (command == "gen-demos") cmd_gen_demos(c);
      if (command == "pretrain") {
        const PretrainResult r = cmd_pretrain(c);
        std::printf("pretrain seed %llu: final loss %.4g, success %.3f, reach %.3f\n",
                    static_cast<unsigned long long>(c.seed), r.losses.empty() ? 0.0 : r.losses.back(),
                    r.eval.success_rate(), r.eval.reach_rate());
      }
      if (command == "finetune") {
        for (const auto& r : cmd_finetune(c)) {
          std::printf("finetune %s: pretrained %.3f -> final %.3f\n", r.dir.string().c_str(), r.pretrained_success,
                      r.final_eval.success_rate());
        }
      }
      if (command == "eval") {
        const envlab::EvalSummary s = cmd_eval(c);
        std::printf("eval: success %.3f, reach %.3f over %zu episodes\n", s.success_rate(), s.reach_rate(),
                    s.episodes);
      }
      if (command == "plot") cmd_plot(c);
      if (command == "report") cmd_report(c);
    };
    if (seed_list.empty()) {
      run(cfg);
    } else {
      for (std::uint64_t s : seed_list) {
        RunConfig c = cfg;
        c.seed = s;
        c.out = (fs::path(cfg.out) / ("seed_" + std::to_string(s))).string();
        run(c);
      }
      if (command == "finetune") {
        RunConfig c = cfg;
        c.report.runs = {};
        cmd_report(c);
      }
    }
  } catch (const ConfigError& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const InputError& e) {
    emit_error("input", e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 1;
  }
  return 0;
}

}  // namespace dppo::lab
