#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dppo/diffusion/sampler.hpp"
#include "dppo/lab/commands.hpp"
#include "dppo/lab/policy_io.hpp"
#include "dppo/lab/pretrain.hpp"
#include "dppo/lab/report.hpp"
#include "dppo/lab/svg.hpp"

using namespace dppo;
using namespace dppo::lab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dppo_test_lab_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Small enough that every command runs in well under a second.
json tiny_config(const fs::path& out) {
  return {{"seed", 3},
          {"out", out.string()},
          {"env", {{"n_demos", 4}, {"n_envs", 4}, {"horizon", 40}}},
          {"policy",
           {{"K", 4}, {"K_prime", 2}, {"net", {{"head_hidden", {16, 16, 16}}, {"state_hidden", {8}}, {"state_features", 8}}}}},
          {"gaussian", {{"hidden", {8, 8}}}},
          {"pretrain", {{"epochs", 3}, {"eval_every", 2}, {"eval_episodes", 4}}},
          {"finetune",
           {{"iterations", 2},
            {"steps_per_iter", 2},
            {"actor_batch", 64},
            {"critic_batch", 16},
            {"actor_epochs", 2},
            {"critic_epochs", 2},
            {"critic_hidden", {8}},
            {"eval_every", 1},
            {"eval_episodes", 4}}},
          {"baseline",
           {{"iterations", 2},
            {"steps_per_iter", 2},
            {"batch_size", 16},
            {"actor_replay", 1},
            {"critic_replay", 1},
            {"critic_hidden", {8}},
            {"eval_every", 1},
            {"eval_episodes", 4}}},
          {"eval", {{"episodes", 4}}}};
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "config.json") {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

struct CliResult {
  int code = 0;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dppo_lab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::stringstream err;
  auto* old = std::cerr.rdbuf(err.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old);
  return {code, err.str()};
}

CliResult run(const fs::path& cfg, const std::string& command, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"--config", cfg.string()};
  args.insert(args.end(), extra.begin(), extra.end());
  args.push_back(command);
  return cli(args);
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("config rejects unknown keys with their path") {
  try {
    parse_config({{"finetune", {{"clip_epsilon", 0.1}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("finetune.clip_epsilon") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config({{"policy", {{"net", {{"depth", 3}}}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"seed", "seven"}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"finetune", {{"method", "sac"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"ablation", {{"sweep", "K_prime"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"policy", {{"K_prime", 30}}}}), ConfigError);
}

TEST_CASE("config round-trips through its resolved echo") {
  RunConfig c = parse_config(tiny_config("x"));
  const json echo = to_json(c);
  CHECK(to_json(parse_config(echo)) == echo);
  CHECK(config_hash(echo) == config_hash(to_json(parse_config(echo))));
  CHECK(config_hash(echo).size() == 16);
  c.seed += 1;
  CHECK(config_hash(to_json(c)) != config_hash(echo));
  // Every default is spelled out in the echo.
  CHECK(echo["finetune"].contains("clip_eps"));
  CHECK(echo["policy"]["net"].contains("time_dim"));
}

TEST_CASE("default pre-training epochs depend on the policy kind") {
  RunConfig c = parse_config(json::object());
  CHECK(c.pretrain.resolved_epochs() == 10000);
  c.pretrain.policy = PolicyKind::kGaussian;
  CHECK(c.pretrain.resolved_epochs() == 5000);
  c.pretrain.epochs = 7;
  CHECK(c.pretrain.resolved_epochs() == 7);
}

TEST_CASE("environment overrides seed and output directory only") {
  RunConfig c = parse_config({{"seed", 1}, {"out", "a"}});
  setenv("DPPO_SEED", "42", 1);
  setenv("DPPO_OUT", "b", 1);
  apply_env_overrides(c);
  unsetenv("DPPO_SEED");
  unsetenv("DPPO_OUT");
  CHECK(c.seed == 42);
  CHECK(c.out == "b");
  setenv("DPPO_SEED", "x1", 1);
  CHECK_THROWS_AS(apply_env_overrides(c), ConfigError);
  unsetenv("DPPO_SEED");
}

TEST_CASE("with_seed substitutes every placeholder") {
  CHECK(with_seed("runs/{seed}/p_{seed}", 7) == "runs/7/p_7");
  CHECK(with_seed("plain", 7) == "plain");
}

TEST_CASE("trajectory SVG: board only, one path per trajectory, deterministic") {
  const envlab::AvoidConfig env;
  const std::string empty = trajectories_svg(env, {});
  CHECK(count(empty, "<path") == 0);
  CHECK(count(empty, "<circle") == env.obstacles.size());
  CHECK(empty.rfind("</svg>") != std::string::npos);

  std::vector<envlab::EpisodeRecord> eps(3);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    eps[i].positions = {0.05, 0.5, 0.2, 0.5 + 0.1 * i, 0.4, 0.8};
    eps[i].targets = {0.2, 0.5, 0.4, 0.8};
    eps[i].event = i == 0 ? envlab::Event::kCollision : envlab::Event::kGoalTop;
  }
  const std::string svg = trajectories_svg(env, eps);
  CHECK(count(svg, "<path") == 3);
  CHECK(svg == trajectories_svg(env, eps));
}

TEST_CASE("curve labels are XML-escaped") {
  const std::string svg = curves_svg({{"a<b & \"c\"", {0, 1}, {0.1, 0.2}}}, "iter");
  CHECK(svg.find("a&lt;b &amp; &quot;c&quot;") != std::string::npos);
  CHECK(svg.find("a<b") == std::string::npos);
}

TEST_CASE("policy checkpoints round-trip bit-exactly") {
  const fs::path dir = fresh_dir("ckpt");
  const RunConfig c = parse_config(tiny_config(dir));
  const envlab::Normalizer norm = envlab::generate_demos(envlab::ModeSet::kM2, 4, 1).normalizer;

  SUBCASE("diffusion, split") {
    PolicyBundle b;
    b.diffusion.emplace(c.policy, 5);
    b.diffusion->split_finetune_weights();
    b.norm = norm;
    save_policy(dir / "p", b, to_json(c), 3);
    PolicyBundle r = load_policy(dir / "p");
    REQUIRE(r.diffusion);
    CHECK(r.diffusion->is_split());
    CHECK(r.norm.to_json() == norm.to_json());
    auto a = b.named_parameters();
    auto z = r.named_parameters();
    REQUIRE(a.size() == z.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].name == z[i].name);
      CHECK(a[i].tensor->storage() == z[i].tensor->storage());
    }
    // Saving the loaded copy reproduces the files byte for byte.
    save_policy(dir / "q", r, to_json(c), 3);
    CHECK(slurp(dir / "p.bin") == slurp(dir / "q.bin"));
    json mp = json::parse(slurp(dir / "p.json"));
    json mq = json::parse(slurp(dir / "q.json"));
    CHECK(mp["blob"] == "p.bin");
    mp.erase("blob");
    mq.erase("blob");
    CHECK(mp == mq);
  }
  SUBCASE("gaussian") {
    PolicyBundle b;
    b.kind = PolicyKind::kGaussian;
    b.gaussian.emplace(c.gaussian, 5);
    b.gaussian->set_sigma(0.05);
    b.norm = norm;
    save_policy(dir / "g", b, to_json(c), 3);
    PolicyBundle r = load_policy(dir / "g");
    REQUIRE(r.gaussian);
    CHECK(r.gaussian->sigma() == b.gaussian->sigma());
    auto a = b.named_parameters();
    auto z = r.named_parameters();
    REQUIRE(a.size() == z.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tensor->storage() == z[i].tensor->storage());
  }
}

TEST_CASE("reconfigure keeps weights and refuses structural changes") {
  const RunConfig c = parse_config(tiny_config("x"));
  diffusion::DiffusionPolicy p(c.policy, 9);
  diffusion::PolicyConfig pc = c.policy;
  pc.K_prime = 1;
  pc.T_a = 2;
  diffusion::DiffusionPolicy q = reconfigure(p, pc);
  CHECK(q.config().K_prime == 1);
  auto a = p.named_parameters();
  auto b = q.named_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tensor->storage() == b[i].tensor->storage());
  pc = c.policy;
  pc.K = 8;
  CHECK_THROWS(reconfigure(p, pc));
  p.split_finetune_weights();
  pc = c.policy;
  pc.K_prime = 1;
  CHECK_THROWS(reconfigure(p, pc));
}

TEST_CASE("constant-action demos: loss vanishes and samples reproduce the constant") {
  diffusion::PolicyConfig pc;
  pc.K = 5;
  pc.K_prime = 1;
  pc.T_p = 2;
  pc.T_a = 2;
  pc.net.chunk_dim = pc.chunk_dim();
  pc.net.head_hidden = {32, 32, 32};
  pc.net.state_hidden = {8};
  pc.net.state_features = 8;
  diffusion::DiffusionPolicy policy(pc, 1);

  const std::size_t n = 64;
  const double target = 0.3;
  envlab::ChunkSamples data;
  data.obs = nd::Tensor::matrix(n, 4);
  data.actions = nd::Tensor::matrix(n, pc.chunk_dim(), target);
  nd::Rng rng(4);
  for (double& v : data.obs.storage()) v = rng.uniform(-1.0, 1.0);
  data.family.assign(n, 0);

  PretrainConfig tc;
  tc.epochs = 1000;
  tc.lr = 1e-3;
  tc.lr_end = 1e-4;
  const std::vector<double> losses = pretrain_diffusion(policy, data, tc, 2);
  CHECK(losses.back() < 0.05 * losses.front());

  std::vector<nd::Rng> rngs;
  for (std::size_t i = 0; i < 16; ++i) rngs.emplace_back(100 + i);
  nd::Tensor obs = nd::Tensor::matrix(16, 4);
  for (std::size_t i = 0; i < 16 * 4; ++i) obs.storage()[i] = data.obs.storage()[i];
  const diffusion::DenoiseTrace tr = diffusion::sample_chunk(policy, obs, rngs, diffusion::SampleMode::kEval);
  for (double a : tr.action.storage()) CHECK(std::abs(a - target) < 0.05);
}

TEST_CASE("pre-training log is versioned and ordered by epoch") {
  const fs::path dir = fresh_dir("pretrain_log");
  const fs::path cfg = write_config(dir, tiny_config(dir / "run"));
  REQUIRE(run(cfg, "gen-demos").code == 0);
  REQUIRE(run(cfg, "pretrain").code == 0);
  std::ifstream f(dir / "run" / kPretrainCsv);
  std::string line;
  std::getline(f, line);
  CHECK(line == kPretrainLogVersion);
  std::getline(f, line);
  CHECK(line == "epoch,loss");
  int prev = 0;
  while (std::getline(f, line)) {
    const int e = std::stoi(line.substr(0, line.find(',')));
    CHECK(e == prev + 1);
    prev = e;
  }
  CHECK(prev == 3);
  const std::string eval = slurp(dir / "run" / kPretrainEvalCsv);
  CHECK(eval.find("\n2,4,") != std::string::npos);
  CHECK(eval.find("\n3,4,") != std::string::npos);
}

TEST_CASE("gen-demos is reproducible and validates") {
  const fs::path dir = fresh_dir("demos");
  for (const char* m : {"M1", "M2", "M3"}) {
    json j = tiny_config(dir / m);
    j["env"]["mode_set"] = m;
    const fs::path cfg = write_config(dir, j, std::string(m) + ".json");
    REQUIRE(run(cfg, "gen-demos").code == 0);
    const std::string first = slurp(dir / m / kDemos);
    REQUIRE(run(cfg, "gen-demos").code == 0);
    CHECK(first == slurp(dir / m / kDemos));
    const envlab::DemoDataset ds = envlab::load_dataset(dir / m / kDemos);
    CHECK(ds.episodes.size() == 4);
    CHECK(to_string(ds.mode_set) == m);
  }
}

TEST_CASE("scripted oracle evaluates to success 1.0") {
  const fs::path dir = fresh_dir("scripted");
  json j = tiny_config(dir);
  j["env"]["horizon"] = 100;
  j["eval"] = {{"checkpoint", "scripted"}, {"episodes", 10}};
  const fs::path cfg = write_config(dir, j);
  REQUIRE(run(cfg, "eval").code == 0);
  const json e = json::parse(slurp(dir / kEvalJson));
  CHECK(e["success_rate"] == 1.0);
  CHECK(e["events"]["goal_top"] == 10);
}

TEST_CASE("pipeline is deterministic and reproducible from its echoes") {
  const fs::path dir = fresh_dir("pipeline");
  const fs::path cfg = write_config(dir, tiny_config(dir / "a"));
  for (const char* cmd : {"gen-demos", "pretrain", "finetune", "eval", "plot"}) {
    INFO(std::string(cmd));
    REQUIRE(run(cfg, cmd).code == 0);
  }
  const fs::path a = dir / "a";
  CHECK(count(slurp(a / kTrajectorySvg), "<path") == 4);
  const json run_json = json::parse(slurp(a / kRunJson));
  CHECK(run_json["iterations"] == 2);
  CHECK(run_json["config_hash"] == config_hash(json::parse(slurp(echo_path(a, "finetune")))));

  // Same commands replayed from the echoes into another directory.
  const fs::path b = dir / "b";
  for (const char* cmd : {"gen-demos", "pretrain", "finetune", "eval", "plot"}) {
    REQUIRE(run(echo_path(a, cmd), cmd, {"--out", b.string()}).code == 0);
  }
  for (const char* f : {kDemos, kPretrainCsv, kTrainCsv, "policy.bin", "finetuned.bin", kTrajectories,
                        kTrajectorySvg}) {
    INFO(std::string(f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  // The eval JSON names its checkpoint, which lives under the output dir.
  json ea = json::parse(slurp(a / kEvalJson));
  json eb = json::parse(slurp(b / kEvalJson));
  ea.erase("checkpoint");
  eb.erase("checkpoint");
  CHECK(ea == eb);

  // Repeated eval with the same seed writes identical JSON.
  const std::string first = slurp(a / kEvalJson);
  REQUIRE(run(cfg, "eval").code == 0);
  CHECK(first == slurp(a / kEvalJson));
}

TEST_CASE("every fine-tuning method runs through the CLI") {
  const fs::path dir = fresh_dir("methods");
  json j = tiny_config(dir);
  write_config(dir, j);
  REQUIRE(run(dir / "config.json", "gen-demos").code == 0);
  REQUIRE(run(dir / "config.json", "pretrain").code == 0);
  j["pretrain"]["policy"] = "gaussian";
  j["out"] = (dir / "g").string();
  j["pretrain"]["dataset"] = (dir / kDemos).string();
  REQUIRE(run(write_config(dir, j, "g.json"), "pretrain").code == 0);

  for (const char* m : {"dppo", "drwr", "dawr", "gaussian"}) {
    INFO(std::string(m));
    json f = tiny_config(dir / m);
    f["finetune"]["method"] = m;
    f["finetune"]["checkpoint"] = (dir / (std::string(m) == "gaussian" ? "g/policy" : "policy")).string();
    REQUIRE(run(write_config(dir, f, std::string(m) + ".json"), "finetune").code == 0);
    const json r = json::parse(slurp(dir / m / kRunJson));
    CHECK(r["method"] == m);
    CHECK(r["iterations"] == 2);
    CHECK(fs::exists(dir / m / "finetuned.bin"));
  }

  // A Gaussian method on a diffusion checkpoint is an input error.
  json bad = tiny_config(dir / "bad");
  bad["finetune"]["method"] = "gaussian";
  bad["finetune"]["checkpoint"] = (dir / "policy").string();
  const CliResult r = run(write_config(dir, bad, "bad.json"), "finetune");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"] == "input");
}

TEST_CASE("ablation sweep writes one directory per value") {
  const fs::path dir = fresh_dir("sweep");
  json j = tiny_config(dir);
  j["finetune"]["iterations"] = 1;
  j["ablation"] = {{"sweep", "K_prime"}, {"values", {1, 3}}};
  const fs::path cfg = write_config(dir, j);
  REQUIRE(run(cfg, "gen-demos").code == 0);
  REQUIRE(run(cfg, "pretrain").code == 0);
  REQUIRE(run(cfg, "finetune").code == 0);
  for (const char* sub : {"K_prime_1", "K_prime_3"}) {
    INFO(sub);
    REQUIRE(fs::exists(dir / sub / kRunJson));
    const json echo = json::parse(slurp(echo_path(dir / sub, "finetune")));
    CHECK(echo["finetune"]["k_prime"] == std::stoi(std::string(sub).substr(8)));
    CHECK(echo["ablation"]["sweep"] == "");
  }
  REQUIRE(run(cfg, "report").code == 0);
  const json rep = json::parse(slurp(dir / "report.json"));
  CHECK(rep["groups"].size() == 2);
}

TEST_CASE("noise injection flags band changes in the training log") {
  const fs::path dir = fresh_dir("noise");
  json j = tiny_config(dir);
  j["finetune"]["iterations"] = 3;
  j["noise"] = {{"enabled", true}, {"start_iter", 0}, {"full_iter", 2}, {"lo", 0.1}, {"hi", 0.2}};
  const fs::path cfg = write_config(dir, j);
  REQUIRE(run(cfg, "gen-demos").code == 0);
  REQUIRE(run(cfg, "pretrain").code == 0);
  REQUIRE(run(cfg, "finetune").code == 0);
  const std::string log = slurp(dir / kTrainCsv);
  CHECK(count(log, "noise_band") >= 2);
}

TEST_CASE("seed fan-out writes per-seed directories and an aggregate report") {
  const fs::path dir = fresh_dir("seeds");
  json j = tiny_config(dir);
  j["finetune"]["iterations"] = 1;
  const fs::path cfg = write_config(dir, j);
  for (const char* cmd : {"gen-demos", "pretrain", "finetune"}) {
    REQUIRE(run(cfg, cmd, {"--seeds", "1,2"}).code == 0);
  }
  CHECK(fs::exists(dir / "seed_1" / kRunJson));
  CHECK(fs::exists(dir / "seed_2" / kRunJson));
  const json rep = json::parse(slurp(dir / "report.json"));
  REQUIRE(rep["groups"].size() == 1);
  CHECK(rep["groups"][0]["runs"].size() == 2);
  // The seeds trained differently.
  CHECK(slurp(dir / "seed_1" / "policy.bin") != slurp(dir / "seed_2" / "policy.bin"));

  // Regenerating the report from stored files is deterministic.
  const std::string csv = slurp(dir / "report.csv");
  const std::string svg = slurp(dir / "curves.svg");
  REQUIRE(run(cfg, "report").code == 0);
  CHECK(csv == slurp(dir / "report.csv"));
  CHECK(svg == slurp(dir / "curves.svg"));
  CHECK(csv.rfind("# dppo-report v1", 0) == 0);
}

TEST_CASE("CLI errors are one JSON line on stderr") {
  const fs::path dir = fresh_dir("errors");
  const fs::path cfg = write_config(dir, tiny_config(dir / "empty"));

  CliResult r = run(cfg, "pretrain");
  CHECK(r.code == 2);
  CHECK(count(r.err, "\n") == 1);
  json e = json::parse(r.err);
  CHECK(e["error"] == "input");
  CHECK(e["message"].get<std::string>().find("dataset") != std::string::npos);

  r = run(cfg, "finetune");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"] == "input");

  r = run(cfg, "report");
  CHECK(r.code == 2);

  r = run(write_config(dir, {{"bogus", 1}}, "bad.json"), "eval");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"] == "config");

  r = cli({"frobnicate"});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"] == "usage");

  r = run(cfg, "eval", {"--seed", "1", "--seeds", "1,2"});
  CHECK(r.code == 2);

  // Malformed trajectory file.
  std::ofstream(dir / "bad.jsonl") << "{not json\n";
  json p = tiny_config(dir);
  p["plot"] = {{"inputs", {(dir / "bad.jsonl").string()}}};
  r = run(write_config(dir, p, "plot.json"), "plot");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"] == "input");
}

TEST_CASE("config validation catches a residual head with an even depth") {
  CHECK_THROWS_AS(parse_config({{"policy", {{"net", {{"head_hidden", {16, 16}}}}}}}), ConfigError);
}
