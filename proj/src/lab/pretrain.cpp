#include "dppo/lab/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "dppo/diffusion/bc.hpp"
#include "dppo/nd/adam.hpp"
#include "dppo/rl/on_policy.hpp"

namespace dppo::lab {

namespace {

using LossFn = std::function<nd::Var(nd::Tape&, const nd::Tensor& obs, const nd::Tensor& act, nd::Rng& rng)>;

std::vector<double> run_bc(std::vector<nd::Tensor*> params, const envlab::ChunkSamples& data,
                           const PretrainConfig& cfg, std::uint64_t seed, const EpochHook& hook, const LossFn& loss_fn) {
  if (data.obs.rows() == 0) throw std::invalid_argument("pretrain: empty dataset");
  if (cfg.batch_size == 0) throw std::invalid_argument("pretrain: batch_size must be positive");
  const std::size_t per_epoch = (data.obs.rows() + cfg.batch_size - 1) / cfg.batch_size;
  nd::AdamConfig ac;
  ac.lr = cfg.lr;
  ac.lr_end = cfg.lr_end;
  ac.weight_decay = cfg.weight_decay;
  ac.total_steps = static_cast<std::int64_t>(per_epoch) * cfg.epochs;
  if (cfg.ema_decay > 0.0) ac.ema_decay = cfg.ema_decay;
  nd::Adam opt(std::move(params), ac);
  nd::Rng rng(seed);
  std::vector<double> losses;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    const auto batches = rl::epoch_batches(data.obs.rows(), cfg.batch_size, rng);
    for (const auto& idx : batches) {
      const nd::Tensor obs = nd::gather_rows(data.obs, idx);
      const nd::Tensor act = nd::gather_rows(data.actions, idx);
      opt.zero_grad();
      nd::Tape tape;
      nd::Var loss = loss_fn(tape, obs, act, rng);
      if (!std::isfinite(loss.item())) throw nd::NonFiniteError("pretrain: loss diverged");
      total += loss.item();
      tape.backward(loss);
      opt.step();
    }
    losses.push_back(total / static_cast<double>(batches.size()));
    if (hook && !hook(epoch + 1, losses.back())) break;
  }
  if (opt.has_ema()) opt.load_ema_into_params();
  return losses;
}

std::vector<nd::Tensor*> tensors(const std::vector<nd::NamedTensor>& named) {
  std::vector<nd::Tensor*> out;
  for (const auto& p : named) out.push_back(p.tensor);
  return out;
}

}  // namespace

std::vector<double> pretrain_diffusion(diffusion::DiffusionPolicy& policy, const envlab::ChunkSamples& data,
                                       const PretrainConfig& cfg, std::uint64_t seed, const EpochHook& hook) {
  if (data.actions.cols() != policy.config().chunk_dim()) {
    throw nd::ShapeError("pretrain: dataset chunk width does not match the policy");
  }
  diffusion::NoisePredictor& net = policy.trainable_net();
  return run_bc(tensors(net.named_parameters()), data, cfg, seed, hook,
                [&](nd::Tape& t, const nd::Tensor& obs, const nd::Tensor& act, nd::Rng& rng) {
                  return diffusion::bc_loss(t, net, obs, act, policy.schedule(), rng);
                });
}

std::vector<double> pretrain_gaussian(baselines::GaussianPolicy& policy, const envlab::ChunkSamples& data,
                                      const PretrainConfig& cfg, std::uint64_t seed, const EpochHook& hook) {
  if (data.actions.cols() != policy.config().chunk_dim()) {
    throw nd::ShapeError("pretrain: dataset chunk width does not match the policy");
  }
  return run_bc(tensors(policy.mean_net().named_parameters()), data, cfg, seed, hook,
                [&](nd::Tape& t, const nd::Tensor& obs, const nd::Tensor& act, nd::Rng&) {
                  return baselines::gaussian_bc_loss(t, policy, obs, act);
                });
}

}  // namespace dppo::lab
