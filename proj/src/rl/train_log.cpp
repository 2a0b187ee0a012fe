#include "dppo/rl/train_log.hpp"

#include <cstdio>
#include <stdexcept>

namespace dppo::rl {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

TrainLog::TrainLog(const std::filesystem::path& path) : out_(path, std::ios::binary) {
  if (!out_) throw std::runtime_error("cannot open training log " + path.string());
  out_ << kTrainLogVersion << '\n' << header() << '\n';
}

void TrainLog::write(const IterationStats& s) {
  out_ << format_row(s) << '\n';
  out_.flush();
}

std::string TrainLog::header() {
  return "iteration,env_steps,success_rate,mean_return,actor_loss,value_loss,clip_fraction,approx_kl,lr,"
         "eval_success,episodes,actor_epochs,noise_lo,noise_hi,event";
}

std::string TrainLog::format_row(const IterationStats& s) {
  std::string row = std::to_string(s.iteration) + ',' + std::to_string(s.env_steps) + ',' + num(s.success_rate) +
                    ',' + num(s.mean_return) + ',' + num(s.actor_loss) + ',' + num(s.value_loss) + ',' +
                    num(s.clip_fraction) + ',' + num(s.approx_kl) + ',' + num(s.lr) + ',';
  if (s.eval_success) row += num(*s.eval_success);
  row += ',' + std::to_string(s.episodes) + ',' + std::to_string(s.actor_epochs) + ',' + num(s.band.lo) + ',' +
         num(s.band.hi) + ',' + s.event;
  return row;
}

}  // namespace dppo::rl
