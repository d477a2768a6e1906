#include "docstormer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace docstormer {

namespace {

// Cycles through a dataset in seeded shuffled epochs.
class Sampler {
 public:
  Sampler(std::size_t n, Rng& rng) : order_(n), rng_(rng) { reshuffle(); }
  std::size_t next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }
  std::vector<std::size_t> order_;
  Rng& rng_;
  std::size_t pos_ = 0;
};

Tensor<float> flip(const Tensor<float>& x, bool horizontal) {
  const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<float> out(x.shape());
  auto s = x.data();
  auto d = out.mutable_data();
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t i = 0; i < w; ++i) {
        const std::int64_t sy = horizontal ? y : h - 1 - y, sx = horizontal ? w - 1 - i : i;
        d[(k * h + y) * w + i] = s[(k * h + sy) * w + sx];
      }
  return out;
}

void require_data(const std::vector<TrainingPair>& data, const char* who) {
  if (data.empty()) throw std::invalid_argument(std::string(who) + ": empty dataset");
}

TrainStage stage_for(const TrainConfig& cfg, std::int64_t step) {
  return cfg.fixed_stage ? *cfg.fixed_stage : cfg.progressive.at(step, cfg.steps);
}

double lr_for(const TrainConfig& cfg, std::int64_t step) {
  LrSchedule s = cfg.lr;
  s.total_steps = cfg.steps;
  return cosine_lr(step, s);
}

void maybe_log(const TrainConfig& cfg, std::int64_t step, const std::string& text) {
  if (cfg.log && cfg.log_every > 0 && ((step + 1) % cfg.log_every == 0 || step == 0)) cfg.log(text);
}

std::string format_step(const char* what, std::int64_t step, std::int64_t total, double loss, double lr) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s step %lld/%lld loss %.6f lr %.3g", what, static_cast<long long>(step + 1),
                static_cast<long long>(total), loss, lr);
  return buf;
}

}  // namespace

void AdamConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < beta2 && beta2 < 1.0)) throw std::invalid_argument("Adam needs 0 < beta1 < beta2 < 1");
  if (weight_decay < 0.0 || !(eps > 0.0)) throw std::invalid_argument("Adam needs weight_decay >= 0 and eps > 0");
}

template <class T>
void adam_step(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, std::int64_t step,
               double lr, const AdamConfig& cfg) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ShapeError("adam_step: gradient or moment size differs from the parameter");
  }
  if (step < 1) throw std::invalid_argument("adam_step: step count starts at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    double p = param[i];
    const double g = grad[i];
    p -= lr * cfg.weight_decay * p;
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    p -= lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps);
    param[i] = static_cast<T>(p);
  }
}

template <class T>
Adam<T>::Adam(const ParameterSet<T>& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  cfg_.validate();
  for (const auto& [name, t] : params_.entries()) {
    m_.emplace_back(static_cast<std::size_t>(t.numel()), T(0));
    v_.emplace_back(static_cast<std::size_t>(t.numel()), T(0));
  }
}

template <class T>
void Adam<T>::step(double lr) {
  ++t_;
  std::vector<T> zeros;
  std::size_t i = 0;
  for (const auto& [name, t] : params_.entries()) {
    Tensor<T> handle = t;
    std::span<const T> g;
    if (handle.has_grad()) {
      g = handle.grad();
    } else {
      zeros.assign(static_cast<std::size_t>(handle.numel()), T(0));
      g = zeros;
    }
    adam_step<T>(handle.mutable_data(), g, m_[i], v_[i], t_, lr, cfg_);
    ++i;
  }
}

double cosine_lr(std::int64_t step, const LrSchedule& s) {
  if (s.total_steps <= 0) throw std::invalid_argument("cosine_lr: total steps must be positive");
  if (step < 0 || step > s.total_steps) {
    throw std::out_of_range("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(s.total_steps) + "]");
  }
  const double frac = static_cast<double>(step) / static_cast<double>(s.total_steps);
  return s.final + 0.5 * (s.initial - s.final) * (1.0 + std::cos(std::numbers::pi * frac));
}

void ProgressiveSchedule::validate() const {
  if (stages.empty() || switch_fractions.size() + 1 != stages.size()) {
    throw std::invalid_argument("progressive schedule needs one switch point between consecutive stages");
  }
  for (const auto& s : stages) {
    if (s.patch <= 0 || s.patch % 8 != 0 || s.batch <= 0) {
      throw std::invalid_argument("progressive stages need patch sizes divisible by 8 and positive batches");
    }
  }
  for (std::size_t i = 0; i < switch_fractions.size(); ++i) {
    if (!(switch_fractions[i] > 0.0 && switch_fractions[i] < 1.0) ||
        (i > 0 && switch_fractions[i] <= switch_fractions[i - 1])) {
      throw std::invalid_argument("progressive switch fractions must increase within (0, 1)");
    }
  }
}

std::vector<std::int64_t> ProgressiveSchedule::switch_steps(std::int64_t total_steps) const {
  std::vector<std::int64_t> out;
  for (double f : switch_fractions) out.push_back(static_cast<std::int64_t>(std::llround(f * total_steps)));
  return out;
}

TrainStage ProgressiveSchedule::at(std::int64_t step, std::int64_t total_steps) const {
  validate();
  const auto switches = switch_steps(total_steps);
  std::size_t k = 0;
  while (k < switches.size() && step >= switches[k]) ++k;
  return stages[k];
}

namespace {

// Writes a CSV through a temporary sibling renamed into place.
void write_csv(const std::filesystem::path& path, const char* header, const std::vector<std::string>& rows) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << header << '\n';
    for (const auto& r : rows) out << r << '\n';
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_loss_curve(const std::filesystem::path& path, const std::vector<CurveRow>& curve) {
  std::vector<std::string> rows;
  char buf[96];
  for (const auto& r : curve) {
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g", static_cast<long long>(r.step), r.loss, r.lr);
    rows.emplace_back(buf);
  }
  write_csv(path, "step,loss,lr", rows);
}

void write_gan_curve(const std::filesystem::path& path, const std::vector<GanCurveRow>& curve) {
  std::vector<std::string> rows;
  char buf[160];
  for (const auto& r : curve) {
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(r.step), r.generator_loss,
                  r.critic_loss, r.gradient_penalty, r.lr);
    rows.emplace_back(buf);
  }
  write_csv(path, "step,generator_loss,critic_loss,gradient_penalty,lr", rows);
}

std::vector<TrainingPair> to_pairs(const std::vector<Sample>& samples) {
  std::vector<TrainingPair> out;
  for (const auto& s : samples) out.push_back({s.degraded, s.ground_truth, s.priors});
  return out;
}

std::vector<TrainingPair> to_pairs(const std::vector<SamplePair>& samples) {
  std::vector<TrainingPair> out;
  for (const auto& s : samples) out.push_back({s.degraded, s.ground_truth, s.priors});
  return out;
}

TrainingPair sample_patch(const TrainingPair& pair, std::int64_t patch, bool flips, Rng& rng) {
  const std::int64_t h = pair.degraded.dim(1), w = pair.degraded.dim(2);
  auto fit = [&](std::int64_t extent) {
    const std::int64_t p = std::min(patch, extent);
    return p >= 8 ? p - p % 8 : p;
  };
  const std::int64_t ph = fit(h), pw = fit(w);
  std::uniform_int_distribution<std::int64_t> ty(0, h - ph), tx(0, w - pw);
  const std::int64_t top = ty(rng), left = tx(rng);
  TrainingPair out;
  TapeScope no_tape(nullptr);
  const bool whole = ph == h && pw == w;
  out.degraded = whole ? pair.degraded : crop(pair.degraded, top, left, ph, pw);
  out.ground_truth = whole ? pair.ground_truth : crop(pair.ground_truth, top, left, ph, pw);
  out.priors = whole ? pair.priors : crop(pair.priors, top, left, ph, pw);
  if (flips) {
    std::bernoulli_distribution coin(0.5);
    for (bool horizontal : {true, false}) {
      if (!coin(rng)) continue;
      out.degraded = flip(out.degraded, horizontal);
      out.ground_truth = flip(out.ground_truth, horizontal);
      out.priors = flip(out.priors, horizontal);
    }
  }
  return out;
}

std::vector<CurveRow> train_dp_net(DpNet<float>& net, const std::vector<TrainingPair>& data, const TrainConfig& cfg) {
  require_data(data, "train_dp_net");
  Rng rng(cfg.seed);
  Sampler sampler(data.size(), rng);
  Adam<float> opt(net.params(), cfg.adam);
  std::vector<CurveRow> curve;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    const TrainStage stage = stage_for(cfg, step);
    const double lr = lr_for(cfg, step);
    net.params().zero_grad();
    double total = 0.0;
    for (int b = 0; b < stage.batch; ++b) {
      const TrainingPair patch = sample_patch(data[sampler.next()], stage.patch, cfg.flips, rng);
      Tape tape;
      TapeScope scope(&tape);
      auto out = net.forward(patch.degraded);
      Tensor<float> loss = scale(l_dp(out.priors, patch.priors, cfg.focal), 1.0f / static_cast<float>(stage.batch));
      backward(loss, tape);
      total += loss.item();
    }
    opt.step(lr);
    curve.push_back({step, total, lr});
    maybe_log(cfg, step, format_step("dp", step, cfg.steps, total, lr));
  }
  return curve;
}

std::vector<CurveRow> train_docstormer(DocStormer<float>& model, const std::vector<TrainingPair>& data,
                                       const TrainConfig& cfg) {
  require_data(data, "train_docstormer");
  Rng rng(cfg.seed);
  Sampler sampler(data.size(), rng);
  auto params = model.params();
  Adam<float> opt(params, cfg.adam);
  std::vector<CurveRow> curve;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    const TrainStage stage = stage_for(cfg, step);
    const double lr = lr_for(cfg, step);
    params.zero_grad();
    double total = 0.0;
    for (int b = 0; b < stage.batch; ++b) {
      const TrainingPair patch = sample_patch(data[sampler.next()], stage.patch, cfg.flips, rng);
      Tape tape;
      TapeScope scope(&tape);
      auto out = model.forward(patch.degraded);
      Tensor<float> loss = scale(l_ds(out.enhanced, patch.ground_truth, out.priors, patch.priors, cfg.weights, cfg.focal),
                                 1.0f / static_cast<float>(stage.batch));
      backward(loss, tape);
      total += loss.item();
    }
    opt.step(lr);
    curve.push_back({step, total, lr});
    maybe_log(cfg, step, format_step("joint", step, cfg.steps, total, lr));
  }
  return curve;
}

Tensor<float> to_critic_input(const Tensor<float>& image, std::int64_t size) {
  const std::int64_t h = image.dim(1), w = image.dim(2);
  if (h == size && w == size) return image;
  const std::int64_t side = std::min(h, w);
  Tensor<float> square = (h == w) ? image : crop(image, (h - side) / 2, (w - side) / 2, side, side);
  return side == size ? square : resize_bilinear(square, size, size);
}

std::vector<GanCurveRow> train_docstormer_gan(DocStormer<float>& model, Discriminator<float>& critic,
                                              const std::vector<TrainingPair>& data,
                                              const std::vector<Tensor<float>>& clean_pool, const TrainConfig& cfg) {
  require_data(data, "train_docstormer_gan");
  if (clean_pool.empty()) throw std::invalid_argument("train_docstormer_gan: empty clean patch pool");
  if (cfg.n_critic < 1) throw std::invalid_argument("train_docstormer_gan: n_critic must be positive");
  Rng rng(cfg.seed);
  Sampler sampler(data.size(), rng);
  Sampler clean(clean_pool.size(), rng);
  auto gen_params = model.params();
  Adam<float> gen_opt(gen_params, cfg.adam);
  Adam<float> critic_opt(critic.params(), cfg.critic_adam);
  const std::int64_t size = critic.config().input_size;
  std::vector<GanCurveRow> curve;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    const TrainStage stage = stage_for(cfg, step);
    const double lr = lr_for(cfg, step);
    GanCurveRow row{step, 0.0, 0.0, 0.0, lr};
    for (int k = 0; k < cfg.n_critic; ++k) {
      std::vector<Tensor<float>> reals, fakes;
      {
        TapeScope no_tape(nullptr);
        for (int b = 0; b < stage.batch; ++b) {
          const TrainingPair patch = sample_patch(data[sampler.next()], stage.patch, cfg.flips, rng);
          fakes.push_back(to_critic_input(model.forward(patch.degraded).enhanced, size));
          reals.push_back(to_critic_input(clean_pool[clean.next()], size));
        }
      }
      critic.params().zero_grad();
      Tape tape;
      TapeScope scope(&tape);
      std::vector<Tensor<float>> rs, fs;
      for (int b = 0; b < stage.batch; ++b) {
        rs.push_back(critic.score(reals[b]));
        fs.push_back(critic.score(fakes[b]));
      }
      Tensor<float> gp = gradient_penalty(critic, reals, fakes, rng);
      Tensor<float> loss = wgan_d_loss(stack_scores(rs), stack_scores(fs), gp, cfg.gp.lambda);
      backward(loss, tape);
      critic_opt.step(cfg.critic_lr);
      row.critic_loss = loss.item();
      row.gradient_penalty = gp.item();
    }
    gen_params.zero_grad();
    double total = 0.0;
    for (int b = 0; b < stage.batch; ++b) {
      const TrainingPair patch = sample_patch(data[sampler.next()], stage.patch, cfg.flips, rng);
      Tape tape;
      TapeScope scope(&tape);
      auto out = model.forward(patch.degraded);
      Tensor<float> lds = l_ds(out.enhanced, patch.ground_truth, out.priors, patch.priors, cfg.weights, cfg.focal);
      Tensor<float> adv = wgan_g_loss(critic.score(to_critic_input(out.enhanced, size)));
      Tensor<float> loss = scale(l_ds_gan(lds, adv, cfg.weights), 1.0f / static_cast<float>(stage.batch));
      backward(loss, tape);
      total += loss.item();
    }
    gen_opt.step(lr);
    row.generator_loss = total;
    curve.push_back(row);
    maybe_log(cfg, step, format_step("gan", step, cfg.steps, total, lr));
  }
  return curve;
}

std::vector<CriticStepRecord> train_critic(Discriminator<float>& critic, const std::vector<Tensor<float>>& real,
                                           const std::vector<Tensor<float>>& fake, std::int64_t steps, int batch,
                                           const TrainConfig& cfg) {
  if (real.empty() || fake.empty()) throw std::invalid_argument("train_critic: empty sample pools");
  if (batch < 1) throw std::invalid_argument("train_critic: batch must be positive");
  Rng rng(cfg.seed);
  Sampler real_s(real.size(), rng), fake_s(fake.size(), rng);
  Adam<float> opt(critic.params(), cfg.critic_adam);
  const std::int64_t size = critic.config().input_size;
  std::vector<CriticStepRecord> out;
  for (std::int64_t step = 0; step < steps; ++step) {
    std::vector<Tensor<float>> reals, fakes;
    for (int b = 0; b < batch; ++b) {
      reals.push_back(to_critic_input(real[real_s.next()], size));
      fakes.push_back(to_critic_input(fake[fake_s.next()], size));
    }
    critic.params().zero_grad();
    Tape tape;
    TapeScope scope(&tape);
    std::vector<Tensor<float>> rs, fs;
    for (int b = 0; b < batch; ++b) {
      rs.push_back(critic.score(reals[b]));
      fs.push_back(critic.score(fakes[b]));
    }
    Tensor<float> real_scores = stack_scores(rs), fake_scores = stack_scores(fs);
    Tensor<float> gp = gradient_penalty(critic, reals, fakes, rng);
    Tensor<float> loss = wgan_d_loss(real_scores, fake_scores, gp, cfg.gp.lambda);
    backward(loss, tape);
    opt.step(cfg.critic_lr);
    CriticStepRecord rec;
    rec.surrogate = mean(real_scores).item() - mean(fake_scores).item();
    rec.gradient_penalty = gp.item();
    rec.loss = loss.item();
    out.push_back(rec);
  }
  return out;
}

template void adam_step<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                               std::int64_t, double, const AdamConfig&);
template void adam_step<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                                std::int64_t, double, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace docstormer
