#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "proglearn/datasets.hpp"
#include "proglearn/rng.hpp"

namespace proglearn {

// Two tanh hidden layers and a single logit, parameters in one flat vector so the
// coordinate update mode can address any weight by index.
class MlpModel {
 public:
  MlpModel(int n_in, int width, std::uint64_t seed) : n_in_(n_in), width_(width) {
    if (n_in < 1 || width < 1) throw std::domain_error("bad mlp shape");
    theta_.resize(param_count());
    Rng rng(seed);
    auto init_block = [&](std::size_t offset, std::size_t count, int fan_in) {
      double scale = std::sqrt(1.0 / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < count; ++i)
        theta_[offset + i] = (2.0 * rng.unit() - 1.0) * scale;
    };
    std::size_t w = static_cast<std::size_t>(width);
    std::size_t n = static_cast<std::size_t>(n_in);
    init_block(0, w * n, n_in);                     // W1
    init_block(w * n + w, w * w, width);            // W2
    init_block(w * n + w + w * w + w, w, width);    // w3
    // biases start at zero
  }

  int input_size() const { return n_in_; }
  int width() const { return width_; }
  std::size_t param_count() const {
    std::size_t w = static_cast<std::size_t>(width_), n = static_cast<std::size_t>(n_in_);
    return w * n + w + w * w + w + w + 1;
  }
  std::vector<double>& params() { return theta_; }
  const std::vector<double>& params() const { return theta_; }

  // Inputs are encoded +1 for '1' and -1 for '0'.
  static std::vector<double> encode(std::string_view bits) {
    std::vector<double> x(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) x[i] = bits[i] == '1' ? 1.0 : -1.0;
    return x;
  }

  double logit(const std::vector<double>& x) const {
    std::vector<double> h1, h2;
    return forward(x, h1, h2);
  }

  int predict(std::string_view bits) const { return logit(encode(bits)) > 0.0 ? 1 : 0; }

  // Cross-entropy loss of one example.
  double loss(const std::vector<double>& x, int y) const {
    double z = logit(x);
    return softplus(z) - (y == 1 ? z : 0.0);
  }

  // Gradient of the single-example loss with respect to every parameter.
  void gradient(const std::vector<double>& x, int y, std::vector<double>& grad) const {
    std::vector<double> h1, h2;
    double z = forward(x, h1, h2);
    double dz = sigmoid(z) - (y == 1 ? 1.0 : 0.0);

    grad.assign(param_count(), 0.0);
    const std::size_t w = static_cast<std::size_t>(width_), n = static_cast<std::size_t>(n_in_);
    const std::size_t w1 = 0, b1 = w * n, w2 = b1 + w, b2 = w2 + w * w, w3 = b2 + w,
                      b3 = w3 + w;

    std::vector<double> d2(w);  // dLoss/d(pre-activation of layer 2)
    for (std::size_t j = 0; j < w; ++j) {
      double dh2 = dz * theta_[w3 + j];
      d2[j] = dh2 * (1.0 - h2[j] * h2[j]);
      grad[w3 + j] = dz * h2[j];
      grad[b2 + j] = d2[j];
    }
    grad[b3] = dz;

    std::vector<double> d1(w, 0.0);
    for (std::size_t j = 0; j < w; ++j) {
      double dj = d2[j];
      const std::size_t row = w2 + j * w;
      for (std::size_t i = 0; i < w; ++i) {
        grad[row + i] = dj * h1[i];
        d1[i] += dj * theta_[row + i];
      }
    }
    for (std::size_t i = 0; i < w; ++i) {
      double di = d1[i] * (1.0 - h1[i] * h1[i]);
      grad[b1 + i] = di;
      const std::size_t row = w1 + i * n;
      for (std::size_t k = 0; k < n; ++k) grad[row + k] = di * x[k];
    }
  }

  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
  static double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }

 private:
  double forward(const std::vector<double>& x, std::vector<double>& h1,
                 std::vector<double>& h2) const {
    if (static_cast<int>(x.size()) != n_in_) throw std::invalid_argument("input size mismatch");
    const std::size_t w = static_cast<std::size_t>(width_), n = static_cast<std::size_t>(n_in_);
    const std::size_t w1 = 0, b1 = w * n, w2 = b1 + w, b2 = w2 + w * w, w3 = b2 + w,
                      b3 = w3 + w;
    h1.assign(w, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
      double acc = theta_[b1 + i];
      const std::size_t row = w1 + i * n;
      for (std::size_t k = 0; k < n; ++k) acc += theta_[row + k] * x[k];
      h1[i] = std::tanh(acc);
    }
    h2.assign(w, 0.0);
    for (std::size_t j = 0; j < w; ++j) {
      double acc = theta_[b2 + j];
      const std::size_t row = w2 + j * w;
      for (std::size_t i = 0; i < w; ++i) acc += theta_[row + i] * h1[i];
      h2[j] = std::tanh(acc);
    }
    double z = theta_[b3];
    for (std::size_t j = 0; j < w; ++j) z += theta_[w3 + j] * h2[j];
    return z;
  }

  int n_in_;
  int width_;
  std::vector<double> theta_;
};

struct TrainConfig {
  int width = 256;
  double lr = 0.1;
  int epochs = 400;          // minibatch mode
  int batch = 20;
  double clip = 5.0;         // per-example gradient coordinates clamp to [-clip, clip]
  std::uint64_t seed = 1;
  enum class Mode { minibatch, coordinate } mode = Mode::minibatch;
  int coordinate_steps = 0;  // coordinate mode: number of single-coordinate updates
};

struct TrainReport {
  std::vector<double> loss_curve;       // mean train loss per epoch (or per 1000 steps)
  std::vector<double> accuracy_curve;   // train accuracy alongside loss_curve
  double final_train_accuracy = 0.0;
  long updates = 0;                     // parameter update steps performed
};

inline double mlp_accuracy(const MlpModel& model, const LabeledDataset& data) {
  if (data.samples.empty()) throw std::invalid_argument("empty dataset");
  long hit = 0;
  for (const auto& s : data.samples) hit += model.predict(s.input) == s.label;
  return static_cast<double>(hit) / static_cast<double>(data.samples.size());
}

namespace detail {

inline double clamp_to(double v, double limit) {
  if (v > limit) return limit;
  if (v < -limit) return -limit;
  return v;
}

}  // namespace detail

// Mini-batch SGD over the whole parameter vector. Per-example gradients are clipped
// coordinatewise before averaging; batches are fresh shuffles each epoch.
inline TrainReport train_minibatch(MlpModel& model, const LabeledDataset& data,
                                   const TrainConfig& cfg) {
  if (cfg.batch < 1 || cfg.epochs < 1) throw std::domain_error("bad train config");
  TrainReport rep;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::vector<double>> encoded;
  encoded.reserve(data.samples.size());
  for (const auto& s : data.samples) encoded.push_back(MlpModel::encode(s.input));

  std::vector<double> grad, mean(model.param_count());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::fill(mean.begin(), mean.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& s = data.samples[order[i]];
        model.gradient(encoded[order[i]], s.label, grad);
        for (std::size_t p = 0; p < mean.size(); ++p)
          mean[p] += detail::clamp_to(grad[p], cfg.clip);
      }
      double inv = 1.0 / static_cast<double>(stop - start);
      auto& theta = model.params();
      for (std::size_t p = 0; p < mean.size(); ++p) theta[p] -= cfg.lr * inv * mean[p];
      ++rep.updates;
    }
    double loss_sum = 0.0;
    long hit = 0;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      loss_sum += model.loss(encoded[i], data.samples[i].label);
      int pred = model.logit(encoded[i]) > 0.0 ? 1 : 0;
      hit += pred == data.samples[i].label;
    }
    rep.loss_curve.push_back(loss_sum / static_cast<double>(data.samples.size()));
    rep.accuracy_curve.push_back(static_cast<double>(hit) /
                                 static_cast<double>(data.samples.size()));
  }
  rep.final_train_accuracy = rep.accuracy_curve.empty() ? 0.0 : rep.accuracy_curve.back();
  return rep;
}

// One clipped coordinate update: the batch-mean clipped gradient of coordinate j,
// applied to coordinate j only. The coordinate choice must not depend on the batch.
inline void coordinate_sgd_step(MlpModel& model, const LabeledDataset& data,
                                const std::vector<std::size_t>& batch_indices, std::size_t j,
                                double lr, double clip) {
  if (j >= model.param_count()) throw std::domain_error("coordinate outside parameter vector");
  if (batch_indices.empty()) throw std::domain_error("empty batch");
  std::vector<double> grad;
  double acc = 0.0;
  for (std::size_t idx : batch_indices) {
    const auto& s = data.samples.at(idx);
    model.gradient(MlpModel::encode(s.input), s.label, grad);
    acc += detail::clamp_to(grad[j], clip);
  }
  model.params()[j] -= lr * acc / static_cast<double>(batch_indices.size());
}

// Coordinate mode: coordinates cycle round-robin, one fresh batch per step.
inline TrainReport train_coordinate(MlpModel& model, const LabeledDataset& data,
                                    const TrainConfig& cfg) {
  if (cfg.coordinate_steps < 1 || cfg.batch < 1) throw std::domain_error("bad train config");
  TrainReport rep;
  Rng rng(cfg.seed);
  std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch));
  const std::size_t p = model.param_count();
  for (int t = 0; t < cfg.coordinate_steps; ++t) {
    std::size_t j = static_cast<std::size_t>(t) % p;  // fixed before the batch is drawn
    for (auto& b : batch) b = rng.below(data.samples.size());
    coordinate_sgd_step(model, data, batch, j, cfg.lr, cfg.clip);
    ++rep.updates;
    if ((t + 1) % 1000 == 0 || t + 1 == cfg.coordinate_steps) {
      double loss_sum = 0.0;
      for (const auto& s : data.samples) loss_sum += model.loss(MlpModel::encode(s.input), s.label);
      rep.loss_curve.push_back(loss_sum / static_cast<double>(data.samples.size()));
      rep.accuracy_curve.push_back(mlp_accuracy(model, data));
    }
  }
  rep.final_train_accuracy = rep.accuracy_curve.empty() ? mlp_accuracy(model, data)
                                                        : rep.accuracy_curve.back();
  return rep;
}

inline TrainReport train(MlpModel& model, const LabeledDataset& data, const TrainConfig& cfg) {
  return cfg.mode == TrainConfig::Mode::minibatch ? train_minibatch(model, data, cfg)
                                                  : train_coordinate(model, data, cfg);
}

// Largest relative gap between analytic and central-difference derivatives over a
// random sample of coordinates.
inline double numeric_gradient_check(MlpModel& model, const LabeledSample& sample, int probes,
                                     std::uint64_t seed, double h = 1e-5) {
  if (probes < 1) throw std::domain_error("probes must be positive");
  auto x = MlpModel::encode(sample.input);
  std::vector<double> grad;
  model.gradient(x, sample.label, grad);
  Rng rng(seed);
  double worst = 0.0;
  auto& theta = model.params();
  for (int k = 0; k < probes; ++k) {
    std::size_t j = rng.below(theta.size());
    double keep = theta[j];
    theta[j] = keep + h;
    double up = model.loss(x, sample.label);
    theta[j] = keep - h;
    double down = model.loss(x, sample.label);
    theta[j] = keep;
    double numeric = (up - down) / (2.0 * h);
    double denom = std::max({std::fabs(numeric), std::fabs(grad[j]), 1e-8});
    worst = std::max(worst, std::fabs(numeric - grad[j]) / denom);
  }
  return worst;
}

}  // namespace proglearn
