#pragma once

// Hazard Index scorer: a logistic model over scene occupancy vectors. The
// score is the probability that a scene belongs to the "dangerous" class.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "streetrisk/error.hpp"
#include "streetrisk/pairs.hpp"
#include "streetrisk/types.hpp"

namespace streetrisk::hazard {

// Why `v` is not a valid occupancy vector, or nullopt if it is.
inline std::optional<std::string> occupancy_problem(std::span<const double> v) {
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return "occupancy entry " + std::to_string(i) + " is not finite";
    if (v[i] < 0.0 || v[i] > 1.0) {
      return "occupancy entry " + std::to_string(i) + " outside [0,1]";
    }
    sum += v[i];
  }
  if (sum > 1.0 + 1e-6) return "occupancy entries sum to more than 1";
  return std::nullopt;
}

inline void validate_occupancy(std::span<const double> v) {
  if (auto problem = occupancy_problem(v)) throw input_error(*problem);
}

struct HazardScore {
  double value = 0.5;

  // Ties at exactly 0.5 resolve to dangerous.
  bool dangerous() const { return value >= 0.5; }
};

struct TrainingMetadata {
  int epochs = 0;                 // epochs actually completed
  double learning_rate = 0.0;     // initial step size
  double final_learning_rate = 0.0;
  double l2 = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int halvings = 0;
  bool stalled = false;           // stopped early: no step decreased the loss
  std::size_t samples = 0;
};

struct HazardModel {
  AccidentKind kind = AccidentKind::pedestrian;
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  double bias = 0.0;
  TrainingMetadata metadata;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double logit(const HazardModel& model, std::span<const double> features) {
  if (features.size() != model.weights.size()) {
    throw input_error("feature dimension " + std::to_string(features.size()) +
                      " does not match model dimension " + std::to_string(model.weights.size()));
  }
  double z = model.bias;
  for (std::size_t i = 0; i < features.size(); ++i) z += model.weights[i] * features[i];
  return z;
}

inline HazardScore predict(const HazardModel& model, std::span<const double> features) {
  return HazardScore{sigmoid(logit(model, features))};
}

struct TrainingSample {
  std::vector<double> features;
  bool dangerous = false;
};

struct TrainingOptions {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  int max_halvings = 30;
  unsigned threads = 1;
};

struct LossGradient {
  double loss = 0.0;  // mean cross-entropy plus (l2/2)|w|^2
  double bias_grad = 0.0;
  std::vector<double> weight_grad;
};

namespace detail {

// Sums per-sample [loss, dbias, dw...] over [lo, hi) with a midpoint-split
// pairwise tree. The tree depends only on the range, so the result is the
// same for any thread count, and a dataset concatenated with itself sums to
// exactly twice the original.
class PairwiseReducer {
 public:
  PairwiseReducer(std::span<const TrainingSample> samples, std::span<const double> weights,
                  double bias)
      : samples_(samples), weights_(weights), bias_(bias) {}

  void reduce(std::size_t lo, std::size_t hi, std::span<double> out, unsigned threads) const {
    std::vector<std::vector<double>> scratch(kMaxDepth);
    reduce_impl(lo, hi, out, threads, scratch, 0);
  }

 private:
  static constexpr std::size_t kMaxDepth = 64;

  void leaf(std::size_t i, std::span<double> out) const {
    const auto& s = samples_[i];
    double z = bias_;
    for (std::size_t j = 0; j < weights_.size(); ++j) z += weights_[j] * s.features[j];
    const double y = s.dangerous ? 1.0 : 0.0;
    const double g = sigmoid(z) - y;
    out[0] = softplus(z) - y * z;
    out[1] = g;
    for (std::size_t j = 0; j < weights_.size(); ++j) out[2 + j] = g * s.features[j];
  }

  void reduce_impl(std::size_t lo, std::size_t hi, std::span<double> out, unsigned threads,
                   std::vector<std::vector<double>>& scratch, std::size_t depth) const {
    if (hi - lo == 1) {
      leaf(lo, out);
      return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    auto& right = scratch[depth];
    right.assign(out.size(), 0.0);
    if (threads > 1) {
      std::vector<double> right_local(out.size(), 0.0);
      std::thread worker([&] {
        std::vector<std::vector<double>> worker_scratch(kMaxDepth);
        reduce_impl(mid, hi, right_local, threads - threads / 2, worker_scratch, 0);
      });
      reduce_impl(lo, mid, out, threads / 2, scratch, depth + 1);
      worker.join();
      right = std::move(right_local);
    } else {
      reduce_impl(lo, mid, out, 1, scratch, depth + 1);
      reduce_impl(mid, hi, right, 1, scratch, depth + 1);
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += right[k];
  }

  std::span<const TrainingSample> samples_;
  std::span<const double> weights_;
  double bias_;
};

}  // namespace detail

inline LossGradient loss_and_gradient(std::span<const TrainingSample> samples,
                                      std::span<const double> weights, double bias, double l2,
                                      unsigned threads = 1) {
  if (samples.empty()) throw input_error("loss_and_gradient: no samples");
  for (const auto& s : samples) {
    if (s.features.size() != weights.size()) throw input_error("sample feature dimension mismatch");
  }
  std::vector<double> sums(weights.size() + 2, 0.0);
  detail::PairwiseReducer(samples, weights, bias).reduce(0, samples.size(), sums, threads);
  const auto n = static_cast<double>(samples.size());
  LossGradient out;
  double penalty = 0.0;
  for (double w : weights) penalty += w * w;
  out.loss = sums[0] / n + 0.5 * l2 * penalty;
  out.bias_grad = sums[1] / n;
  out.weight_grad.resize(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    out.weight_grad[j] = sums[2 + j] / n + l2 * weights[j];
  }
  return out;
}

// Full-batch gradient descent from zero parameters. An epoch whose step would
// increase the loss is retried with half the learning rate; the reduced rate
// carries over to later epochs. After max_halvings failed retries in one epoch
// training stops with metadata.stalled set.
inline HazardModel train(std::span<const TrainingSample> samples, AccidentKind kind,
                         std::vector<std::string> feature_names, const TrainingOptions& opts = {},
                         std::vector<double>* loss_history = nullptr) {
  if (samples.empty()) throw input_error("train: no samples");
  if (!(opts.learning_rate > 0.0) || opts.epochs < 0 || !(opts.l2 >= 0.0)) {
    throw input_error("train: invalid hyperparameters");
  }
  const std::size_t dim = samples.front().features.size();
  std::size_t positives = 0;
  for (const auto& s : samples) {
    if (s.features.size() != dim) throw input_error("train: inconsistent feature dimension");
    for (double x : s.features) {
      if (!std::isfinite(x)) throw input_error("train: non-finite feature");
    }
    positives += s.dangerous ? 1 : 0;
  }
  if (positives == 0 || positives == samples.size()) {
    throw input_error("train: need at least one dangerous and one safe sample");
  }
  if (!feature_names.empty() && feature_names.size() != dim) {
    throw input_error("train: feature name count does not match dimension");
  }

  HazardModel model;
  model.kind = kind;
  model.feature_names = std::move(feature_names);
  model.weights.assign(dim, 0.0);
  model.bias = 0.0;

  double lr = opts.learning_rate;
  auto current = loss_and_gradient(samples, model.weights, model.bias, opts.l2, opts.threads);
  if (!std::isfinite(current.loss)) throw computation_error("train: non-finite initial loss");
  TrainingMetadata meta;
  meta.learning_rate = opts.learning_rate;
  meta.l2 = opts.l2;
  meta.initial_loss = current.loss;
  meta.samples = samples.size();
  if (loss_history) loss_history->assign(1, current.loss);

  std::vector<double> candidate(dim);
  for (int epoch = 0; epoch < opts.epochs && !meta.stalled; ++epoch) {
    int retries = 0;
    while (true) {
      for (std::size_t j = 0; j < dim; ++j) {
        candidate[j] = model.weights[j] - lr * current.weight_grad[j];
      }
      const double candidate_bias = model.bias - lr * current.bias_grad;
      auto next = loss_and_gradient(samples, candidate, candidate_bias, opts.l2, opts.threads);
      if (!std::isfinite(next.loss)) throw computation_error("train: non-finite loss");
      if (next.loss <= current.loss) {
        model.weights = candidate;
        model.bias = candidate_bias;
        current = std::move(next);
        ++meta.epochs;
        if (loss_history) loss_history->push_back(current.loss);
        break;
      }
      if (retries == opts.max_halvings) {
        meta.stalled = true;
        break;
      }
      lr /= 2.0;
      ++retries;
      ++meta.halvings;
    }
  }
  meta.final_learning_rate = lr;
  meta.final_loss = current.loss;
  for (double w : model.weights) {
    if (!std::isfinite(w)) throw computation_error("train: non-finite weight");
  }
  model.metadata = meta;
  return model;
}

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  double accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
  }
};

inline Confusion tally(bool predicted_dangerous, bool actual_dangerous, Confusion c = {}) {
  if (predicted_dangerous && actual_dangerous) ++c.tp;
  if (predicted_dangerous && !actual_dangerous) ++c.fp;
  if (!predicted_dangerous && !actual_dangerous) ++c.tn;
  if (!predicted_dangerous && actual_dangerous) ++c.fn;
  return c;
}

inline Confusion evaluate(const HazardModel& model, std::span<const TrainingSample> samples) {
  Confusion c;
  for (const auto& s : samples) c = tally(predict(model, s.features).dangerous(), s.dangerous, c);
  return c;
}

// One trained model per accident kind.
struct ModelSet {
  std::optional<HazardModel> pedestrian;
  std::optional<HazardModel> vehicle;

  const HazardModel& at(AccidentKind kind) const {
    const auto& m = kind == AccidentKind::pedestrian ? pedestrian : vehicle;
    if (!m) throw input_error("no hazard model for kind " + to_string(kind));
    return *m;
  }
  void set(HazardModel m) {
    (m.kind == AccidentKind::pedestrian ? pedestrian : vehicle) = std::move(m);
  }
};

// Pairs whose thresholded prediction matches the empirical label (at least
// one accident) in both periods.
inline std::vector<LocationPair> restrict_pairs(std::span<const LocationPair> pairs,
                                                const ModelSet& models) {
  std::vector<LocationPair> kept;
  for (const auto& p : pairs) {
    const auto& model = models.at(p.kind);
    const bool ok1 = predict(model, p.v1).dangerous() == (p.n1 >= 1);
    const bool ok2 = predict(model, p.v2).dangerous() == (p.n2 >= 1);
    if (ok1 && ok2) kept.push_back(p);
  }
  return kept;
}

inline nlohmann::json to_json(const HazardModel& m) {
  const auto& md = m.metadata;
  return {{"kind", to_string(m.kind)},
          {"feature_names", m.feature_names},
          {"weights", m.weights},
          {"bias", m.bias},
          {"metadata",
           {{"epochs", md.epochs},
            {"learning_rate", md.learning_rate},
            {"final_learning_rate", md.final_learning_rate},
            {"l2", md.l2},
            {"initial_loss", md.initial_loss},
            {"final_loss", md.final_loss},
            {"halvings", md.halvings},
            {"stalled", md.stalled},
            {"samples", md.samples}}}};
}

inline HazardModel model_from_json(const nlohmann::json& j) {
  try {
    HazardModel m;
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    if (!m.feature_names.empty() && m.feature_names.size() != m.weights.size()) {
      throw input_error("model: feature_names and weights differ in length");
    }
    for (double w : m.weights) {
      if (!std::isfinite(w)) throw input_error("model: non-finite weight");
    }
    if (!std::isfinite(m.bias)) throw input_error("model: non-finite bias");
    if (j.contains("metadata")) {
      const auto& md = j.at("metadata");
      m.metadata.epochs = md.value("epochs", 0);
      m.metadata.learning_rate = md.value("learning_rate", 0.0);
      m.metadata.final_learning_rate = md.value("final_learning_rate", 0.0);
      m.metadata.l2 = md.value("l2", 0.0);
      m.metadata.initial_loss = md.value("initial_loss", 0.0);
      m.metadata.final_loss = md.value("final_loss", 0.0);
      m.metadata.halvings = md.value("halvings", 0);
      m.metadata.stalled = md.value("stalled", false);
      m.metadata.samples = md.value("samples", std::size_t{0});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("malformed model JSON: ") + e.what());
  }
}

inline void save_model(const HazardModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  out << to_json(m).dump(2) << '\n';
}

inline HazardModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open model " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(path + ": " + e.what());
  }
  return model_from_json(j);
}

// Rejects inputs whose feature columns differ from the ones the model was
// trained on.
inline void check_feature_columns(const HazardModel& m, const std::vector<std::string>& columns) {
  if (!m.feature_names.empty() && m.feature_names != columns) {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
      return s;
    };
    throw input_error("feature columns [" + join(columns) + "] do not match the columns the " +
                      to_string(m.kind) + " model was trained on [" + join(m.feature_names) + "]");
  }
  if (columns.size() != m.weights.size()) {
    throw input_error("feature column count does not match the " + to_string(m.kind) + " model");
  }
}

}  // namespace streetrisk::hazard
