#include "spend/nnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "spend/config.hpp"
#include "spend/parallel.hpp"

namespace spend::nnet {

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (!(learning_rate > 0)) throw Error("learning_rate must be positive");
  if (!(validation_fraction > 0 && validation_fraction < 1)) {
    throw Error("validation_fraction must lie in (0, 1)");
  }
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0)) {
    throw Error("invalid optimizer constants");
  }
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  config::check_keys(j,
                     {"version", "epochs", "batch_size", "learning_rate", "beta1", "beta2",
                      "epsilon", "validation_fraction", "augment", "normalize", "seed", "model"},
                     "train config");
  if (j.contains("version")) config::check_version(j, 1, "train config");
  TrainConfig tc;
  tc.epochs = config::get_or(j, "epochs", tc.epochs);
  tc.batch_size = config::get_or(j, "batch_size", tc.batch_size);
  tc.learning_rate = config::get_or(j, "learning_rate", tc.learning_rate);
  tc.beta1 = config::get_or(j, "beta1", tc.beta1);
  tc.beta2 = config::get_or(j, "beta2", tc.beta2);
  tc.epsilon = config::get_or(j, "epsilon", tc.epsilon);
  tc.validation_fraction = config::get_or(j, "validation_fraction", tc.validation_fraction);
  tc.augment = config::get_or(j, "augment", tc.augment);
  tc.normalize = config::get_or(j, "normalize", tc.normalize);
  tc.seed = config::get_or<std::uint64_t>(j, "seed", tc.seed);
  tc.validate();
  return tc;
}

nlohmann::json train_config_to_json(const TrainConfig& tc) {
  return {{"epochs", tc.epochs},
          {"batch_size", tc.batch_size},
          {"learning_rate", tc.learning_rate},
          {"beta1", tc.beta1},
          {"beta2", tc.beta2},
          {"epsilon", tc.epsilon},
          {"validation_fraction", tc.validation_fraction},
          {"augment", tc.augment},
          {"normalize", tc.normalize},
          {"seed", tc.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  config::check_keys(j, {"depth", "base_channels", "kernel", "activation", "skip_connections", "seed"},
                     "model config");
  ModelConfig mc;
  mc.depth = config::get_or(j, "depth", mc.depth);
  mc.base_channels = config::get_or(j, "base_channels", mc.base_channels);
  mc.kernel = config::get_or(j, "kernel", mc.kernel);
  mc.skip_connections = config::get_or(j, "skip_connections", mc.skip_connections);
  mc.seed = config::get_or<std::uint64_t>(j, "seed", mc.seed);
  if (j.contains("activation") && j.at("activation") != "relu") {
    throw Error("model config: only activation \"relu\" is supported");
  }
  mc.validate();
  return mc;
}

nlohmann::json model_config_to_json(const ModelConfig& mc) {
  return {{"depth", mc.depth},
          {"base_channels", mc.base_channels},
          {"kernel", mc.kernel},
          {"activation", "relu"},
          {"skip_connections", mc.skip_connections},
          {"seed", mc.seed}};
}

std::size_t validation_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
}

namespace {

struct Adam {
  std::vector<double> m, v;
  long step = 0;

  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void update(std::vector<float>& p, const std::vector<float>& g, const TrainConfig& tc) {
    ++step;
    const double c1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      m[i] = tc.beta1 * m[i] + (1 - tc.beta1) * gi;
      v[i] = tc.beta2 * v[i] + (1 - tc.beta2) * gi * gi;
      const double mh = m[i] / c1, vh = v[i] / c2;
      p[i] = static_cast<float>(p[i] - tc.learning_rate * mh / (std::sqrt(vh) + tc.epsilon));
    }
  }
};

}  // namespace

DenoiserModel train(DenoiserModel model, const FramePairs& pairs, const TrainConfig& tc,
                    const EpochCallback& on_epoch) {
  tc.validate();
  if (pairs.input.size() != pairs.target.size()) throw Error("train: input/target counts differ");
  const FramePairs frames = tc.augment ? augment(pairs) : pairs;
  const std::size_t n = frames.input.size();
  const std::size_t n_val = validation_count(n, tc.validation_fraction);
  const std::size_t n_train = n - n_val;
  if (n_train < static_cast<std::size_t>(tc.batch_size)) {
    throw Error("train: " + std::to_string(n_train) + " training frames for batch size " +
                std::to_string(tc.batch_size));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive_seed(tc.seed, 0));
  std::shuffle(order.begin(), order.end(), split_rng);

  double scale = 1.0;
  if (tc.normalize) {
    double ss = 0;
    std::size_t count = 0;
    for (const auto& f : frames.input) {
      for (float v : f.data()) ss += static_cast<double>(v) * v;
      count += f.size();
    }
    const double rms = std::sqrt(ss / static_cast<double>(count));
    if (rms > 0 && std::isfinite(rms)) scale = rms;
  }
  model.input_scale = static_cast<float>(scale);

  const std::size_t unit = std::size_t{1} << model.config.depth;
  auto prepare = [&](const Image& im) {
    Tensor<float> t = to_tensor<float>(pad_to_multiple(im, unit));
    for (float& v : t.v) v = static_cast<float>(v / scale);
    return t;
  };
  std::vector<Tensor<float>> tr_in, tr_tg, va_in, va_tg;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t f = order[i];
    auto& in = i < n_train ? tr_in : va_in;
    auto& tg = i < n_train ? tr_tg : va_tg;
    in.push_back(prepare(frames.input[f]));
    tg.push_back(prepare(frames.target[f]));
  }

  Adam adam(model.params.size());
  std::vector<float> best = model.params;
  double best_loss = std::numeric_limits<double>::infinity();
  model.history.clear();
  model.diverged = false;
  std::vector<std::size_t> idx(n_train);
  std::iota(idx.begin(), idx.end(), 0);
  const auto bs = static_cast<std::size_t>(tc.batch_size);

  for (int epoch = 1; epoch <= tc.epochs && !model.diverged; ++epoch) {
    std::mt19937_64 rng(derive_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(idx.begin(), idx.end(), rng);
    double loss_sum = 0;
    for (std::size_t b0 = 0; b0 < n_train; b0 += bs) {
      const std::size_t b1 = std::min(n_train, b0 + bs);
      std::vector<Tensor<float>> bi, bt;
      for (std::size_t k = b0; k < b1; ++k) {
        bi.push_back(tr_in[idx[k]]);
        bt.push_back(tr_tg[idx[k]]);
      }
      LossGrad<float> lg;
      try {
        lg = loss_and_grad<float>(model.graph, model.params, bi, bt);
      } catch (const Error&) {
        model.diverged = true;
        break;
      }
      if (!std::isfinite(lg.loss)) {
        model.diverged = true;
        break;
      }
      loss_sum += lg.loss * static_cast<double>(b1 - b0);
      adam.update(model.params, lg.grad, tc);
    }
    if (model.diverged) break;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_train);
    rec.val_loss = n_val ? batch_loss(model.graph, model.params, va_in, va_tg) : rec.train_loss;
    if (!std::isfinite(rec.val_loss)) {
      model.diverged = true;
      break;
    }
    model.history.push_back(rec);
    if (rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      best = model.params;
    }
    if (on_epoch) on_epoch(rec);
  }
  model.params = std::move(best);
  return model;
}

DenoiserModel train(DenoiserModel model, const permute::PairSet& pairs, const TrainConfig& tc,
                    const EpochCallback& on_epoch) {
  model.axis = pairs.axis;
  return train(std::move(model), frame_pairs(pairs), tc, on_epoch);
}

}  // namespace spend::nnet
