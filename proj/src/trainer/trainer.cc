// Copyright 2026 The promptse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "promptse/trainer/trainer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <utility>

#include "fmt/format.h"
#include "json.hpp"
#include "promptse/error.h"
#include "promptse/model/checkpoint.h"
#include "promptse/model/network.h"
#include "promptse/numerics/random.h"
#include "promptse/objectives/objectives.h"
#include "promptse/scenesim/corpus.h"

namespace promptse {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kAdamM[] = "adam.m/";
constexpr char kAdamV[] = "adam.v/";
constexpr char kBest[] = "best/";

bool StartsWith(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

KeyValues WithPrefix(const KeyValues& items, const std::string& prefix) {
  KeyValues out;
  for (const auto& [k, v] : items) {
    if (StartsWith(k, prefix)) out.emplace(k, v);
  }
  return out;
}

const std::string& Need(const KeyValues& header, const std::string& key) {
  const auto it = header.find(key);
  if (it == header.end()) throw DataError("checkpoint header lacks " + key);
  return it->second;
}

Tensor<float> RefChannel(const Tensor<float>& mixture, int64_t channel) {
  const int64_t n = mixture.dim(1);
  Tensor<float> out({n});
  std::copy(mixture.data() + channel * n, mixture.data() + (channel + 1) * n, out.data());
  return out;
}

void CheckPairs(const std::vector<TrainingPair>& pairs, const ModelConfig& model,
                const char* what) {
  for (const auto& p : pairs) {
    if (p.mixture.rank() != 2 || p.mixture.dim(0) != model.channels) {
      throw ConfigError(fmt::format("{} pair {} has mixture shape {}, the model expects {} channels",
                                    what, p.id, ShapeString(p.mixture.shape()), model.channels));
    }
  }
}

int64_t CountPolarity(const std::vector<TrainingPair>& pairs, Polarity polarity) {
  return std::count_if(pairs.begin(), pairs.end(),
                       [&](const TrainingPair& p) { return p.polarity == polarity; });
}

std::string DescribeNonFinite(const ParamMap& grads) {
  std::string names;
  for (const auto& [name, g] : grads) {
    if (!AllFinite(g)) names += (names.empty() ? "" : ", ") + name;
  }
  return names.empty() ? "(loss only)" : names;
}

}  // namespace

void SaveModel(const std::string& path, const ModelBundle& bundle,
               const KeyValues& extra_header) {
  Checkpoint ck;
  ck.header = extra_header;
  for (const auto& [k, v] : bundle.model.Items()) ck.header[k] = v;
  for (const auto& [k, v] : bundle.stft.Items()) ck.header[k] = v;
  ck.tensors = bundle.params;
  SaveCheckpoint(path, ck);
}

namespace {

ModelBundle BundleFromCheckpoint(const Checkpoint& ck, const std::string& path) {
  ModelBundle b;
  try {
    b.model = ModelConfig::FromItems(WithPrefix(ck.header, "model."));
    for (const char* key : {"stft.sample_rate", "stft.window_length", "stft.hop_length"}) {
      b.stft.Set(key, Need(ck.header, key));
    }
    b.stft.Validate();
  } catch (const ConfigError& e) {
    throw DataError(path + ": bad checkpoint header: " + e.what());
  }
  for (const auto& [name, t] : ck.tensors) {
    if (name.find('/') == std::string::npos) b.params.emplace(name, t);
  }
  try {
    ValidateParams(b.params, b.model, b.stft);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
  return b;
}

}  // namespace

ModelBundle LoadModel(const std::string& path) {
  return BundleFromCheckpoint(LoadCheckpoint(path), path);
}

std::vector<TrainingPair> LoadSplit(const std::string& manifest_path, int sample_rate) {
  const std::string base = fs::path(manifest_path).parent_path().string();
  std::vector<TrainingPair> out;
  for (const auto& r : ReadManifest(manifest_path)) out.push_back(LoadPair(r, base, sample_rate));
  return out;
}

std::vector<UtteranceMetrics> Evaluate(const ModelBundle& bundle,
                                       const std::vector<TrainingPair>& pairs, bool oracle) {
  CheckPairs(pairs, bundle.model, "evaluation");
  std::vector<UtteranceMetrics> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Tensor<float> mix_ref = RefChannel(p.mixture, bundle.model.ref_channel);
    const Tensor<float> est =
        oracle ? p.target
               : model::ExtractWaveform(bundle.params, bundle.model, bundle.stft, p.mixture,
                                        p.enrollment);
    out.push_back(ScoreUtterance(p.id, est, p.target, mix_ref));
  }
  return out;
}

ValidationResult Validate(const ModelBundle& bundle, const std::vector<TrainingPair>& pairs) {
  const MetricSummary s = Summarize(Evaluate(bundle, pairs));
  ValidationResult r;
  r.positives = s.positive.count;
  r.negatives = s.negative.count;
  if (r.positives > 0) r.si_sdri = s.positive.si_sdri;
  if (r.negatives > 0) r.esr = s.negative.esr;
  return r;
}

PairGradient ComputePairGradient(const ModelBundle& bundle, const TrainingPair& pair,
                                 const LossConfig& loss) {
  if (loss.kind == LossKind::kSiSdr && pair.polarity == Polarity::kNegative) {
    throw Error("negative pair " + pair.id + " reached the SI-SDR loss");
  }
  Tape<float> tape;
  BoundParams<float> p(tape, bundle.params, /*trainable=*/true);
  const model::ExtractOutput<float> out =
      model::Extract(p, bundle.model, bundle.stft, pair.mixture, pair.enrollment);
  const Var<float> value = ops::Loss(out.waveform, pair.target,
                                     RefChannel(pair.mixture, bundle.model.ref_channel), loss);
  tape.Backward(value);
  PairGradient g;
  g.loss = value.value()[0];
  for (const auto& [name, v] : p.vars()) g.grads.emplace(name, tape.Grad(v));
  return g;
}

TrainState InitTrainState(const ModelConfig& model, const StftConfig& stft,
                          const TrainConfig& train) {
  TrainState s;
  s.params = InitParams(model, stft, train.seed);
  s.adam = InitAdam(s.params);
  s.lr = train.lr0;
  return s;
}

void SaveTrainState(const std::string& path, const ModelConfig& model,
                    const StftConfig& stft, const TrainConfig& train,
                    const TrainState& state) {
  Checkpoint ck;
  for (const auto& [k, v] : model.Items()) ck.header[k] = v;
  for (const auto& [k, v] : stft.Items()) ck.header[k] = v;
  for (const auto& [k, v] : train.Items()) ck.header[k] = v;
  ck.header["state.lr"] = FormatDouble(state.lr);
  ck.header["state.epoch"] = std::to_string(state.epoch);
  ck.header["state.step_in_epoch"] = std::to_string(state.step_in_epoch);
  ck.header["state.global_step"] = std::to_string(state.global_step);
  ck.header["state.validated"] = state.validated ? "true" : "false";
  ck.header["state.best_val"] = state.best_val ? FormatDouble(*state.best_val) : "none";
  ck.header["state.stagnant"] = std::to_string(state.stagnant);
  ck.header["state.nonfinite_streak"] = std::to_string(state.nonfinite_streak);
  ck.header["state.adam_step"] = std::to_string(state.adam.step);
  ck.tensors = state.params;
  for (const auto& [n, t] : state.adam.m) ck.tensors[kAdamM + n] = t;
  for (const auto& [n, t] : state.adam.v) ck.tensors[kAdamV + n] = t;
  for (const auto& [n, t] : state.best_params) ck.tensors[kBest + n] = t;
  SaveCheckpoint(path, ck);
}

LoadedTrainState LoadTrainState(const std::string& path) {
  const Checkpoint ck = LoadCheckpoint(path);
  const ModelBundle bundle = BundleFromCheckpoint(ck, path);
  LoadedTrainState out;
  out.model = bundle.model;
  out.stft = bundle.stft;
  TrainState& s = out.state;
  try {
    for (const auto& [k, v] : ck.header) {
      if (StartsWith(k, "train.") || StartsWith(k, "loss.")) out.train.Set(k, v);
    }
    out.train.Validate();
    const KeyValues& h = ck.header;
    s.lr = ParseDouble("state.lr", Need(h, "state.lr"));
    s.epoch = ParseInt("state.epoch", Need(h, "state.epoch"));
    s.step_in_epoch = ParseInt("state.step_in_epoch", Need(h, "state.step_in_epoch"));
    s.global_step = ParseInt("state.global_step", Need(h, "state.global_step"));
    s.validated = ParseBool("state.validated", Need(h, "state.validated"));
    const std::string& best = Need(h, "state.best_val");
    if (best != "none") s.best_val = ParseDouble("state.best_val", best);
    s.stagnant = ParseInt("state.stagnant", Need(h, "state.stagnant"));
    s.nonfinite_streak = ParseInt("state.nonfinite_streak", Need(h, "state.nonfinite_streak"));
    s.adam.step = ParseInt("state.adam_step", Need(h, "state.adam_step"));
  } catch (const ConfigError& e) {
    throw DataError(path + ": bad training state: " + e.what());
  }
  s.params = bundle.params;
  for (const auto& [name, t] : ck.tensors) {
    if (StartsWith(name, kAdamM)) s.adam.m.emplace(name.substr(sizeof(kAdamM) - 1), t);
    if (StartsWith(name, kAdamV)) s.adam.v.emplace(name.substr(sizeof(kAdamV) - 1), t);
    if (StartsWith(name, kBest)) s.best_params.emplace(name.substr(sizeof(kBest) - 1), t);
  }
  for (const auto& [name, t] : s.params) {
    const bool ok = s.adam.m.count(name) && s.adam.v.count(name) &&
                    s.adam.m.at(name).shape() == t.shape() &&
                    s.adam.v.at(name).shape() == t.shape();
    if (!ok) throw DataError(path + ": missing or misshapen Adam moments for " + name);
  }
  if (s.adam.m.size() != s.params.size() || s.adam.v.size() != s.params.size()) {
    throw DataError(path + ": Adam moments name unknown parameters");
  }
  if (!s.best_params.empty()) {
    try {
      ValidateParams(s.best_params, out.model, out.stft);
    } catch (const DataError& e) {
      throw DataError(path + ": best parameters: " + e.what());
    }
  }
  return out;
}

std::string FormatTrainLogRecord(const TrainLogRecord& r) {
  auto opt = [](const std::optional<double>& v) {
    return v && std::isfinite(*v) ? json(*v) : json(nullptr);
  };
  json j = {{"epoch", r.epoch},         {"step", r.step},
            {"lr", r.lr},               {"loss", opt(r.loss)},
            {"val_si_sdri", opt(r.val_si_sdri)}, {"val_esr", opt(r.val_esr)}};
  return j.dump();
}

std::vector<int64_t> EpochOrder(const std::vector<TrainingPair>& pairs,
                                const TrainConfig& train, int64_t epoch) {
  std::vector<int64_t> positives, negatives;
  for (int64_t i = 0; i < static_cast<int64_t>(pairs.size()); ++i) {
    (pairs[i].polarity == Polarity::kPositive ? positives : negatives).push_back(i);
  }
  const double f = train.effective_neg_fraction();
  const uint64_t epoch_seed = Rng::Mix(train.seed, static_cast<uint64_t>(epoch));
  int64_t k = 0;
  if (f > 0) {
    k = std::min<int64_t>(negatives.size(),
                          std::llround(double(positives.size()) * f / (1.0 - f)));
  }
  Rng pick(Rng::Mix(epoch_seed, 1));
  for (int64_t i = 0; i < k; ++i) {
    const int64_t j = i + static_cast<int64_t>(pick.UniformInt(negatives.size() - i));
    std::swap(negatives[i], negatives[j]);
  }
  std::vector<int64_t> order = positives;
  order.insert(order.end(), negatives.begin(), negatives.begin() + k);
  Rng shuffle(Rng::Mix(epoch_seed, 0));
  for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i) {
    std::swap(order[i], order[shuffle.UniformInt(i + 1)]);
  }
  return order;
}

TrainResult Train(const ModelConfig& model, const StftConfig& stft,
                  const TrainConfig& train, const std::vector<TrainingPair>& train_pairs,
                  const std::vector<TrainingPair>& val_pairs, TrainState state,
                  const TrainOptions& options) {
  model.Validate();
  stft.Validate();
  train.Validate();
  if (train_pairs.empty()) throw ConfigError("training set is empty");
  CheckPairs(train_pairs, model, "training");
  CheckPairs(val_pairs, model, "validation");
  if (CountPolarity(train_pairs, Polarity::kPositive) == 0) {
    throw ConfigError("training set has no positive pairs");
  }
  if (train.effective_neg_fraction() > 0 &&
      CountPolarity(train_pairs, Polarity::kNegative) == 0) {
    throw DataError(fmt::format(
        "train.neg_fraction is {} but the training set has no negative pairs; synthesize "
        "with corpus.neg_fraction > 0 or set train.neg_fraction = 0",
        train.effective_neg_fraction()));
  }
  if (CountPolarity(val_pairs, Polarity::kPositive) == 0) {
    throw DataError("validation set has no positive pairs to select on");
  }
  ValidateParams(state.params, model, stft);

  const bool write = !options.out_dir.empty();
  std::ofstream log_file;
  std::string last_path, best_path;
  if (write) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw DataError("cannot create " + options.out_dir + ": " + ec.message());
    last_path = (fs::path(options.out_dir) / "last.ckpt").string();
    best_path = (fs::path(options.out_dir) / "best.ckpt").string();
    const std::string log_path = (fs::path(options.out_dir) / "train_log.jsonl").string();
    log_file.open(log_path, std::ios::app);
    if (!log_file) throw DataError("cannot open " + log_path);
  }

  TrainResult result;
  auto emit = [&](const TrainLogRecord& r) {
    result.log.push_back(r);
    if (options.on_log) options.on_log(r);
    if (write) log_file << FormatTrainLogRecord(r) << '\n' << std::flush;
  };
  ModelBundle bundle{model, stft, std::move(state.params)};
  auto save = [&](bool best_changed) {
    if (!write) return;
    state.params = bundle.params;
    SaveTrainState(last_path, model, stft, train, state);
    if (best_changed) SaveModel(best_path, {model, stft, state.best_params});
  };
  auto step_limit = [&] { return train.max_steps > 0 && state.global_step >= train.max_steps; };

  if (!state.validated) {
    const ValidationResult v = Validate(bundle, val_pairs);
    state.best_val = v.si_sdri;
    state.best_params = bundle.params;
    state.validated = true;
    emit({state.epoch, state.global_step, state.lr, std::nullopt, v.si_sdri, v.esr});
    save(true);
  }

  while (state.epoch < train.max_epochs && !step_limit()) {
    const int64_t epoch = state.epoch + 1;
    const std::vector<int64_t> order = EpochOrder(train_pairs, train, epoch);
    const int64_t batches = (static_cast<int64_t>(order.size()) + train.batch_size - 1) /
                            train.batch_size;
    const double lr = state.lr;
    double loss_sum = 0;
    int64_t loss_count = 0;
    while (state.step_in_epoch < batches && !step_limit()) {
      const int64_t begin = state.step_in_epoch * train.batch_size;
      const int64_t end = std::min<int64_t>(begin + train.batch_size, order.size());
      ParamMap grads;
      double loss = 0;
      for (int64_t i = begin; i < end; ++i) {
        PairGradient g = ComputePairGradient(bundle, train_pairs[order[i]], train.loss);
        loss += g.loss;
        if (grads.empty()) {
          grads = std::move(g.grads);
        } else {
          for (auto& [name, t] : grads) {
            const Tensor<float>& add = g.grads.at(name);
            for (int64_t j = 0; j < t.size(); ++j) t[j] += add[j];
          }
        }
      }
      const float inv = 1.0f / float(end - begin);
      for (auto& [name, t] : grads) {
        for (float& x : t.values()) x *= inv;
      }
      loss /= double(end - begin);
      const bool finite = std::isfinite(loss) && AllFinite(grads);
      if (finite) {
        AdamStep(bundle.params, std::move(grads), state.adam, lr, train.grad_clip_l2);
        state.nonfinite_streak = 0;
      } else if (++state.nonfinite_streak > train.max_nonfinite_steps) {
        throw NumericalError(fmt::format(
            "{} consecutive non-finite steps (epoch {}, step {}, loss {}); non-finite "
            "gradients in: {}",
            state.nonfinite_streak, epoch, state.global_step + 1, loss, DescribeNonFinite(grads)));
      }
      ++state.global_step;
      ++state.step_in_epoch;
      result.step_losses.push_back(loss);
      if (finite) {
        loss_sum += loss;
        ++loss_count;
      }
      emit({epoch, state.global_step, lr, loss, std::nullopt, std::nullopt});
    }
    if (state.step_in_epoch < batches) break;

    state.epoch = epoch;
    state.step_in_epoch = 0;
    const ValidationResult v = Validate(bundle, val_pairs);
    bool best_changed = false;
    const double score = v.si_sdri.value_or(-INFINITY);
    const double best = state.best_val.value_or(-INFINITY);
    if (score - best >= train.stagnation_db) {
      state.stagnant = 0;
    } else {
      ++state.stagnant;
    }
    if (score > best) {
      state.best_val = score;
      state.best_params = bundle.params;
      best_changed = true;
    }
    if (state.stagnant >= train.lr_halve_patience) {
      state.lr *= 0.5;
      state.stagnant = 0;
    }
    std::optional<double> mean_loss;
    if (loss_count > 0) mean_loss = loss_sum / double(loss_count);
    emit({epoch, state.global_step, lr, mean_loss, v.si_sdri, v.esr});
    save(best_changed);
  }
  save(false);
  state.params = std::move(bundle.params);
  result.state = std::move(state);
  return result;
}

}  // namespace promptse
