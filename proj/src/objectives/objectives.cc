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

#include "promptse/objectives/objectives.h"

#include <numbers>

#include "promptse/error.h"

namespace promptse {
namespace {

constexpr double kDb = 10.0 / std::numbers::ln10;  // d(10 log10 x)/dx = kDb / x

template <typename T>
void CheckSizes(const char* what, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) {
    throw DataError(std::string(what) + ": length mismatch " + ShapeString(a.shape()) +
                    " vs " + ShapeString(b.shape()));
  }
}

template <typename T>
double Energy(const Tensor<T>& x) {
  double e = 0;
  for (int64_t i = 0; i < x.size(); ++i) e += double(x[i]) * double(x[i]);
  return e;
}

template <typename T>
double Inner(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0;
  for (int64_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

template <typename T>
double DiffEnergy(const Tensor<T>& a, const Tensor<T>& b, double scale = 1.0) {
  double e = 0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - scale * double(b[i]);
    e += d * d;
  }
  return e;
}

// Quantities shared by the SI-SDR value and its gradient.
struct SiSdrTerms {
  double alpha, target_energy, error_energy, value;
};

template <typename T>
SiSdrTerms ComputeSiSdr(const Tensor<T>& est, const Tensor<T>& ref, double eps) {
  CheckSizes("si_sdr", est, ref);
  const double ss = Energy(ref);
  if (ss == 0) {
    throw DataError("si_sdr: silent reference is undefined; use log_mse for negative pairs");
  }
  SiSdrTerms t;
  t.alpha = Inner(est, ref) / ss;
  t.target_energy = t.alpha * t.alpha * ss;
  t.error_energy = DiffEnergy(est, ref, t.alpha);
  t.value = kDb * std::log(t.target_energy / (t.error_energy + eps * t.target_energy));
  return t;
}

template <typename T>
void CheckLogMseInputs(const Tensor<T>& est, const Tensor<T>& target,
                       const Tensor<T>& mix_ref) {
  CheckSizes("log_mse", est, target);
  CheckSizes("log_mse", est, mix_ref);
}

}  // namespace

LossKind ParseLossKind(const std::string& name) {
  if (name == "si_sdr") return LossKind::kSiSdr;
  if (name == "log_mse") return LossKind::kLogMse;
  throw ConfigError("unknown loss '" + name + "' (expected si_sdr or log_mse)");
}

std::string LossKindName(LossKind kind) {
  return kind == LossKind::kSiSdr ? "si_sdr" : "log_mse";
}

void LossConfig::Validate() const {
  if (!(snr_max_db > 0) || !std::isfinite(snr_max_db)) {
    throw ConfigError("loss.snr_max_db must be positive");
  }
  if (!(eps > 0) || !(eps < 1)) throw ConfigError("loss.eps must lie in (0, 1)");
}

void LossConfig::Set(const std::string& key, const std::string& value) {
  if (key == "loss.kind") {
    kind = ParseLossKind(value);
  } else if (key == "loss.snr_max_db") {
    snr_max_db = ParseDouble(key, value);
  } else if (key == "loss.eps") {
    eps = ParseDouble(key, value);
  } else {
    throw ConfigError("unknown key " + key);
  }
}

KeyValues LossConfig::Items() const {
  return {{"loss.kind", LossKindName(kind)},
          {"loss.snr_max_db", FormatDouble(snr_max_db)},
          {"loss.eps", FormatDouble(eps)}};
}

template <typename T>
bool IsSilent(const Tensor<T>& x) {
  for (int64_t i = 0; i < x.size(); ++i) {
    if (x[i] != T(0)) return false;
  }
  return true;
}

template <typename T>
double SiSdr(const Tensor<T>& est, const Tensor<T>& ref, double eps) {
  return ComputeSiSdr(est, ref, eps).value;
}

template <typename T>
double LogMse(const Tensor<T>& est, const Tensor<T>& target,
              const Tensor<T>& mix_ref, double tau) {
  CheckLogMseInputs(est, target, mix_ref);
  if (!IsSilent(target)) {
    return kDb * std::log(DiffEnergy(target, est) + tau * Energy(target));
  }
  const double floor = tau * Energy(mix_ref);
  if (floor == 0) throw DataError("log_mse: target and mixture are both silent");
  return kDb * std::log(Energy(est) + floor);
}

template <typename T>
double Snr(const Tensor<T>& est, const Tensor<T>& ref, double eps) {
  CheckSizes("snr", est, ref);
  const double ss = Energy(ref);
  if (ss == 0) throw DataError("snr: silent reference");
  return kDb * std::log(ss / (DiffEnergy(ref, est) + eps * ss));
}

template <typename T>
double EnergySuppressionRatio(const Tensor<T>& mix_ref, const Tensor<T>& est,
                              double eps) {
  CheckSizes("energy_suppression_ratio", mix_ref, est);
  const double yy = Energy(mix_ref);
  if (yy == 0) throw DataError("energy_suppression_ratio: silent mixture");
  return kDb * std::log(yy / (Energy(est) + eps));
}

template <typename T>
double Improvement(const MetricFn<T>& metric, const Tensor<T>& est,
                   const Tensor<T>& ref, const Tensor<T>& mix_ref) {
  return metric(est, ref) - metric(mix_ref, ref);
}

template <typename T>
double Loss(const Tensor<T>& est, const Tensor<T>& target,
            const Tensor<T>& mix_ref, const LossConfig& config) {
  if (config.kind == LossKind::kSiSdr) return -SiSdr(est, target, config.eps);
  return LogMse(est, target, mix_ref, config.tau());
}

namespace ops {

template <typename T>
Var<T> SiSdr(const Var<T>& est, const Tensor<T>& ref, double eps) {
  const SiSdrTerms t = ComputeSiSdr(est.value(), ref, eps);
  Tape<T>* tape = est.tape();
  return tape->Record(
      "si_sdr", Tensor<T>::Scalar(T(t.value)), {est},
      [tape, est, ref, t, eps](const Tensor<T>& g, const Tensor<T>&) {
        // d/dest of |a s|^2 is 2 a s and of |est - a s|^2 is 2 (est - a s).
        const double den = t.error_energy + eps * t.target_energy;
        const double up = double(g[0]) * kDb;
        const double cs = up * 2.0 * t.alpha * (1.0 / t.target_energy - eps / den);
        const double ce = -up * 2.0 / den;
        const Tensor<T>& x = est.value();
        Tensor<T>& gx = tape->GradRef(est);
        for (int64_t i = 0; i < x.size(); ++i) {
          const double e = double(x[i]) - t.alpha * double(ref[i]);
          gx[i] += T(cs * double(ref[i]) + ce * e);
        }
      });
}

template <typename T>
Var<T> LogMse(const Var<T>& est, const Tensor<T>& target,
              const Tensor<T>& mix_ref, double tau) {
  const double value = promptse::LogMse(est.value(), target, mix_ref, tau);
  const bool silent = IsSilent(target);
  const double q = std::exp(value / kDb);
  Tape<T>* tape = est.tape();
  return tape->Record(
      "log_mse", Tensor<T>::Scalar(T(value)), {est},
      [tape, est, target, silent, q](const Tensor<T>& g, const Tensor<T>&) {
        const double c = double(g[0]) * kDb * 2.0 / q;
        const Tensor<T>& x = est.value();
        Tensor<T>& gx = tape->GradRef(est);
        for (int64_t i = 0; i < x.size(); ++i) {
          const double r = silent ? double(x[i]) : double(x[i]) - double(target[i]);
          gx[i] += T(c * r);
        }
      });
}

template <typename T>
Var<T> Loss(const Var<T>& est, const Tensor<T>& target,
            const Tensor<T>& mix_ref, const LossConfig& config) {
  if (config.kind == LossKind::kSiSdr) {
    Var<T> s = SiSdr(est, target, config.eps);
    Tape<T>* tape = est.tape();
    return tape->Record("negate", Tensor<T>::Scalar(-s.value()[0]), {s},
                        [tape, s](const Tensor<T>& g, const Tensor<T>&) {
                          tape->GradRef(s)[0] -= g[0];
                        });
  }
  return LogMse(est, target, mix_ref, config.tau());
}

}  // namespace ops

#define PROMPTSE_INSTANTIATE_OBJECTIVES(T)                                       \
  template bool IsSilent(const Tensor<T>&);                                      \
  template double SiSdr(const Tensor<T>&, const Tensor<T>&, double);             \
  template double LogMse(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                         double);                                                \
  template double Snr(const Tensor<T>&, const Tensor<T>&, double);               \
  template double EnergySuppressionRatio(const Tensor<T>&, const Tensor<T>&,     \
                                         double);                                \
  template double Improvement(const MetricFn<T>&, const Tensor<T>&,              \
                              const Tensor<T>&, const Tensor<T>&);               \
  template double Loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                       const LossConfig&);                                       \
  template Var<T> ops::SiSdr(const Var<T>&, const Tensor<T>&, double);           \
  template Var<T> ops::LogMse(const Var<T>&, const Tensor<T>&, const Tensor<T>&, \
                              double);                                           \
  template Var<T> ops::Loss(const Var<T>&, const Tensor<T>&, const Tensor<T>&,   \
                            const LossConfig&);

PROMPTSE_INSTANTIATE_OBJECTIVES(float)
PROMPTSE_INSTANTIATE_OBJECTIVES(double)

}  // namespace promptse
