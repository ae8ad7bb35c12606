#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "retrologic/embed/embedding.hpp"
#include "retrologic/inference/inference.hpp"
#include "retrologic/model/gln_model.hpp"

namespace retrologic {

enum class Estimator { Exact, SampledModel, SampledUniform };
enum class OptimizerKind { Adam, Sgd };

std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& s);

struct TrainConfig {
  std::size_t batch_size = 64;
  long long max_updates = 150000;
  /// Stop after this many epochs as well; 0 means no epoch limit.
  int max_epochs = 0;
  double learning_rate = 1e-3;
  double grad_clip = 5.0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  Estimator estimator = Estimator::Exact;
  std::uint64_t seed = 1;
  /// Evaluate and log every this many epochs.
  int eval_every = 1;
  std::size_t beam = 50;
  int threads = 1;
};

/// Energies and distributions over the parts of one example's support that
/// its loss touches.
struct ItemForward {
  std::vector<double> v1;  // per center
  std::vector<double> v2;  // per template of the true center
  std::vector<double> w2;  // per candidate of the true template
  std::vector<double> p_center;
  std::vector<double> p_template;   // within the true center's group
  std::vector<double> p_candidate;  // within the true template's support
  double loss = 0.0;                // -log p(T*, R* | O)
};

/// Throws DataError when the example's ground truth is not in its support.
ItemForward forward_item(const GlnModel& model, const Example& ex);

/// d(loss)/d(energy) for every energy the loss touches: v1 per center, v2
/// per template of the true center, w2 per candidate of the true template.
struct EnergyCoefficients {
  std::vector<double> center;
  std::vector<double> templ;
  std::vector<double> candidate;
};

/// Exact coefficients p - onehot(truth).
EnergyCoefficients exact_coefficients(const Example& ex, const ItemForward& f);

/// One-sample coefficients: onehot(sample) - onehot(truth), with the center
/// drawn from p(o|O), the template from p(T | o*, O) and the reactant set
/// from p(R | T*, O) under `Estimator::SampledModel`, or uniformly under
/// `Estimator::SampledUniform`.
EnergyCoefficients sampled_coefficients(const Example& ex, const ItemForward& f, Estimator proposal,
                                        std::mt19937_64& rng);

/// Adds `scale` times the parameter gradient implied by `coef` into `grad`.
void backward_item(const GlnModel& model, const Example& ex, const EnergyCoefficients& coef,
                   double scale, GlnParams& grad);

/// Mean -log p(T*, R* | O) over the batch.
double nll_loss(const GlnModel& model, const std::vector<const Example*>& batch);
double nll_loss(const GlnModel& model, const std::vector<Example>& batch);

/// Gradient of nll_loss by enumeration over the cached supports.
GlnParams grad_exact(const GlnModel& model, const std::vector<const Example*>& batch);
GlnParams grad_exact(const GlnModel& model, const std::vector<Example>& batch);

/// One-draw estimate of one example's loss gradient.
GlnParams grad_sampled(const GlnModel& model, const Example& ex, Estimator proposal,
                       std::mt19937_64& rng);

/// Scales `grad` down to global norm `max_norm` if larger; returns the norm
/// before clipping.
double clip_global_norm(GlnParams& grad, double max_norm);

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const GlnParams& like);
  void step(GlnParams& params, const GlnParams& grad);

 private:
  TrainConfig cfg_;
  GlnParams m_;
  GlnParams v_;
  long long t_ = 0;
};

struct MetricsRecord {
  long long update = 0;
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> train_top1;
  std::optional<double> val_loss;
  std::optional<double> val_top1;
  double seconds = 0.0;
};

/// One JSON object per line.
std::string to_json_line(const MetricsRecord& r);

struct TrainResult {
  GlnModel final_model;
  /// Best validation top-1 (ties: lower validation loss); the final model
  /// when no validation split is given.
  GlnModel best_model;
  std::vector<MetricsRecord> metrics;
  std::size_t skipped_examples = 0;  // truth absent from support
};

/// Minibatch training. Examples whose truth is missing from their support
/// are skipped and counted. A metrics record is emitted at update 0 and after
/// every `eval_every` epochs. Throws NumericAbort on a non-finite loss or
/// gradient.
TrainResult train(GlnModel model, const std::vector<Example>& train_set,
                  const std::vector<Example>* val_set, const TrainConfig& cfg,
                  const std::function<void(const MetricsRecord&)>& on_metrics = {});

}  // namespace retrologic
