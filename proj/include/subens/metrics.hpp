#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "subens/data.hpp"
#include "subens/ensemble.hpp"
#include "subens/tensor.hpp"

namespace subens {

/// Shannon entropy in nats. Zero components contribute 0. The input must be
/// a distribution (components >= 0, sum within 1e-6 of 1); the result is
/// clamped to [0, ln C].
double entropy(std::span<const double> p);

/// Entropy of every row of a (N, C) probability tensor.
std::vector<double> row_entropies(const Tensor& probs);

struct ExampleRecord {
  double confidence = 0.0;  // max class probability
  std::size_t predicted = 0;
  int label = 0;
  bool correct = false;
  double entropy = 0.0;
  double nll = 0.0;
};

struct MetricsReport {
  double error_percent = 0.0;
  double nll = 0.0;
  double mean_entropy = 0.0;
  std::vector<ExampleRecord> records;
};

/// Error = 100 * fraction of examples whose argmax (ties -> lowest index)
/// differs from the label; NLL = mean -log(max(p_true, 1e-12)).
MetricsReport evaluate_probabilities(const Tensor& probs, std::span<const int> labels);

MetricsReport evaluate(const SubEnsemble& ensemble, const Dataset& data);
MetricsReport evaluate(const DeepEnsemble& ensemble, const Dataset& data);

struct CalibrationBin {
  double confidence_lo = 0.0;
  double confidence_hi = 0.0;
  double mean_confidence = 0.0;
  std::optional<double> accuracy;  // empty bins have no accuracy
  std::size_t count = 0;
};

struct CalibrationCurve {
  std::vector<CalibrationBin> bins;
};

inline constexpr std::size_t kDefaultCalibrationBins = 10;

/// Equal-width bins over [0, 1] on confidence; bin b holds confidences in
/// [b/B, (b+1)/B), with 1.0 falling in the top bin.
CalibrationCurve calibration_curve(std::span<const ExampleRecord> records,
                                   std::size_t num_bins = kDefaultCalibrationBins);

struct RocPoint {
  double false_positive_rate = 0.0;
  double true_positive_rate = 0.0;
  double threshold = 0.0;  // score >= threshold is flagged positive
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// ROC over a descending sweep of the unique scores, from (0, 0) to (1, 1);
/// AUC by the trapezoidal rule. Positives are the flagged class (OOD).
/// Throws ConfigError unless both classes are present.
RocCurve roc_auc(std::span<const double> scores, const std::vector<bool>& positive);

}  // namespace subens
