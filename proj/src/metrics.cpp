#include "subens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "subens/error.hpp"
#include "subens/loss.hpp"

namespace subens {

double entropy(std::span<const double> p) {
  if (p.empty()) throw ConfigError("entropy of an empty distribution");
  double total = 0.0;
  double h = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("entropy: invalid probability component");
    total += v;
    if (v > 0.0) h -= v * std::log(v);
  }
  if (std::abs(total - 1.0) > 1e-6) throw ConfigError("entropy: components do not sum to 1");
  return std::clamp(h, 0.0, std::log(static_cast<double>(p.size())));
}

std::vector<double> row_entropies(const Tensor& probs) {
  if (probs.rank() != 2) throw ConfigError("expected (N, C) probabilities");
  const std::size_t classes = probs.dim(1);
  std::vector<double> out(probs.dim(0));
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = entropy(probs.data().subspan(n * classes, classes));
  return out;
}

MetricsReport evaluate_probabilities(const Tensor& probs, std::span<const int> labels) {
  if (labels.empty()) throw ConfigError("cannot evaluate an empty dataset");
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) throw ConfigError("probabilities do not match labels");
  const std::size_t classes = probs.dim(1);
  MetricsReport report;
  report.records.reserve(labels.size());
  std::size_t wrong = 0;
  double nll_sum = 0.0;
  double entropy_sum = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto row = probs.data().subspan(n * classes, classes);
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) {
      throw ConfigError("label " + std::to_string(labels[n]) + " out of range");
    }
    ExampleRecord r;
    // max_element returns the first maximum: ties go to the lowest index.
    r.predicted = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    r.confidence = row[r.predicted];
    r.label = labels[n];
    r.correct = r.predicted == static_cast<std::size_t>(labels[n]);
    r.entropy = entropy(row);
    r.nll = -std::log(std::max(row[static_cast<std::size_t>(labels[n])], kProbabilityFloor));
    wrong += r.correct ? 0 : 1;
    nll_sum += r.nll;
    entropy_sum += r.entropy;
    report.records.push_back(r);
  }
  const auto count = static_cast<double>(labels.size());
  report.error_percent = 100.0 * static_cast<double>(wrong) / count;
  report.nll = nll_sum / count;
  report.mean_entropy = entropy_sum / count;
  return report;
}

namespace {

void require_labeled(const Dataset& data) {
  data.validate();
  if (data.out_of_distribution) throw ConfigError("cannot compute error or NLL on an OOD dataset");
}

}  // namespace

MetricsReport evaluate(const SubEnsemble& ensemble, const Dataset& data) {
  require_labeled(data);
  return evaluate_probabilities(ensemble.predict_chunked(data.images), data.labels);
}

MetricsReport evaluate(const DeepEnsemble& ensemble, const Dataset& data) {
  require_labeled(data);
  return evaluate_probabilities(ensemble.predict_chunked(data.images), data.labels);
}

CalibrationCurve calibration_curve(std::span<const ExampleRecord> records, std::size_t num_bins) {
  if (num_bins == 0) throw ConfigError("calibration needs at least one bin");
  const auto width = 1.0 / static_cast<double>(num_bins);
  std::vector<double> conf_sum(num_bins, 0.0);
  std::vector<std::size_t> hits(num_bins, 0);
  CalibrationCurve curve;
  curve.bins.resize(num_bins);
  for (const auto& r : records) {
    const auto scaled = static_cast<std::size_t>(std::clamp(r.confidence, 0.0, 1.0) * static_cast<double>(num_bins));
    const std::size_t b = std::min(scaled, num_bins - 1);
    conf_sum[b] += r.confidence;
    hits[b] += r.correct ? 1 : 0;
    ++curve.bins[b].count;
  }
  for (std::size_t b = 0; b < num_bins; ++b) {
    auto& bin = curve.bins[b];
    bin.confidence_lo = static_cast<double>(b) * width;
    bin.confidence_hi = b + 1 == num_bins ? 1.0 : static_cast<double>(b + 1) * width;
    if (bin.count > 0) {
      bin.mean_confidence = conf_sum[b] / static_cast<double>(bin.count);
      bin.accuracy = static_cast<double>(hits[b]) / static_cast<double>(bin.count);
    }
  }
  return curve;
}

RocCurve roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw ConfigError("scores and labels differ in length");
  const auto total_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t total_neg = positive.size() - total_pos;
  if (total_pos == 0 || total_neg == 0) throw ConfigError("ROC needs both positive and negative examples");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i) (positive[order[i]] ? tp : fp) += 1;
    const RocPoint p{static_cast<double>(fp) / static_cast<double>(total_neg),
                     static_cast<double>(tp) / static_cast<double>(total_pos), threshold};
    const RocPoint& prev = curve.points.back();
    curve.auc += (p.false_positive_rate - prev.false_positive_rate) *
                 (p.true_positive_rate + prev.true_positive_rate) / 2.0;
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace subens
