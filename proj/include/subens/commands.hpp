#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "subens/run_config.hpp"

namespace subens::cli {

/// A command failed; `stage` names the step (config, data, network,
/// training, evaluation, output).
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Each command returns the paths of the files it wrote. Progress goes to `log`.

/// Trains a sub- or deep ensemble and saves it to model_dir (default
/// <out_dir>/model_<mode>); writes train_<mode>.csv with test metrics.
std::vector<std::string> cmd_train(const RunConfig& config, std::ostream& log);

/// Loads model_dir and writes eval_<mode>.csv (num_ensembles;error;nll;flops)
/// and calibration_<mode>.csv (conf;acc).
std::vector<std::string> cmd_eval(const RunConfig& config, std::ostream& log);

/// Trains `members` members once and evaluates every prefix size in
/// [members_min, members]; writes sweep_<mode>.csv (num_ensembles;error;nll;flops).
std::vector<std::string> cmd_sweep(const RunConfig& config, std::ostream& log);

/// Repeats sub-ensemble training for `runs` seeds (seed + r); writes
/// correlate.csv (base_error;base_nll;error;nll), base = the initial model.
std::vector<std::string> cmd_correlate(const RunConfig& config, std::ostream& log);

/// Entropy-based OOD detection for each size in ood_members; writes
/// ood_summary_<mode>.csv (num_ensembles;auc;id_entropy;ood_entropy),
/// ood_roc_<mode>_n<k>.csv (fpr;tpr) and calibration_<mode>_n<k>.csv (conf;acc).
std::vector<std::string> cmd_ood(const RunConfig& config, std::ostream& log);

/// Analytic speedup for n = 1..members; writes flops.csv (num_ensembles;speedup).
std::vector<std::string> cmd_flops(const RunConfig& config, std::ostream& log);

/// Full command-line entry point. args[0] is the program name. Returns the
/// process exit code: 0 iff every requested output was written.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace subens::cli
