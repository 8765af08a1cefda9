#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "subens/commands.hpp"
#include "subens/csv.hpp"
#include "support.hpp"

using namespace subens;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "subens");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

const std::vector<std::string> kSmall{"--synthetic", "per_class=30,test_per_class=10", "--epochs", "2"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  return args;
}

}  // namespace

TEST_CASE("csv number formatting is shortest round trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CsvTable t({"a", "b"});
  t.row().cell(1.5).cell(std::uint64_t{7});
  CHECK(t.str() == "a;b\n1.5;7\n");
}

TEST_CASE("sweep writes one row per ensemble size and is reproducible") {
  const auto dir = testing::scratch_dir("cli_sweep");
  const auto args = with_small({"sweep", "--members-min", "1", "--members", "3", "--out-dir", dir.string()});
  const Result r = run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const std::string first = slurp(dir / "sweep_sub.csv");
  const auto rows = lines(first);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "num_ensembles;error;nll;flops");
  CHECK(rows[1].rfind("1;", 0) == 0);
  CHECK(rows[2].rfind("2;", 0) == 0);
  CHECK(rows[3].rfind("3;", 0) == 0);
  REQUIRE(run(args).code == 0);
  CHECK(slurp(dir / "sweep_sub.csv") == first);
}

TEST_CASE("parallel kernels give byte-identical sweep output") {
  const auto dir = testing::scratch_dir("cli_parallel");
  REQUIRE(run(with_small({"sweep", "--members", "2", "--out-dir", dir.string(), "--csv", "a.csv"})).code == 0);
  REQUIRE(run(with_small({"sweep", "--members", "2", "--out-dir", dir.string(), "--csv", "b.csv", "--parallel"}))
              .code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
}

TEST_CASE("flops writes the speedup table") {
  const auto dir = testing::scratch_dir("cli_flops");
  const Result r = run({"flops", "--arch", "mnist", "--members", "4", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(slurp(dir / "flops.csv"));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "num_ensembles;speedup");
  CHECK(rows[1] == "1;1");
}

TEST_CASE("train then eval reproduces the training metrics") {
  const auto dir = testing::scratch_dir("cli_train");
  const std::string model = (dir / "model").string();
  const Result t = run(with_small({"train", "--members", "2", "--out-dir", dir.string(), "--model-dir", model}));
  REQUIRE_MESSAGE(t.code == 0, t.err);
  const Result e = run(with_small({"eval", "--out-dir", dir.string(), "--model-dir", model}));
  REQUIRE_MESSAGE(e.code == 0, e.err);
  CHECK(slurp(dir / "train_sub.csv") == slurp(dir / "eval_sub.csv"));
  CHECK(lines(slurp(dir / "calibration_sub.csv")).front() == "conf;acc");
}

TEST_CASE("ood writes roc, calibration and summary files") {
  const auto dir = testing::scratch_dir("cli_ood");
  const Result r = run(with_small({"ood", "--ood-members", "1,2", "--out-dir", dir.string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto summary = lines(slurp(dir / "ood_summary_sub.csv"));
  REQUIRE(summary.size() == 3);
  CHECK(summary[0] == "num_ensembles;auc;id_entropy;ood_entropy");
  CHECK(lines(slurp(dir / "ood_roc_sub_n2.csv")).front() == "fpr;tpr");
  CHECK(lines(slurp(dir / "calibration_sub_n1.csv")).front() == "conf;acc");
}

TEST_CASE("correlate writes one row per run") {
  const auto dir = testing::scratch_dir("cli_corr");
  const Result r = run(with_small({"correlate", "--runs", "2", "--members", "2", "--out-dir", dir.string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(slurp(dir / "correlate.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "base_error;base_nll;error;nll");
}

TEST_CASE("config file values are overridden by flags") {
  const auto dir = testing::scratch_dir("cli_config");
  std::ofstream(dir / "cfg.json") << R"({"members": 4, "epochs": 1, "synthetic": "per_class=20,test_per_class=5"})";
  const Result r = run({"sweep", "--config", (dir / "cfg.json").string(), "--members", "2", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(lines(slurp(dir / "sweep_sub.csv")).size() == 3);
}

TEST_CASE("failures name the stage and exit nonzero") {
  const auto dir = testing::scratch_dir("cli_fail");
  Result r = run({"sweep", "--split", "SE-99", "--out-dir", dir.string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("network") != std::string::npos);

  r = run({"sweep", "--data-idx", "missing.idx,missing.lbl", "--test-idx", "a,b", "--out-dir", dir.string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("data") != std::string::npos);

  std::ofstream(dir / "bad.json") << R"({"colour": "red"})";
  r = run({"flops", "--config", (dir / "bad.json").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("config") != std::string::npos);

  r = run({"sweep", "--members", "0"});
  CHECK(r.code != 0);
  CHECK(run({"frobnicate"}).code != 0);
  CHECK(run({"eval"}).code != 0);
}

TEST_CASE("help lists the subcommands") {
  const Result r = run({"--help"});
  CHECK(r.code == 0);
  for (const char* cmd : {"train", "eval", "sweep", "ood", "flops", "correlate"}) {
    CHECK(r.out.find(cmd) != std::string::npos);
  }
}

TEST_CASE("out dir defaults to the environment variable") {
  const auto dir = testing::scratch_dir("cli_env");
  ::setenv("SUBENS_OUT_DIR", dir.c_str(), 1);
  const Result r = run({"flops", "--arch", "mnist", "--members", "2"});
  ::unsetenv("SUBENS_OUT_DIR");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(std::filesystem::exists(dir / "flops.csv"));
}
