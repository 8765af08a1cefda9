#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "subens/checkpoint.hpp"
#include "subens/ensemble.hpp"
#include "subens/error.hpp"

namespace subens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << v;
  return out.str();
}

json train_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.sgd.learning_rate},
          {"momentum", c.sgd.momentum}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.sgd.learning_rate = j.at("learning_rate").get<double>();
  c.sgd.momentum = j.at("momentum").get<double>();
  return c;
}

std::string member_file(std::size_t i) { return "member_" + std::to_string(i) + ".ckpt"; }

json parse_extra(const std::string& extra) {
  json j = json::parse(extra);
  if (!j.is_object()) throw ConfigError("manifest extra data must be a JSON object");
  return j;
}

void write_manifest(const fs::path& dir, const json& manifest) {
  std::ofstream out(dir / "manifest.json");
  if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

json base_manifest(const char* kind, const NetworkSpec& spec, std::uint64_t seed,
                   const std::vector<std::uint64_t>& member_seeds, const TrainConfig& config,
                   const std::string& extra) {
  return {{"format_version", kManifestVersion},
          {"kind", kind},
          {"network", to_text(spec)},
          {"seed", seed},
          {"member_seeds", member_seeds},
          {"train", train_to_json(config)},
          {"extra", parse_extra(extra)}};
}

}  // namespace

void save_ensemble(const std::string& dir, const SubEnsemble& ensemble, std::uint64_t seed,
                   const TrainConfig& config, const std::string& extra_json) {
  const fs::path root(dir);
  fs::create_directories(root);
  json manifest = base_manifest("sub", ensemble.spec(), seed, ensemble.member_seeds(), config, extra_json);
  manifest["split_index"] = ensemble.split_point().index;
  manifest["trunk_file"] = "trunk.ckpt";
  manifest["trunk_hash"] = hex64(param_hash(ensemble.trunk()));
  json files = json::array();
  write_checkpoint((root / "trunk.ckpt").string(), ensemble.trunk());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    write_checkpoint((root / member_file(i)).string(), ensemble.members()[i]);
    files.push_back(member_file(i));
  }
  manifest["member_files"] = files;
  write_manifest(root, manifest);
}

void save_ensemble(const std::string& dir, const DeepEnsemble& ensemble, std::uint64_t seed,
                   const TrainConfig& config, const std::string& extra_json) {
  const fs::path root(dir);
  fs::create_directories(root);
  json manifest = base_manifest("deep", ensemble.spec(), seed, ensemble.member_seeds(), config, extra_json);
  json files = json::array();
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    write_checkpoint((root / member_file(i)).string(), ensemble.members()[i]);
    files.push_back(member_file(i));
  }
  manifest["member_files"] = files;
  write_manifest(root, manifest);
}

namespace {

json load_manifest_json(const fs::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw FormatError("missing manifest.json in " + root.string());
  try {
    json j = json::parse(in);
    if (j.at("format_version").get<int>() != kManifestVersion) throw FormatError("unsupported manifest version");
    return j;
  } catch (const json::exception& e) {
    throw FormatError("invalid manifest in " + root.string() + ": " + e.what());
  }
}

}  // namespace

EnsembleManifest read_manifest(const std::string& dir) {
  const json j = load_manifest_json(dir);
  try {
    EnsembleManifest m;
    m.kind = j.at("kind").get<std::string>();
    m.spec = parse_network_text(j.at("network").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.member_seeds = j.at("member_seeds").get<std::vector<std::uint64_t>>();
    m.train = train_from_json(j.at("train"));
    if (m.kind == "sub") m.split_index = j.at("split_index").get<std::size_t>();
    m.extra_json = j.value("extra", json::object()).dump();
    return m;
  } catch (const json::exception& e) {
    throw FormatError("invalid manifest in " + dir + ": " + e.what());
  }
}

SubEnsemble load_sub_ensemble(const std::string& dir) {
  const fs::path root(dir);
  const EnsembleManifest m = read_manifest(dir);
  if (m.kind != "sub") throw FormatError(dir + " holds a '" + m.kind + "' ensemble, expected 'sub'");
  const json j = load_manifest_json(root);
  auto trunk = std::make_shared<const ParamStore>(read_checkpoint((root / j.at("trunk_file").get<std::string>()).string()));
  if (hex64(param_hash(*trunk)) != j.at("trunk_hash").get<std::string>()) {
    throw FormatError("trunk hash mismatch in " + dir);
  }
  std::vector<ParamStore> members;
  for (const auto& f : j.at("member_files")) members.push_back(read_checkpoint((root / f.get<std::string>()).string()));
  return SubEnsemble(m.spec, SplitPoint{m.split_index}, std::move(trunk), std::move(members), m.member_seeds);
}

DeepEnsemble load_deep_ensemble(const std::string& dir) {
  const fs::path root(dir);
  const EnsembleManifest m = read_manifest(dir);
  if (m.kind != "deep") throw FormatError(dir + " holds a '" + m.kind + "' ensemble, expected 'deep'");
  const json j = load_manifest_json(root);
  std::vector<ParamStore> members;
  for (const auto& f : j.at("member_files")) members.push_back(read_checkpoint((root / f.get<std::string>()).string()));
  return DeepEnsemble(m.spec, std::move(members), m.member_seeds);
}

}  // namespace subens
