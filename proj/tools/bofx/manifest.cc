#include "manifest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bofx/error.h"

namespace bofx::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Files under `p` (or p itself) in lexicographic order.
std::vector<fs::path> files_of(const fs::path& p) {
  std::vector<fs::path> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file() && e.path().filename().string().rfind("manifest", 0) != 0) out.push_back(e.path());
    std::sort(out.begin(), out.end());
  } else if (fs::exists(p)) {
    out.push_back(p);
  }
  return out;
}

ojson describe(const std::string& path, ojson& versions) {
  ojson entry;
  entry["path"] = path;
  auto& files = entry["files"] = ojson::array();
  for (const auto& f : files_of(path)) {
    const std::string bytes = slurp(f);
    files.push_back({{"path", f.string()}, {"bytes", bytes.size()}, {"fnv1a64", fnv1a_hex(bytes)}});
    if (f.extension() == ".json") {
      const auto j = nlohmann::json::parse(bytes, nullptr, false);
      if (j.is_object() && j.contains("format") && j.contains("version"))
        versions[j["format"].get<std::string>()] = j["version"];
    }
  }
  return entry;
}

}  // namespace

Manifest::Manifest(std::string command, const Settings& settings)
    : command_(std::move(command)),
      config_(settings.effective()),
      config_hash_(settings.hash()),
      started_(std::chrono::steady_clock::now()) {}

void Manifest::seed(const std::string& name, std::uint64_t value) { seeds_.emplace_back(name, value); }
void Manifest::input(const std::string& path) { inputs_.push_back(path); }
void Manifest::output(const std::string& path) { outputs_.push_back(path); }

void Manifest::write(const std::string& path) const {
  ojson j;
  j["format"] = "bofx.manifest";
  j["version"] = 1;
  j["tool_version"] = BOFX_VERSION;
  j["command"] = command_;
  j["config_hash"] = config_hash_;
  j["config"] = config_;
  auto& seeds = j["seeds"] = ojson::object();
  for (const auto& [name, value] : seeds_) seeds[name] = value;
  ojson versions = ojson::object();
  auto& in = j["inputs"] = ojson::array();
  for (const auto& p : inputs_) in.push_back(describe(p, versions));
  auto& out = j["outputs"] = ojson::array();
  for (const auto& p : outputs_) out.push_back(describe(p, versions));
  j["artifact_versions"] = versions;
  j["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  std::ofstream f(path);
  if (!f) fail(ErrorCode::kIo, "cannot write manifest '" + path + "'");
  f << j.dump(2) << '\n';
}

}  // namespace bofx::cli
