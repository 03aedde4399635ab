#include <openssl/evp.h>

#include <fmt/format.h>

#include "lmmsdp/errors.hpp"
#include "lmmsdp/io.hpp"

namespace lmmsdp {

std::string tool_version() { return "0.1.0"; }

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

json to_json(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["args"] = m.args;
  j["inputs"] = json::array();
  for (const auto& [path, digest] : m.inputs) j["inputs"].push_back({{"path", path}, {"sha256", digest}});
  j["solver"] = to_json(m.solver);
  j["seed"] = m.seed ? json(*m.seed) : json(nullptr);
  j["version"] = m.version;
  j["kernels"] = m.kernels;
  j["outputs"] = json::array();
  for (const auto& [name, digest] : m.outputs) j["outputs"].push_back({{"file", name}, {"sha256", digest}});
  return j;
}

RunManifest parse_manifest(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what(), source);
  }
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    for (const auto& e : j.at("inputs"))
      m.inputs.emplace_back(e.at("path").get<std::string>(), e.at("sha256").get<std::string>());
    const auto& s = j.at("solver");
    m.solver.tol_gap = s.at("tol_gap").get<double>();
    m.solver.tol_feas = s.at("tol_feas").get<double>();
    m.solver.max_iter = s.at("max_iter").get<int>();
    m.solver.step_fraction = s.at("step_fraction").get<double>();
    if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.kernels = j.at("kernels").get<std::string>();
    for (const auto& e : j.at("outputs"))
      m.outputs.emplace_back(e.at("file").get<std::string>(), e.at("sha256").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid manifest: ") + e.what(), source);
  }
  return m;
}

}  // namespace lmmsdp
