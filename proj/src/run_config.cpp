#include "skelcast/run_config.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "skelcast/errors.hpp"

namespace skelcast {
namespace {

using nlohmann::json;

long parse_long(const std::string& key, const std::string& value) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw std::invalid_argument("config: " + key + ": expected an integer, got '" + value + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  return static_cast<int>(parse_long(key, value));
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw std::invalid_argument("config: " + key + ": expected a number, got '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: " + key + ": expected true/false, got '" + value + "'");
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(origin + ":" + std::to_string(line_no) + ": expected key=value, got '" +
                      line + "'");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str(), path);
}

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "learning_rate") cfg.train.learning_rate = parse_real(key, value);
  else if (key == "decay_factor") cfg.train.decay_factor = parse_real(key, value);
  else if (key == "decay_interval") cfg.train.decay_interval = parse_long(key, value);
  else if (key == "momentum") cfg.train.momentum = parse_real(key, value);
  else if (key == "clip_norm") cfg.train.clip_norm = parse_real(key, value);
  else if (key == "batch_size") cfg.train.batch_size = parse_int(key, value);
  else if (key == "max_steps") cfg.train.max_steps = parse_long(key, value);
  else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(parse_long(key, value));
  else if (key == "w_gram") cfg.train.w_gram = parse_real(key, value);
  else if (key == "w_mse") cfg.train.w_mse = parse_real(key, value);
  else if (key == "t_observed") cfg.train.t_observed = parse_int(key, value);
  else if (key == "t_horizon") cfg.train.t_horizon = parse_int(key, value);
  else if (key == "conditioned") cfg.train.conditioned = parse_bool(key, value);
  else if (key == "checkpoint_interval") cfg.train.checkpoint_interval = parse_long(key, value);
  else if (key == "d_e") cfg.dims.d_e = parse_int(key, value);
  else if (key == "d_h") cfg.dims.d_h = parse_int(key, value);
  else if (key == "d_a") cfg.dims.d_a = parse_int(key, value);
  else if (key == "d_m") cfg.dims.d_m = parse_int(key, value);
  else if (key == "d_z") cfg.dims.d_z = parse_int(key, value);
  else if (key == "d_l") cfg.dims.d_l = parse_int(key, value);
  else if (key == "downsample") cfg.downsample = parse_int(key, value);
  else if (key == "stride") cfg.stride = parse_int(key, value);
  else if (key == "metric_mode") cfg.metric_mode = value;
  else if (key == "test_subjects") cfg.test_subjects = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty())
    for (const auto& [key, value] : load_key_values(config_path)) apply_key_value(cfg, key, value);
  for (const auto& assignment : overrides) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override must be key=value, got '" + assignment + "'");
    apply_key_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }
  return cfg;
}

std::map<std::string, std::string> config_to_map(const RunConfig& cfg) {
  std::map<std::string, std::string> m;
  m["learning_rate"] = format_double(cfg.train.learning_rate);
  m["decay_factor"] = format_double(cfg.train.decay_factor);
  m["decay_interval"] = std::to_string(cfg.train.decay_interval);
  m["momentum"] = format_double(cfg.train.momentum);
  m["clip_norm"] = format_double(cfg.train.clip_norm);
  m["batch_size"] = std::to_string(cfg.train.batch_size);
  m["max_steps"] = std::to_string(cfg.train.max_steps);
  m["seed"] = std::to_string(cfg.train.seed);
  m["w_gram"] = format_double(cfg.train.w_gram);
  m["w_mse"] = format_double(cfg.train.w_mse);
  m["t_observed"] = std::to_string(cfg.train.t_observed);
  m["t_horizon"] = std::to_string(cfg.train.t_horizon);
  m["conditioned"] = cfg.train.conditioned ? "true" : "false";
  m["checkpoint_interval"] = std::to_string(cfg.train.checkpoint_interval);
  m["d_e"] = std::to_string(cfg.dims.d_e);
  m["d_h"] = std::to_string(cfg.dims.d_h);
  m["d_a"] = std::to_string(cfg.dims.d_a);
  m["d_m"] = std::to_string(cfg.dims.d_m);
  m["d_z"] = std::to_string(cfg.dims.d_z);
  m["d_l"] = std::to_string(cfg.dims.d_l);
  m["downsample"] = std::to_string(cfg.downsample);
  m["stride"] = std::to_string(cfg.stride);
  m["metric_mode"] = cfg.metric_mode;
  m["test_subjects"] = cfg.test_subjects;
  return m;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return hex;
}

std::string manifest_json(const std::string& command, const RunConfig& cfg,
                          const std::map<std::string, std::string>& input_digests) {
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["command"] = command;
  doc["seed"] = cfg.train.seed;
  doc["config"] = config_to_map(cfg);
  doc["inputs"] = input_digests;
  const auto now = std::chrono::system_clock::now();
  doc["created_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  return doc.dump(2);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot open file for writing: " + tmp);
    out << contents;
    if (!out) throw DataError("failed while writing: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace skelcast
