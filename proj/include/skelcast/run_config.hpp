#pragma once

#include <map>
#include <string>
#include <vector>

#include "skelcast/model.hpp"
#include "skelcast/trainer.hpp"

namespace skelcast {

// Everything a run needs beyond the data files. Populated from
// defaults, then a flat key=value config file, then CLI overrides,
// in that precedence order.
struct RunConfig {
  TrainingConfig train;
  ModelDims dims;  // input dimension is always taken from the data
  int downsample = 2;
  int stride = 1;
  std::string metric_mode = "euler";
  std::string test_subjects;  // comma-separated subject ids; empty = train on everything
};

// Parses "key=value" lines; '#' starts a comment, blank lines ignored.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin);
std::map<std::string, std::string> load_key_values(const std::string& path);

// Applies one assignment; throws std::invalid_argument on unknown keys
// or unparseable values.
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);

// defaults <- config file (optional) <- overrides ("key=value" strings)
RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides);

// Full echo of the resolved configuration, for manifests.
std::map<std::string, std::string> config_to_map(const RunConfig& cfg);

// FNV-1a 64-bit content digest, hex encoded.
std::string file_digest(const std::string& path);

// Run manifest: resolved config, input digests, seed and format
// version; written before training begins. The timestamp is the only
// non-reproducible field.
std::string manifest_json(const std::string& command, const RunConfig& cfg,
                          const std::map<std::string, std::string>& input_digests);

// Writes via a temporary file and rename so failed runs leave no
// partial output behind.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace skelcast
