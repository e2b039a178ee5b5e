#pragma once

// File formats: full-precision CSV for fields, datasets, round logs and
// results; the flat key-value config format; and bit-exact model checkpoints.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opdef/active_learning.hpp"
#include "opdef/deeponet.hpp"
#include "opdef/physics.hpp"

namespace opdef {

/// Shortest representation that round-trips an IEEE double exactly.
std::string format_double(double v);
double parse_double(const std::string& s);

void write_field_csv(const std::string& path, const Field& f);
Field read_field_csv(const std::string& path);

void write_dataset_csv(const std::string& path, std::span<const LabeledSample> data);
std::vector<LabeledSample> read_dataset_csv(const std::string& path);

void write_round_logs_csv(const std::string& path, std::span<const RoundLog> rounds);

/// Flat `key = value` text document; '#' starts a comment.
class KvConfig {
 public:
  static KvConfig load(const std::string& path);
  static KvConfig parse(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value);
  std::string serialize() const;
  void save(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Checkpoint: variant tag + architecture header + parameters, one value per
/// line at full precision, so save/load round-trips bit-exactly.
void save_checkpoint(const DeepOnetModel& model, const std::string& path);
DeepOnetModel load_checkpoint(const std::string& path);

}  // namespace opdef
