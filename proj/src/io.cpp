#include "opdef/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace opdef {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  return f;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) throw IoError("empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0') throw IoError("malformed number: " + t);
  return v;
}

void write_field_csv(const std::string& path, const Field& f) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) out << ',';
    out << format_double(f[i]);
  }
  out << '\n';
}

Field read_field_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty field file: " + path);
  Field f;
  for (const auto& cell : split(trim(line), ',')) f.push_back(parse_double(cell));
  return f;
}

void write_dataset_csv(const std::string& path, std::span<const LabeledSample> data) {
  if (data.empty()) throw UsageError("write_dataset_csv: no samples");
  auto out = open_out(path);
  const std::size_t n = data.front().input.size();
  out << "provenance,center,magnitude,width";
  for (std::size_t j = 0; j < n; ++j) out << ",u_" << j;
  for (std::size_t j = 0; j < n; ++j) out << ",y_" << j;
  out << '\n';
  for (const auto& s : data) {
    out << provenance_name(s.provenance) << ',';
    if (s.perturbation) {
      out << s.perturbation->center_index << ',' << format_double(s.perturbation->magnitude) << ','
          << format_double(s.perturbation->width);
    } else {
      out << ",,";
    }
    for (double v : s.input) out << ',' << format_double(v);
    for (double v : s.label) out << ',' << format_double(v);
    out << '\n';
  }
}

std::vector<LabeledSample> read_dataset_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + path);
  const auto header = split(trim(line), ',');
  if (header.size() < 6 || header[0] != "provenance") throw IoError("bad dataset header");
  const std::size_t n = (header.size() - 4) / 2;

  std::vector<LabeledSample> data;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cells = split(t, ',');
    if (cells.size() != 4 + 2 * n) throw IoError("dataset row width mismatch");
    LabeledSample s;
    s.provenance = provenance_from_name(cells[0]);
    if (!trim(cells[1]).empty()) {
      Perturbation p;
      p.center_index = static_cast<int>(parse_double(cells[1]));
      p.magnitude = parse_double(cells[2]);
      p.width = parse_double(cells[3]);
      s.perturbation = p;
    }
    s.input.resize(n);
    s.label.resize(n);
    for (std::size_t j = 0; j < n; ++j) s.input[j] = parse_double(cells[4 + j]);
    for (std::size_t j = 0; j < n; ++j) s.label[j] = parse_double(cells[4 + n + j]);
    data.push_back(std::move(s));
  }
  return data;
}

void write_round_logs_csv(const std::string& path, std::span<const RoundLog> rounds) {
  auto out = open_out(path);
  out << "round,e_base,e_robust,alpha,dataset_size,sims_used,top_center,top_magnitude,top_error\n";
  for (const auto& r : rounds) {
    out << r.round << ',' << format_double(r.e_base) << ',' << format_double(r.e_robust) << ','
        << format_double(r.alpha_after) << ',' << r.dataset_size << ',' << r.sims_used << ','
        << r.top_center << ',' << format_double(r.top_magnitude) << ',' << format_double(r.top_error)
        << '\n';
  }
}

KvConfig KvConfig::load(const std::string& path) {
  auto in = open_in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not `key = value`");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
    cfg.entries_[key] = value;
  }
  return cfg;
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_double(it->second);
}

int KvConfig::get_int(const std::string& key, int fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  return static_cast<int>(std::strtol(it->second.c_str(), nullptr, 10));
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  return std::strtoull(it->second.c_str(), nullptr, 10);
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("boolean config value expected for " + key + ", got " + v);
}

void KvConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

std::string KvConfig::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
  return out.str();
}

void KvConfig::save(const std::string& path) const {
  auto out = open_out(path);
  out << serialize();
}

void save_checkpoint(const DeepOnetModel& model, const std::string& path) {
  auto out = open_out(path);
  const auto& cfg = model.config();
  out << "opdef-model v1\n";
  out << "variant " << (cfg.has_denoiser ? "denoising" : "standard") << '\n';
  out << "n_sensors " << cfg.n_sensors << '\n';
  out << "branch_hidden " << cfg.branch_hidden << '\n';
  out << "trunk_hidden " << cfg.trunk_hidden << '\n';
  out << "latent_dim " << cfg.latent_dim << '\n';
  out << "depth " << cfg.depth << '\n';
  out << "bottleneck_dim " << cfg.bottleneck_dim << '\n';
  out << "param_count " << model.param_count() << '\n';
  for (double v : model.params()) out << format_double(v) << '\n';
}

DeepOnetModel load_checkpoint(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "opdef-model v1") {
    throw IoError("not an opdef checkpoint: " + path);
  }

  DeepOnetConfig cfg;
  std::size_t count = 0;
  for (int i = 0; i < 8; ++i) {
    if (!std::getline(in, line)) throw IoError("truncated checkpoint header");
    std::istringstream ss(line);
    std::string key, value;
    ss >> key >> value;
    if (key == "variant") {
      if (value == "denoising") cfg.has_denoiser = true;
      else if (value == "standard") cfg.has_denoiser = false;
      else throw IoError("unknown model variant: " + value);
    } else if (key == "n_sensors") cfg.n_sensors = std::stoi(value);
    else if (key == "branch_hidden") cfg.branch_hidden = std::stoi(value);
    else if (key == "trunk_hidden") cfg.trunk_hidden = std::stoi(value);
    else if (key == "latent_dim") cfg.latent_dim = std::stoi(value);
    else if (key == "depth") cfg.depth = std::stoi(value);
    else if (key == "bottleneck_dim") cfg.bottleneck_dim = std::stoi(value);
    else if (key == "param_count") count = std::stoull(value);
    else throw IoError("unknown checkpoint header key: " + key);
  }

  std::vector<double> params;
  params.reserve(count);
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    params.push_back(parse_double(t));
  }
  if (params.size() != count) throw IoError("checkpoint parameter count mismatch");
  return DeepOnetModel(cfg, std::move(params));
}

}  // namespace opdef
