#include "veil/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace veil {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_plain_double(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) throw std::invalid_argument("empty number");
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw std::invalid_argument("bad number: '" + s + "'");
  }
  return v;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(s.substr(start)));
      break;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

double parse_number(const std::string& s) {
  const std::string t = trim(s);
  size_t slash = t.find('/');
  if (slash == std::string::npos) return parse_plain_double(t);
  double num = parse_plain_double(t.substr(0, slash));
  double den = parse_plain_double(t.substr(slash + 1));
  if (den == 0.0) throw std::invalid_argument("zero denominator in '" + s + "'");
  return num / den;
}

uint64_t parse_u64(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty() || t[0] == '-') throw std::invalid_argument("bad unsigned integer: '" + s + "'");
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw std::invalid_argument("bad unsigned integer: '" + s + "'");
  }
  return static_cast<uint64_t>(v);
}

int64_t parse_i64(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) throw std::invalid_argument("bad integer: '" + s + "'");
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw std::invalid_argument("bad integer: '" + s + "'");
  }
  return static_cast<int64_t>(v);
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "checkpoint") cfg.checkpoint = value;
    else if (key == "out") cfg.out = value;
    else if (key == "seed") cfg.seed = parse_u64(value);
    else if (key == "inputs") cfg.inputs = split_csv(value);
    else if (key == "mode") cfg.mode = value;
    else if (key == "fused_weight") cfg.fused_weight = parse_number(value);
    else if (key == "steps") cfg.steps = parse_i64(value);
    else if (key == "alpha") cfg.alpha = parse_number(value);
    else if (key == "epsilon") cfg.epsilon = parse_number(value);
    else if (key == "target") cfg.target = value;
    else if (key == "scenario") cfg.scenario = value;
    else if (key == "crop_px") cfg.crop_px = parse_i64(value);
    else if (key == "samples") cfg.samples = parse_i64(value);
    else if (key == "finetune_steps") cfg.finetune_steps = parse_i64(value);
    else if (key == "finetune_lr") cfg.finetune_lr = parse_number(value);
    else if (key == "eval_images") cfg.eval_images = parse_i64(value);
    else if (key == "ae_steps") cfg.ae_steps = parse_i64(value);
    else if (key == "dm_steps") cfg.dm_steps = parse_i64(value);
    else if (key == "ae_lr") cfg.ae_lr = parse_number(value);
    else if (key == "dm_lr") cfg.dm_lr = parse_number(value);
    else if (key == "batch") cfg.batch = parse_i64(value);
    else if (key == "dataset_size") cfg.dataset_size = parse_i64(value);
    else if (key == "dataset_seed") cfg.dataset_seed = parse_u64(value);
    else if (key == "dataset_dir") cfg.dataset_dir = value;
    else if (key == "timesteps") cfg.timesteps = parse_i64(value);
    else if (key == "beta_start") cfg.beta_start = parse_number(value);
    else if (key == "beta_end") cfg.beta_end = parse_number(value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  } catch (const std::invalid_argument& e) {
    if (std::string(e.what()).rfind("unknown config key", 0) == 0) throw;
    throw std::invalid_argument("config key '" + key + "': " + e.what());
  }
}

std::string manifest_string(const RunConfig& cfg) {
  std::string out;
  auto put = [&out](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  put("checkpoint", cfg.checkpoint);
  put("out", cfg.out);
  put("seed", std::to_string(cfg.seed));
  put("inputs", join(cfg.inputs));
  put("mode", cfg.mode);
  put("fused_weight", fmt_double(cfg.fused_weight));
  put("steps", std::to_string(cfg.steps));
  put("alpha", fmt_double(cfg.alpha));
  put("epsilon", fmt_double(cfg.epsilon));
  put("target", cfg.target);
  put("scenario", cfg.scenario);
  put("crop_px", std::to_string(cfg.crop_px));
  put("samples", std::to_string(cfg.samples));
  put("finetune_steps", std::to_string(cfg.finetune_steps));
  put("finetune_lr", fmt_double(cfg.finetune_lr));
  put("eval_images", std::to_string(cfg.eval_images));
  put("ae_steps", std::to_string(cfg.ae_steps));
  put("dm_steps", std::to_string(cfg.dm_steps));
  put("ae_lr", fmt_double(cfg.ae_lr));
  put("dm_lr", fmt_double(cfg.dm_lr));
  put("batch", std::to_string(cfg.batch));
  put("dataset_size", std::to_string(cfg.dataset_size));
  put("dataset_seed", std::to_string(cfg.dataset_seed));
  put("dataset_dir", cfg.dataset_dir);
  put("timesteps", std::to_string(cfg.timesteps));
  put("beta_start", fmt_double(cfg.beta_start));
  put("beta_end", fmt_double(cfg.beta_end));
  return out;
}

void write_manifest(const std::string& dir, const RunConfig& cfg) {
  const std::string path = dir + "/manifest.txt";
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("manifest: cannot open for writing: " + path);
  os << manifest_string(cfg);
  os.flush();
  if (!os) throw std::runtime_error("manifest: write failed: " + path);
}

}  // namespace veil
