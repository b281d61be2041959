#include "ran/config.hpp"

#include <fstream>

namespace ran {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: bad value for \"") + key + "\"");
  }
}

std::vector<Index> index_list(const json& j, const char* key, std::vector<Index> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.empty())
    throw std::invalid_argument(std::string("config: \"") + key + "\" must be a nonempty array");
  std::vector<Index> out;
  for (const auto& v : arr) {
    if (!v.is_number_integer())
      throw std::invalid_argument(std::string("config: \"") + key + "\" entries must be integers");
    out.push_back(v.get<Index>());
  }
  return out;
}

}  // namespace

PipelineConfig parse_pipeline_config(const json& j) {
  PipelineConfig cfg;
  const Index heads = get_or<Index>(j, "heads", 2);
  cfg.base_dilation = index_list(j, "base_dilation", {1});

  if (!j.contains("levels")) throw std::invalid_argument("config: missing \"levels\"");
  const auto& levels = j.at("levels");
  if (levels.is_number_integer()) {
    cfg.schedule_levels = levels.get<Index>();
    cfg.schedule_q = get_or<Index>(j, "q", 0);
    try {
      cfg.arch = ma_config(cfg.schedule_levels, cfg.schedule_q, cfg.base_dilation, heads);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("config: ") + e.what());
    }
  } else if (levels.is_array() && !levels.empty()) {
    cfg.arch.heads = heads;
    cfg.arch.ma_depth = get_or<Index>(j, "q", 0);
    for (const auto& lv : levels) {
      LevelConfig level;
      level.pool_size = get_or<Index>(lv, "pool", 1);
      level.dilation = index_list(lv, "dilation", {1});
      cfg.arch.levels.push_back(std::move(level));
    }
    try {
      cfg.arch.validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("config: ") + e.what());
    }
  } else {
    throw std::invalid_argument("config: \"levels\" must be an integer or an array");
  }

  if (j.contains("regressor")) {
    const auto& r = j.at("regressor");
    cfg.params.patch_radius = get_or<Index>(r, "patch_radius", cfg.params.patch_radius);
    if (cfg.params.patch_radius < 0)
      throw std::invalid_argument("config: regressor.patch_radius must be >= 0");
  }
  if (j.contains("accumulator")) {
    const auto& a = j.at("accumulator");
    auto& p = cfg.params.accumulator;
    p.mu = get_or<double>(a, "mu", p.mu);
    p.tau = get_or<double>(a, "tau", p.tau);
    p.temperature = get_or<double>(a, "temperature", p.temperature);
    p.sigma = get_or<double>(a, "sigma", p.sigma);
    p.decay = get_or<double>(a, "decay", p.decay);
    if (p.tau <= 0 || p.temperature <= 0 || p.sigma < 0 || p.decay < 0)
      throw std::invalid_argument("config: bad accumulator parameters");
  }
  if (j.contains("objective")) {
    const auto& o = j.at("objective");
    const std::string sim = get_or<std::string>(o, "similarity", "ncc");
    if (sim == "ncc")
      cfg.params.similarity = Similarity::Ncc;
    else if (sim == "mse")
      cfg.params.similarity = Similarity::Mse;
    else
      throw std::invalid_argument("config: objective.similarity must be \"ncc\" or \"mse\"");
    cfg.params.lambda = get_or<double>(o, "lambda", cfg.params.lambda);
    if (cfg.params.lambda < 0) throw std::invalid_argument("config: objective.lambda must be >= 0");
  }
  cfg.params.theory_mode = get_or<bool>(j, "theory_mode", cfg.params.theory_mode);
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: bad JSON in " + path.string() + ": " + e.what());
  }
  return parse_pipeline_config(j);
}

json pipeline_config_json(const PipelineConfig& cfg) {
  json j;
  json levels = json::array();
  for (const auto& lv : cfg.arch.levels) {
    json l;
    l["pool"] = lv.pool_size;
    l["dilation"] = lv.dilation;
    levels.push_back(std::move(l));
  }
  j["levels"] = std::move(levels);
  j["q"] = cfg.arch.ma_depth;
  j["heads"] = cfg.arch.heads;
  j["base_dilation"] = cfg.base_dilation;
  j["regressor"] = {{"patch_radius", cfg.params.patch_radius}};
  const auto& a = cfg.params.accumulator;
  j["accumulator"] = {{"mu", a.mu},
                      {"tau", a.tau},
                      {"temperature", a.temperature},
                      {"sigma", a.sigma},
                      {"decay", a.decay}};
  j["objective"] = {{"similarity", cfg.params.similarity == Similarity::Ncc ? "ncc" : "mse"},
                    {"lambda", cfg.params.lambda}};
  j["theory_mode"] = cfg.params.theory_mode;
  return j;
}

}  // namespace ran
