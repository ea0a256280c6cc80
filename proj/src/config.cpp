#include <batauth/config.hpp>
#include <batauth/error.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace batauth {

namespace {

constexpr std::string_view kModule = "cli";

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::BadConfig, kModule, field + ": " + message);
}

template <typename Fn>
void for_each_key(const ojson& j, const std::string& field, Fn&& apply) {
  if (!j.is_object()) bad(field, "must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string path = field.empty() ? it.key() : field + "." + it.key();
    if (!apply(it.key(), it.value(), path)) bad(path, "unknown key");
  }
}

std::string string_of(const ojson& v, const std::string& field) {
  if (!v.is_string()) bad(field, "must be a string");
  return v.get<std::string>();
}

bool bool_of(const ojson& v, const std::string& field) {
  if (!v.is_boolean()) bad(field, "must be true or false");
  return v.get<bool>();
}

double number_of(const ojson& v, const std::string& field) {
  if (!v.is_number()) bad(field, "must be a number");
  return v.get<double>();
}

long int_of(const ojson& v, const std::string& field, long lo) {
  if (!v.is_number_integer()) bad(field, "must be an integer");
  const long value = v.get<long>();
  if (value < lo) bad(field, "must be >= " + std::to_string(lo));
  return value;
}

std::uint64_t seed_of(const ojson& v, const std::string& field) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long>() >= 0)) {
    bad(field, "must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

ModelSpec parse_model(const ojson& j, const std::string& field) {
  ModelSpec spec;
  bool has_kind = false;
  const ojson* grid = nullptr;
  for_each_key(j, field, [&](const std::string& k, const ojson& v, const std::string& path) {
    if (k == "kind") {
      try {
        spec.kind = parse_model_kind(string_of(v, path));
      } catch (const Error&) {
        bad(path, "unknown model kind '" + v.get<std::string>() + "'");
      }
      has_kind = true;
    } else if (k == "grid") {
      grid = &v;
    } else if (k == "seed") {
      spec.seed = seed_of(v, path);
    } else {
      return false;
    }
    return true;
  });
  if (!has_kind) bad(field + ".kind", "is required");
  if (grid == nullptr) {
    spec.grid = default_grid(spec.kind);
    return spec;
  }
  for_each_key(*grid, field + ".grid", [&](const std::string& k, const ojson& v, const std::string& path) {
    if (!v.is_array() || v.empty()) bad(path, "must be a non-empty list of values");
    GridDimension dim{k, {}};
    for (const auto& value : v) dim.values.push_back(json::parse(value.dump()));
    spec.grid.push_back(std::move(dim));
    return true;
  });
  try {
    expand_grid(spec.kind, spec.grid);
  } catch (const Error& e) {
    bad(field + ".grid", e.what());
  }
  return spec;
}

SynthConfig parse_synth(const ojson& j, const std::string& field) {
  SynthConfig s;
  for_each_key(j, field, [&](const std::string& k, const ojson& v, const std::string& path) {
    if (k == "specs") {
      if (v.is_string() && v == "demo") return true;
      try {
        s.specs = specs_from_json(json::parse(v.dump()));
      } catch (const Error& e) {
        bad(path, e.what());
      }
    } else if (k == "noise_std") {
      s.noise_std = number_of(v, path);
      if (!(s.noise_std >= 0.0)) bad(path, "must be >= 0");
    } else if (k == "cells_per_spec") {
      s.cells_per_spec = static_cast<int>(int_of(v, path, 1));
    } else if (k == "cycles_per_cell") {
      s.cycles_per_cell = static_cast<int>(int_of(v, path, 1));
    } else if (k == "sweeps_per_spec") {
      s.sweeps_per_spec = static_cast<int>(int_of(v, path, 1));
    } else if (k == "n_points") {
      s.n_points = static_cast<int>(int_of(v, path, 64));
    } else if (k == "n_freq") {
      s.n_freq = static_cast<int>(int_of(v, path, 8));
    } else if (k == "seed") {
      s.seed = seed_of(v, path);
    } else {
      return false;
    }
    return true;
  });
  return s;
}

void parse_eval(const ojson& j, RunConfig& c) {
  for_each_key(j, "eval", [&](const std::string& k, const ojson& v, const std::string& path) {
    if (k == "tasks") {
      if (!v.is_array() || v.empty()) bad(path, "must be a non-empty list");
      c.identification = c.authentication = false;
      for (const auto& t : v) {
        const auto name = string_of(t, path);
        if (name == "identification") c.identification = true;
        else if (name == "authentication") c.authentication = true;
        else bad(path, "unknown task '" + name + "' (identification, authentication)");
      }
    } else if (k == "targets") {
      if (!v.is_array() || v.empty()) bad(path, "must be a non-empty list");
      c.eval.targets.clear();
      for (const auto& t : v) {
        const auto name = string_of(t, path);
        if (name == "architecture") c.eval.targets.push_back(Target::Architecture);
        else if (name == "model") c.eval.targets.push_back(Target::Model);
        else bad(path, "unknown target '" + name + "' (architecture, model)");
      }
    } else if (k == "train_ratio") {
      c.eval.train_ratio = number_of(v, path);
      if (!(c.eval.train_ratio > 0.0 && c.eval.train_ratio < 1.0)) bad(path, "must lie in (0, 1)");
    } else if (k == "stratified") {
      c.eval.stratified = bool_of(v, path);
    } else if (k == "undersample_before_split") {
      c.eval.undersample_before_split = bool_of(v, path);
    } else if (k == "balances") {
      if (!v.is_array() || v.empty()) bad(path, "must be a non-empty list");
      c.eval.balances.clear();
      for (const auto& b : v) {
        const int level = static_cast<int>(int_of(b, path, 1));
        try {
          validate_balance(level);
        } catch (const Error&) {
          bad(path, "balance levels must be among 50, 40, 30, 20");
        }
        c.eval.balances.push_back(level);
      }
    } else if (k == "seed") {
      c.eval.seed = seed_of(v, path);
    } else if (k == "cv_folds") {
      c.eval.cv_folds = static_cast<int>(int_of(v, path, 2));
    } else {
      return false;
    }
    return true;
  });
}

}  // namespace

std::vector<SyntheticCellSpec> SynthConfig::resolved_specs() const {
  return specs.empty() ? demo_specs(noise_std) : specs;
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    bad("config", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) bad("config", "must be a JSON object");

  RunConfig c;
  bool has_pipeline = false, has_input = false;
  std::optional<bool> selection_enabled;
  for_each_key(root, "", [&](const std::string& k, const ojson& v, const std::string& path) {
    if (k == "pipeline") {
      const auto name = string_of(v, path);
      if (name == "dca") c.pipeline = PipelineKind::Dca;
      else if (name == "eis") c.pipeline = PipelineKind::Eis;
      else bad(path, "must be 'dca' or 'eis'");
      has_pipeline = true;
    } else if (k == "paths") {
      for_each_key(v, path, [&](const std::string& pk, const ojson& pv, const std::string& pp) {
        if (pk == "input") {
          c.input = (base_dir / string_of(pv, pp)).lexically_normal();
          has_input = true;
        } else if (pk == "output_dir") {
          c.output_dir = (base_dir / string_of(pv, pp)).lexically_normal();
        } else {
          return false;
        }
        return true;
      });
    } else if (k == "meta_defaults") {
      for_each_key(v, path, [&](const std::string& mk, const ojson& mv, const std::string& mp) {
        if (mk == "dataset_id") c.meta_defaults.dataset_id = string_of(mv, mp);
        else if (mk == "cell_id") c.meta_defaults.cell_id = string_of(mv, mp);
        else if (mk == "battery_model") c.meta_defaults.battery_model = string_of(mv, mp);
        else if (mk == "architecture") c.meta_defaults.architecture = string_of(mv, mp);
        else return false;
        return true;
      });
    } else if (k == "dca") {
      for_each_key(v, path, [&](const std::string& dk, const ojson& dv, const std::string& dp) {
        if (dk == "eps_volts") {
          c.dca.eps_volts = number_of(dv, dp);
          if (!(c.dca.eps_volts > 0.0)) bad(dp, "must be > 0");
        } else if (dk == "savgol_window") {
          c.dca.savgol_window = static_cast<int>(int_of(dv, dp, 1));
          if (c.dca.savgol_window % 2 == 0) bad(dp, "must be odd");
        } else if (dk == "savgol_polyorder") {
          c.dca.savgol_polyorder = static_cast<int>(int_of(dv, dp, 0));
        } else if (dk == "resample_n") {
          c.dca.resample_n = static_cast<int>(int_of(dv, dp, 2));
        } else {
          return false;
        }
        return true;
      });
      if (c.dca.savgol_polyorder >= c.dca.savgol_window) bad(path + ".savgol_polyorder", "must be below savgol_window");
    } else if (k == "eis") {
      for_each_key(v, path, [&](const std::string& ek, const ojson& ev, const std::string& ep) {
        if (ek != "m") return false;
        c.eis.m = static_cast<int>(int_of(ev, ep, 2));
        return true;
      });
    } else if (k == "catalog_version") {
      c.catalog_version = string_of(v, path);
      if (c.catalog_version != kCatalogVersion) {
        bad(path, "unsupported catalog version (this build provides " + std::string(kCatalogVersion) + ")");
      }
    } else if (k == "selection") {
      for_each_key(v, path, [&](const std::string& sk, const ojson& sv, const std::string& sp) {
        if (sk == "enabled") {
          selection_enabled = bool_of(sv, sp);
        } else if (sk == "fdr") {
          c.eval.fdr = number_of(sv, sp);
          if (!(c.eval.fdr > 0.0 && c.eval.fdr < 1.0)) bad(sp, "must lie in (0, 1)");
        } else {
          return false;
        }
        return true;
      });
    } else if (k == "models") {
      if (!v.is_array() || v.empty()) bad(path, "must be a non-empty list");
      for (std::size_t i = 0; i < v.size(); ++i) c.models.push_back(parse_model(v[i], path + "[" + std::to_string(i) + "]"));
    } else if (k == "eval") {
      parse_eval(v, c);
    } else if (k == "threads") {
      c.threads = static_cast<int>(int_of(v, path, 1));
    } else if (k == "synth") {
      c.synth = parse_synth(v, path);
    } else {
      return false;
    }
    return true;
  });
  if (!has_pipeline) bad("pipeline", "is required");
  if (!has_input && !c.synth) bad("paths.input", "is required unless a synth block is given");
  if (c.catalog_version.empty()) c.catalog_version = kCatalogVersion;
  if (c.models.empty()) c.models.push_back(default_spec(ModelKind::RandomForest));
  c.eval.select_features = selection_enabled.value_or(c.pipeline == PipelineKind::Eis);

  ojson canonical = root;
  canonical.erase("threads");
  c.canonical = json::parse(canonical.dump());
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::BadConfig, kModule, path.string() + ": cannot read config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::optional<int> threads_from_env() {
  const char* value = std::getenv("BATAUTH_THREADS");
  if (value == nullptr || *value == '\0') return std::nullopt;
  int threads = 0;
  const std::string_view text(value);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), threads);
  if (ec != std::errc() || ptr != text.data() + text.size() || threads < 1) {
    throw Error(ErrorCode::BadConfig, kModule, "BATAUTH_THREADS must be a positive integer");
  }
  return threads;
}

}  // namespace batauth
