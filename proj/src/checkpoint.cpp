#include "sfnn/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sfnn/error.hpp"

namespace sfnn {

namespace {

using nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void schema(const std::string& what) { throw IoError("checkpoint schema: " + what); }

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) schema(std::string("missing field '") + key + "'");
  return j.at(key);
}

double number(const json& j, const char* what) {
  // JSON has no NaN or infinity; the serializer writes them as null.
  if (j.is_null()) throw NumericalError(std::string("checkpoint: non-finite ") + what);
  if (!j.is_number()) schema(std::string(what) + " is not a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw NumericalError(std::string("checkpoint: non-finite ") + what);
  return v;
}

std::size_t count(const json& j, const char* what) {
  if (!j.is_number_unsigned()) schema(std::string(what) + " is not a non-negative integer");
  return j.get<std::size_t>();
}

std::string text(const json& j, const char* what) {
  if (!j.is_string()) schema(std::string(what) + " is not a string");
  return j.get<std::string>();
}

bool flag(const json& j, const char* what) {
  if (!j.is_boolean()) schema(std::string(what) + " is not a boolean");
  return j.get<bool>();
}

std::vector<double> numbers(const json& j, const char* what) {
  if (!j.is_array()) schema(std::string(what) + " is not an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(number(v, what));
  return out;
}

template <class F>
auto wrap(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    schema(e.what());
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    schema(e.what());
  }
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Dnn: return "dnn";
    case Stage::Transferred: return "transferred";
    case Stage::Finetuned: return "finetuned";
  }
  return "";
}

Stage parse_stage(std::string_view s) {
  for (Stage v : {Stage::Dnn, Stage::Transferred, Stage::Finetuned}) {
    if (to_string(v) == s) return v;
  }
  schema("unknown stage '" + std::string(s) + "'");
}

json spec_to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json o;
    o["width"] = l.width;
    std::visit(overloaded{[&](const Deterministic& d) {
                            o["kind"] = "deterministic";
                            o["activation"] = std::string(to_string(d.activation));
                          },
                          [&](const StochasticBinary& s) {
                            o["kind"] = "stochastic";
                            std::visit(overloaded{[&](const DirectSigmoid&) { o["marginal"] = "sigmoid"; },
                                                  [&](const ClippedScaled& c) {
                                                    o["marginal"] = "clipped";
                                                    o["alpha"] = c.alpha;
                                                    o["activation"] = std::string(to_string(c.activation));
                                                    o["centered"] = c.centered;
                                                  }},
                                       s.marginal);
                          },
                          [&](const Squash& q) {
                            o["kind"] = "squash";
                            o["alpha"] = q.alpha;
                            o["squash"] = std::string(to_string(q.squash));
                            o["activation"] = std::string(to_string(q.activation));
                            o["centered"] = q.centered;
                          }},
               l.kind);
    layers.push_back(o);
  }
  json head;
  std::visit(overloaded{[&](const SoftmaxHead& h) {
                          head["kind"] = "softmax";
                          head["classes"] = h.classes;
                        },
                        [&](const GaussianHead& h) {
                          head["kind"] = "gaussian";
                          head["dim"] = h.dim;
                          head["sigma_y"] = h.sigma_y;
                        }},
             spec.output);
  return {{"input_dim", spec.input_dim}, {"layers", layers}, {"output", head}};
}

NetworkSpec spec_from_json(const json& j) {
  return wrap([&] {
    NetworkSpec spec;
    spec.input_dim = count(field(j, "input_dim"), "input_dim");
    const json& layers = field(j, "layers");
    if (!layers.is_array()) schema("layers is not an array");
    for (const auto& o : layers) {
      LayerSpec l;
      l.width = count(field(o, "width"), "width");
      const std::string kind = text(field(o, "kind"), "kind");
      if (kind == "deterministic") {
        l.kind = Deterministic{parse_activation(text(field(o, "activation"), "activation"))};
      } else if (kind == "stochastic") {
        const std::string m = text(field(o, "marginal"), "marginal");
        if (m == "sigmoid") {
          l.kind = StochasticBinary{DirectSigmoid{}};
        } else if (m == "clipped") {
          l.kind = StochasticBinary{ClippedScaled{number(field(o, "alpha"), "alpha"),
                                                  parse_activation(text(field(o, "activation"), "activation")),
                                                  flag(field(o, "centered"), "centered")}};
        } else {
          schema("unknown marginal '" + m + "'");
        }
      } else if (kind == "squash") {
        l.kind = Squash{number(field(o, "alpha"), "alpha"), parse_squash(text(field(o, "squash"), "squash")),
                        parse_activation(text(field(o, "activation"), "activation")),
                        flag(field(o, "centered"), "centered")};
      } else {
        schema("unknown layer kind '" + kind + "'");
      }
      spec.layers.push_back(l);
    }
    const json& head = field(j, "output");
    const std::string hk = text(field(head, "kind"), "output kind");
    if (hk == "softmax") {
      spec.output = SoftmaxHead{count(field(head, "classes"), "classes")};
    } else if (hk == "gaussian") {
      spec.output = GaussianHead{count(field(head, "dim"), "dim"), number(field(head, "sigma_y"), "sigma_y")};
    } else {
      schema("unknown output head '" + hk + "'");
    }
    return spec;
  });
}

json params_to_json(const Params& params) {
  json layers = json::array();
  for (const auto& l : params.layers) {
    json rows = json::array();
    for (std::size_t r = 0; r < l.weights.rows(); ++r) {
      auto row = l.weights.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    layers.push_back({{"weights", rows}, {"bias", l.bias}});
  }
  return layers;
}

Params params_from_json(const json& j) {
  return wrap([&] {
    if (!j.is_array()) schema("params is not an array");
    Params p;
    for (const auto& o : j) {
      const json& rows = field(o, "weights");
      if (!rows.is_array()) schema("weights is not an array");
      std::vector<double> data;
      std::size_t cols = 0;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto row = numbers(rows[r], "weight");
        if (r == 0) cols = row.size();
        if (row.size() != cols) schema("ragged weight matrix");
        data.insert(data.end(), row.begin(), row.end());
      }
      p.layers.push_back({Matrix(rows.size(), cols, std::move(data)), numbers(field(o, "bias"), "bias")});
    }
    return p;
  });
}

json report_to_json(const TransferReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"layer", l.layer},
                      {"gamma_lower", l.gamma_lower},
                      {"gamma_upper", l.gamma_upper},
                      {"max_preactivation", l.max_preactivation},
                      {"bound", l.bound},
                      {"bound_uniform", l.bound_uniform},
                      {"tau", l.tau}});
  }
  json constants = json::array();
  for (const auto& c : r.constants) {
    constants.push_back({{"fan_in", c.fan_in}, {"w_max", c.w_max}, {"b_max", c.b_max}});
  }
  return {{"kind", std::string(to_string(r.kind))},
          {"squash", std::string(to_string(r.squash))},
          {"layers", layers},
          {"constants", constants},
          {"composed_bound", r.composed_bound}};
}

TransferReport report_from_json(const json& j) {
  return wrap([&] {
    TransferReport r;
    r.kind = parse_transfer_kind(text(field(j, "kind"), "kind"));
    r.squash = parse_squash(text(field(j, "squash"), "squash"));
    for (const auto& o : field(j, "layers")) {
      StochasticLayerReport l;
      l.layer = count(field(o, "layer"), "layer");
      l.gamma_lower = number(field(o, "gamma_lower"), "gamma_lower");
      l.gamma_upper = number(field(o, "gamma_upper"), "gamma_upper");
      l.max_preactivation = number(field(o, "max_preactivation"), "max_preactivation");
      l.bound = number(field(o, "bound"), "bound");
      l.bound_uniform = number(field(o, "bound_uniform"), "bound_uniform");
      l.tau = number(field(o, "tau"), "tau");
      r.layers.push_back(l);
    }
    for (const auto& o : field(j, "constants")) {
      r.constants.push_back({count(field(o, "fan_in"), "fan_in"), number(field(o, "w_max"), "w_max"),
                             number(field(o, "b_max"), "b_max")});
    }
    r.composed_bound = number(field(j, "composed_bound"), "composed_bound");
    return r;
  });
}

std::string serialize_checkpoint(const Checkpoint& c) {
  require_valid(c.model.spec);
  validate_params(c.model.spec, c.model.params);
  json j;
  j["format"] = kCheckpointFormat;
  j["format_version"] = kCheckpointVersion;
  j["spec"] = spec_to_json(c.model.spec);
  j["params"] = params_to_json(c.model.params);
  j["default_mode"] = std::string(to_string(c.model.default_mode));
  j["transfer_report"] = c.model.report ? report_to_json(*c.model.report) : json(nullptr);
  j["training"] = {{"stage", std::string(to_string(c.meta.stage))},
                   {"seed", c.meta.seed},
                   {"epochs", c.meta.epochs},
                   {"config_hash", c.meta.config_hash}};
  if (!c.provenance.is_null()) j["provenance"] = c.provenance;
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& input) {
  json j;
  try {
    j = json::parse(input);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format") || j["format"] != kCheckpointFormat) {
    throw IoError("not an sfnn checkpoint (bad format tag)");
  }
  if (!j.contains("format_version") || j["format_version"] != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  return wrap([&] {
    Checkpoint c;
    c.model.spec = spec_from_json(field(j, "spec"));
    c.model.params = params_from_json(field(j, "params"));
    c.model.default_mode = parse_eval_mode(text(field(j, "default_mode"), "default_mode"));
    const json& rep = field(j, "transfer_report");
    if (!rep.is_null()) c.model.report = report_from_json(rep);
    const json& t = field(j, "training");
    c.meta.stage = parse_stage(text(field(t, "stage"), "stage"));
    c.meta.seed = field(t, "seed").get<std::uint64_t>();
    c.meta.epochs = count(field(t, "epochs"), "epochs");
    c.meta.config_hash = text(field(t, "config_hash"), "config_hash");
    if (j.contains("provenance")) c.provenance = j.at("provenance");
    try {
      require_valid(c.model.spec);
      validate_params(c.model.spec, c.model.params);
    } catch (const ValidationError& e) {
      schema(e.what());
    }
    return c;
  });
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const std::string text = serialize_checkpoint(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

std::string fnv1a_hex(const std::string& input) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : input) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sfnn
