#include "dagprl/checkpoint.hpp"

#include <vector>

namespace dagprl {

namespace {

Json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const Json& j, const char* field) {
  if (!j.is_array()) throw CheckpointError(std::string("field '") + field + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw CheckpointError(std::string("field '") + field + "' must hold numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw CheckpointError(std::string("missing field '") + name + "'");
  return j.at(name);
}

double number(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number()) throw CheckpointError(std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

Json matrix_rows_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

void expect_type(const Json& j, const std::string& expected) {
  const std::string got = checkpoint_type(j);
  if (got != expected) throw CheckpointError("expected a '" + expected + "' checkpoint, got '" + got + "'");
}

Json gps_to_json(const std::vector<SparseGp>& gps) {
  Json a = Json::array();
  for (const auto& g : gps) a.push_back(gp_to_json(g));
  return a;
}

std::vector<SparseGp> gps_from_json(const Json& j, const char* name) {
  const Json& a = field(j, name);
  if (!a.is_array()) throw CheckpointError(std::string("field '") + name + "' must be an array");
  std::vector<SparseGp> out;
  for (const auto& g : a) out.push_back(gp_from_json(g));
  return out;
}

}  // namespace

Json gp_to_json(const SparseGp& gp) {
  const auto q = gp.posterior();
  const Eigen::Index m = gp.num_inducing();
  std::vector<double> packed;
  packed.reserve(static_cast<std::size_t>(m * (m + 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k <= i; ++k) packed.push_back(q.covariance_factor(i, k));
  Json j;
  j["kernel"] = {{"log_signal_variance", gp.kernel().log_signal_variance},
                 {"log_lengthscales", vector_to_json(gp.kernel().log_lengthscales)}};
  j["inducing_inputs"] = matrix_rows_to_json(gp.inducing_inputs());
  j["q_mean"] = vector_to_json(q.mean);
  j["q_chol_lower_triangular"] = packed;
  j["mean_function"] = gp.mean_function();
  return j;
}

SparseGp gp_from_json(const Json& j) {
  const Json& k = field(j, "kernel");
  KernelParams kernel{number(k, "log_signal_variance"), vector_from_json(field(k, "log_lengthscales"), "log_lengthscales")};
  const Json& rows = field(j, "inducing_inputs");
  if (!rows.is_array() || rows.empty()) throw CheckpointError("field 'inducing_inputs' must be a nonempty array");
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd z(m, kernel.dim());
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::VectorXd row = vector_from_json(rows[static_cast<std::size_t>(i)], "inducing_inputs");
    if (row.size() != kernel.dim()) throw CheckpointError("inducing input width does not match the kernel");
    z.row(i) = row.transpose();
  }
  const Eigen::VectorXd mean = vector_from_json(field(j, "q_mean"), "q_mean");
  const Eigen::VectorXd packed = vector_from_json(field(j, "q_chol_lower_triangular"), "q_chol_lower_triangular");
  if (mean.size() != m || packed.size() != m * (m + 1) / 2) {
    throw CheckpointError("variational posterior size does not match the inducing inputs");
  }
  Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(m, m);
  Eigen::Index off = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index c = 0; c <= i; ++c) factor(i, c) = packed(off++);
  try {
    SparseGp gp(kernel, z, number(j, "mean_function"));
    gp.set_posterior({mean, factor});
    return gp;
  } catch (const ContractViolation& e) {
    throw CheckpointError(std::string("invalid GP fragment: ") + e.what());
  }
}

Json standardizer_to_json(const Standardizer& s) {
  return {{"input_mean", vector_to_json(s.input_mean)},
          {"input_scale", vector_to_json(s.input_scale)},
          {"output_mean", vector_to_json(s.output_mean)},
          {"output_scale", vector_to_json(s.output_scale)}};
}

Standardizer standardizer_from_json(const Json& j) {
  Standardizer s;
  const auto read = [&](const char* name, auto& dst) {
    const Eigen::VectorXd v = vector_from_json(field(j, name), name);
    if (v.size() != dst.size()) throw CheckpointError(std::string("field '") + name + "' has the wrong length");
    dst = v;
  };
  read("input_mean", s.input_mean);
  read("input_scale", s.input_scale);
  read("output_mean", s.output_mean);
  read("output_scale", s.output_scale);
  return s;
}

Json dagp_to_json(const DagpModel& model) {
  Json j;
  j["type"] = "dagp";
  j["K"] = model.modes;
  j["noise_floor"] = model.noise_floor;
  j["standardizer"] = standardizer_to_json(model.standardizer);
  j["flow_gps"] = gps_to_json(model.flow);
  j["noise_gps"] = gps_to_json(model.noise);
  j["assign_gps"] = gps_to_json(model.assign);
  return j;
}

DagpModel dagp_from_json(const Json& j) {
  expect_type(j, "dagp");
  DagpModel m;
  m.modes = static_cast<int>(number(j, "K"));
  m.noise_floor = number(j, "noise_floor");
  m.standardizer = standardizer_from_json(field(j, "standardizer"));
  m.flow = gps_from_json(j, "flow_gps");
  m.noise = gps_from_json(j, "noise_gps");
  m.assign = gps_from_json(j, "assign_gps");
  try {
    m.validate();
  } catch (const ContractViolation& e) {
    throw CheckpointError(std::string("invalid DAGP checkpoint: ") + e.what());
  }
  return m;
}

Json plain_gp_to_json(const PlainGpModel& model) {
  Json j;
  j["type"] = "plain_gp";
  j["standardizer"] = standardizer_to_json(model.standardizer);
  j["flow_gps"] = gps_to_json(model.flow);
  j["log_noise_variance"] = vector_to_json(model.log_noise_variance);
  return j;
}

PlainGpModel plain_gp_from_json(const Json& j) {
  expect_type(j, "plain_gp");
  PlainGpModel m;
  m.standardizer = standardizer_from_json(field(j, "standardizer"));
  m.flow = gps_from_json(j, "flow_gps");
  const Eigen::VectorXd noise = vector_from_json(field(j, "log_noise_variance"), "log_noise_variance");
  if (noise.size() != 2) throw CheckpointError("field 'log_noise_variance' needs two entries");
  m.log_noise_variance = noise;
  try {
    m.validate();
  } catch (const ContractViolation& e) {
    throw CheckpointError(std::string("invalid plain GP checkpoint: ") + e.what());
  }
  return m;
}

Json mlp_to_json(const Mlp& net, const std::string& type) {
  Json j;
  j["type"] = type;
  j["layer_sizes"] = net.layer_sizes();
  Json acts = Json::array();
  Json weights = Json::array();
  Json biases = Json::array();
  for (const auto& l : net.layers()) {
    acts.push_back(to_string(l.activation));
    std::vector<double> w;
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    weights.push_back(w);
    biases.push_back(vector_to_json(l.bias));
  }
  j["activations"] = acts;
  j["weights"] = weights;
  j["biases"] = biases;
  return j;
}

Mlp mlp_from_json(const Json& j, const std::string& expected_type) {
  expect_type(j, expected_type);
  const Json& sizes_json = field(j, "layer_sizes");
  const Json& acts = field(j, "activations");
  const Json& weights = field(j, "weights");
  const Json& biases = field(j, "biases");
  if (!sizes_json.is_array() || sizes_json.size() < 2) throw CheckpointError("field 'layer_sizes' needs two or more entries");
  const std::size_t layers = sizes_json.size() - 1;
  if (!acts.is_array() || !weights.is_array() || !biases.is_array() || acts.size() != layers ||
      weights.size() != layers || biases.size() != layers) {
    throw CheckpointError("MLP checkpoint arrays disagree with layer_sizes");
  }
  std::vector<DenseLayer> out;
  for (std::size_t i = 0; i < layers; ++i) {
    const int in = sizes_json[i].get<int>();
    const int o = sizes_json[i + 1].get<int>();
    const Eigen::VectorXd w = vector_from_json(weights[i], "weights");
    const Eigen::VectorXd b = vector_from_json(biases[i], "biases");
    if (in < 1 || o < 1 || w.size() != static_cast<Eigen::Index>(in) * o || b.size() != o) {
      throw CheckpointError("MLP layer " + std::to_string(i) + " has the wrong shape");
    }
    DenseLayer l;
    l.weights.resize(o, in);
    for (int r = 0; r < o; ++r)
      for (int c = 0; c < in; ++c) l.weights(r, c) = w(static_cast<Eigen::Index>(r) * in + c);
    l.bias = b;
    try {
      l.activation = activation_from_string(acts[i].get<std::string>());
    } catch (const std::exception& e) {
      throw CheckpointError(e.what());
    }
    out.push_back(std::move(l));
  }
  return Mlp(std::move(out));
}

Json qnet_to_json(const QNet& q, const ActionGrid& grid) {
  Json j = mlp_to_json(q.net, "qnet");
  j["value_scale"] = q.value_scale;
  j["value_offset"] = q.value_offset;
  Json g = Json::array();
  for (const auto& a : grid) g.push_back({a.ax, a.ay});
  j["action_grid"] = g;
  return j;
}

QNet qnet_from_json(const Json& j, ActionGrid* grid) {
  QNet q;
  q.net = mlp_from_json(j, "qnet");
  if (q.net.input_dim() != 4 || q.net.output_dim() != 1) throw CheckpointError("Q network must map 4 inputs to 1 output");
  q.value_scale = number(j, "value_scale");
  q.value_offset = number(j, "value_offset");
  if (grid != nullptr) {
    grid->clear();
    for (const auto& a : field(j, "action_grid")) {
      const Eigen::VectorXd v = vector_from_json(a, "action_grid");
      if (v.size() != 2) throw CheckpointError("action grid entries need two components");
      grid->push_back({v(0), v(1)});
    }
    if (grid->empty()) throw CheckpointError("action grid must not be empty");
  }
  return q;
}

std::string checkpoint_type(const Json& j) {
  const Json& t = field(j, "type");
  if (!t.is_string()) throw CheckpointError("field 'type' must be a string");
  return t.get<std::string>();
}

std::unique_ptr<TransitionModel> transition_model_from_json(const Json& j) {
  const std::string type = checkpoint_type(j);
  if (type == "dagp") return std::make_unique<DagpTransition>(dagp_from_json(j));
  if (type == "plain_gp") return std::make_unique<PlainGpTransition>(plain_gp_from_json(j));
  throw CheckpointError("'" + type + "' checkpoint is not a dynamics model");
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw CheckpointError(what + ": " + e.what());
  }
}

}  // namespace dagprl
