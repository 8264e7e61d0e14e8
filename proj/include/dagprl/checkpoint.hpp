#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "dagprl/baselines.hpp"
#include "dagprl/dagp.hpp"
#include "dagprl/mlp.hpp"

namespace dagprl {

/// Malformed checkpoint, or a checkpoint of the wrong kind for the caller.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

/// {kernel: {log_signal_variance, log_lengthscales[]}, inducing_inputs[][],
///  q_mean[], q_chol_lower_triangular[] (row-major packed), mean_function}
Json gp_to_json(const SparseGp& gp);
SparseGp gp_from_json(const Json& j);

Json standardizer_to_json(const Standardizer& s);
Standardizer standardizer_from_json(const Json& j);

/// {type: "dagp", K, noise_floor, standardizer, flow_gps[], noise_gps[], assign_gps[]}
Json dagp_to_json(const DagpModel& model);
DagpModel dagp_from_json(const Json& j);

/// {type: "plain_gp", standardizer, flow_gps[2], log_noise_variance[2]}
Json plain_gp_to_json(const PlainGpModel& model);
PlainGpModel plain_gp_from_json(const Json& j);

/// {type, layer_sizes[], activations[], weights[][] (row-major per layer), biases[][]}
Json mlp_to_json(const Mlp& net, const std::string& type);
Mlp mlp_from_json(const Json& j, const std::string& expected_type);

/// MLP document with type "qnet" plus value_scale, value_offset, action_grid[][].
Json qnet_to_json(const QNet& q, const ActionGrid& grid);
QNet qnet_from_json(const Json& j, ActionGrid* grid);

/// "dagp", "plain_gp", "policy", "qnet"; throws CheckpointError when absent.
std::string checkpoint_type(const Json& j);

/// Loads either transition model kind behind the common sampler interface.
std::unique_ptr<TransitionModel> transition_model_from_json(const Json& j);

Json parse_json(const std::string& text, const std::string& what);

}  // namespace dagprl
