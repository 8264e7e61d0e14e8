#include "dagprl/transition_model.hpp"

namespace dagprl {

TransitionNoise TransitionNoise::draw(Rng& rng) {
  TransitionNoise n;
  for (auto& a : n.assignment) a = standard_normal(rng);
  n.mode_uniform = uniform(rng, 0.0, 1.0);
  for (int d = 0; d < 2; ++d) n.flow(d) = standard_normal(rng);
  for (int d = 0; d < 2; ++d) n.log_noise(d) = standard_normal(rng);
  for (int d = 0; d < 2; ++d) n.observation(d) = standard_normal(rng);
  return n;
}

}  // namespace dagprl
