#ifndef TRANSSENT_TRANSLATE_HPP
#define TRANSSENT_TRANSLATE_HPP

#include <array>
#include <cstdint>

#include "transsent/corpus.hpp"
#include "transsent/nn/params.hpp"
#include "transsent/nn/tape.hpp"

namespace transsent {

struct RelationConfig {
  int repr_dim = 64;      // k, discourse space
  int relation_dim = 64;  // d, relation space; k != d is fine
  bool translation_bias = true;
  double ratio_eps = 1e-8;  // guard for the ratio denominator

  void validate() const;
};

// Per-marker projection into relation space, shared translation map, and
// per-marker feed-forward inverse back into discourse space.
class RelationNet {
 public:
  RelationNet(RelationConfig cfg, std::uint64_t init_seed);

  const RelationConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // z (1 x k) -> z * M_r (1 x d)
  nn::VarId build_project(nn::Tape& t, nn::Binding& b, nn::VarId z, Marker r) const;
  // z_h_r (1 x d) -> W'[z_h_r ++ z_r] (1 x d), linear (optional bias)
  nn::VarId build_translate(nn::Tape& t, nn::Binding& b, nn::VarId z_h_r, Marker r) const;
  // relation space -> discourse space via the per-marker feed-forward map
  nn::VarId build_invert(nn::Tape& t, nn::Binding& b, nn::VarId z_t_r_star, Marker r) const;

  nn::Matrix project(const nn::Matrix& z, Marker r) const;
  nn::Matrix translate(const nn::Matrix& z_h_r, Marker r) const;
  nn::Matrix invert(const nn::Matrix& z_t_r_star, Marker r) const;

 private:
  struct PerMarker {
    nn::Parameter* z_r;    // 1 x d
    nn::Parameter* m_r;    // k x d
    nn::Parameter* inv_w1; // d x k
    nn::Parameter* inv_b1; // 1 x k
    nn::Parameter* inv_w2; // k x k
    nn::Parameter* inv_b2; // 1 x k
  };

  RelationConfig cfg_;
  nn::ParamStore params_;
  nn::Parameter* trans_w_;  // 2d x d
  nn::Parameter* trans_b_;  // 1 x d
  std::array<PerMarker, kNumMarkers> per_marker_;
};

// squared L2 distance, the relation-space distance loss
double distance_loss(const nn::Matrix& a, const nn::Matrix& b);
nn::VarId build_squared_distance(nn::Tape& t, nn::VarId a, nn::VarId b);

// ||T - z_t_r||^2 / (||T - z_h_r||^2 + eps) with T = translate(z_h_r, r)
double ratio_loss(const RelationNet& net, const nn::Matrix& z_h_r, Marker r,
                  const nn::Matrix& z_t_r, double eps);
nn::VarId build_ratio_loss(nn::Tape& t, nn::VarId translated, nn::VarId z_h_r, nn::VarId z_t_r,
                           double eps);

}  // namespace transsent

#endif  // TRANSSENT_TRANSLATE_HPP
