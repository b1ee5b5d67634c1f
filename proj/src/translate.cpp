#include "transsent/translate.hpp"

#include <cmath>
#include <string>

#include "transsent/errors.hpp"

namespace transsent {

void RelationConfig::validate() const {
  if (repr_dim <= 0 || relation_dim <= 0)
    throw UsageError("relation dims must be positive");
  if (ratio_eps < 0.0) throw UsageError("ratio_eps must be non-negative");
}

RelationNet::RelationNet(RelationConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  const int k = cfg_.repr_dim;
  const int d = cfg_.relation_dim;
  nn::Rng rng(init_seed);

  trans_w_ = &params_.add("trans.w", 2 * d, d);
  trans_w_->value =
      nn::Matrix::rand_uniform(2 * d, d, 1.0 / std::sqrt(2.0 * d), rng);
  trans_b_ = &params_.add("trans.b", 1, d);

  for (int m = 0; m < kNumMarkers; ++m) {
    const std::string pre = "rel." + std::string(marker_name(kAllMarkers[m])) + ".";
    PerMarker& pm = per_marker_[m];
    pm.z_r = &params_.add(pre + "z", 1, d);
    pm.z_r->value = nn::Matrix::randn(1, d, 0.02, rng);
    // near-identity start so the projection is initially a pass-through
    pm.m_r = &params_.add(pre + "m", k, d);
    pm.m_r->value = nn::Matrix::randn(k, d, 0.01, rng);
    for (int i = 0; i < std::min(k, d); ++i) pm.m_r->value.at(i, i) += 1.0;
    pm.inv_w1 = &params_.add(pre + "inv.w1", d, k);
    pm.inv_w1->value = nn::Matrix::rand_uniform(d, k, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    pm.inv_b1 = &params_.add(pre + "inv.b1", 1, k);
    pm.inv_w2 = &params_.add(pre + "inv.w2", k, k);
    pm.inv_w2->value = nn::Matrix::rand_uniform(k, k, 1.0 / std::sqrt(static_cast<double>(k)), rng);
    pm.inv_b2 = &params_.add(pre + "inv.b2", 1, k);
  }
}

nn::VarId RelationNet::build_project(nn::Tape& t, nn::Binding& b, nn::VarId z, Marker r) const {
  return t.matmul(z, b(*per_marker_[static_cast<int>(r)].m_r));
}

nn::VarId RelationNet::build_translate(nn::Tape& t, nn::Binding& b, nn::VarId z_h_r,
                                       Marker r) const {
  const PerMarker& pm = per_marker_[static_cast<int>(r)];
  nn::VarId cat = t.concat_cols({z_h_r, b(*pm.z_r)});
  nn::VarId out = t.matmul(cat, b(*trans_w_));
  if (cfg_.translation_bias) out = t.add_row(out, b(*trans_b_));
  return out;
}

nn::VarId RelationNet::build_invert(nn::Tape& t, nn::Binding& b, nn::VarId z_t_r_star,
                                    Marker r) const {
  const PerMarker& pm = per_marker_[static_cast<int>(r)];
  nn::VarId hidden = t.relu(t.add_row(t.matmul(z_t_r_star, b(*pm.inv_w1)), b(*pm.inv_b1)));
  return t.add_row(t.matmul(hidden, b(*pm.inv_w2)), b(*pm.inv_b2));
}

nn::Matrix RelationNet::project(const nn::Matrix& z, Marker r) const {
  nn::Tape t;
  nn::Binding b(t, false);
  return t.val(build_project(t, b, t.constant(z), r));
}

nn::Matrix RelationNet::translate(const nn::Matrix& z_h_r, Marker r) const {
  nn::Tape t;
  nn::Binding b(t, false);
  return t.val(build_translate(t, b, t.constant(z_h_r), r));
}

nn::Matrix RelationNet::invert(const nn::Matrix& z_t_r_star, Marker r) const {
  nn::Tape t;
  nn::Binding b(t, false);
  return t.val(build_invert(t, b, t.constant(z_t_r_star), r));
}

double distance_loss(const nn::Matrix& a, const nn::Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s;
}

nn::VarId build_squared_distance(nn::Tape& t, nn::VarId a, nn::VarId b) {
  nn::VarId d = t.sub(a, b);
  return t.sum(t.mul(d, d));
}

double ratio_loss(const RelationNet& net, const nn::Matrix& z_h_r, Marker r,
                  const nn::Matrix& z_t_r, double eps) {
  const nn::Matrix translated = net.translate(z_h_r, r);
  const double num = distance_loss(translated, z_t_r);
  const double den = distance_loss(translated, z_h_r) + eps;
  return num / den;
}

nn::VarId build_ratio_loss(nn::Tape& t, nn::VarId translated, nn::VarId z_h_r, nn::VarId z_t_r,
                           double eps) {
  nn::VarId num = build_squared_distance(t, translated, z_t_r);
  nn::VarId den = t.add_scalar(build_squared_distance(t, translated, z_h_r), eps);
  return t.div(num, den);
}

}  // namespace transsent
