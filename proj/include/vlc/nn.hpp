#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "vlc/ops.hpp"

namespace vlc {

using Rng = std::mt19937_64;

// A named view of one trainable tensor. `decay_group` marks tensors that
// receive decoupled weight decay; `lr_scale` carries layer-wise decay.
template <typename T>
struct NamedParam {
  std::string name;
  BasicTensor<T>* tensor = nullptr;
  bool decay = true;
  double lr_scale = 1.0;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
std::size_t count_parameters(const ParamList<T>& params) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor->numel();
  return total;
}

template <typename T>
BasicTensor<T> make_param(Shape shape, T fill = T(0)) {
  return BasicTensor<T>(std::move(shape), fill, /*requires_grad=*/true);
}

// Normal(0, std) truncated to two standard deviations.
template <typename T>
void init_trunc_normal(BasicTensor<T>& t, Rng& rng, double std = 0.02) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.mutable_data()) {
    double x;
    do x = dist(rng);
    while (std::abs(x) > 2.0);
    v = static_cast<T>(x * std);
  }
}

template <typename T>
void init_uniform(BasicTensor<T>& t, Rng& rng, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.mutable_data()) v = static_cast<T>(dist(rng));
}

template <typename T>
struct Linear {
  BasicTensor<T> weight;  // [in, out]
  BasicTensor<T> bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng)
      : weight(make_param<T>({in, out})), bias(make_param<T>({out})) {
    init_uniform(weight, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  }

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return add(matmul(x, weight), bias); }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight, true});
    out.push_back({prefix + ".bias", &bias, false});
  }
};

template <typename T>
struct LayerNorm {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  T eps = T(1e-6);

  LayerNorm() = default;
  explicit LayerNorm(std::size_t d, T eps_ = T(1e-6))
      : gamma(make_param<T>({d}, T(1))), beta(make_param<T>({d})), eps(eps_) {}

  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return layer_norm(x, gamma, beta, eps); }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma, false});
    out.push_back({prefix + ".beta", &beta, false});
  }
};

// Copies values between two parameter lists of identical layout, converting
// the scalar type (used to build the float64 finite-difference twin).
template <typename To, typename From>
void copy_parameters(const ParamList<From>& src, ParamList<To>& dst) {
  if (src.size() != dst.size()) throw ShapeError("copy_parameters: parameter lists differ in length");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || src[i].tensor->shape() != dst[i].tensor->shape()) {
      throw ShapeError("copy_parameters: mismatch at " + src[i].name);
    }
    auto s = src[i].tensor->data();
    auto d = dst[i].tensor->mutable_data();
    for (std::size_t k = 0; k < s.size(); ++k) d[k] = static_cast<To>(s[k]);
  }
}

}  // namespace vlc
