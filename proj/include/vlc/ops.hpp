#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "vlc/tensor.hpp"

namespace vlc {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// True when `small` equals the trailing dims of `big`.
inline bool is_suffix(const Shape& big, const Shape& small) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

inline void check_broadcast(const char* op, const Shape& a, const Shape& b) {
  if (!is_suffix(a, b)) {
    throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(b) + " onto " +
                     to_string(a));
  }
}

// out[o * nb + i] = f(a[o * nb + i], b[i]) for every outer block o.
template <typename T, typename F>
std::vector<T> broadcast_apply(std::span<const T> a, std::span<const T> b, F f) {
  const std::size_t nb = b.size();
  std::vector<T> out(a.size());
  for (std::size_t o = 0; o < a.size(); o += nb) {
    const T* ar = a.data() + o;
    T* yr = out.data() + o;
    for (std::size_t i = 0; i < nb; ++i) yr[i] = f(ar[i], b[i]);
  }
  return out;
}

// Sums a gradient laid out like `a` into b's suffix shape: acc[i] += s * g[o * nb + i].
template <typename T>
void reduce_into(const std::vector<T>& g, std::vector<T>& acc, T s) {
  const std::size_t nb = acc.size();
  for (std::size_t o = 0; o < g.size(); o += nb) {
    const T* gr = g.data() + o;
    for (std::size_t i = 0; i < nb; ++i) acc[i] += s * gr[i];
  }
}

}  // namespace detail

// Elementwise a + b, where b may be a trailing-dims suffix of a (bias, position rows).
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::check_broadcast("add", a.shape(), b.shape());
  auto out = detail::broadcast_apply<T>(a.data(), b.data(), [](T x, T y) { return x + y; });
  return make_result<T>("add", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad) detail::reduce_into(self.grad, pb.grad, T(1));
  });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::check_broadcast("sub", a.shape(), b.shape());
  auto out = detail::broadcast_apply<T>(a.data(), b.data(), [](T x, T y) { return x - y; });
  return make_result<T>("sub", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad) detail::reduce_into(self.grad, pb.grad, T(-1));
  });
}

// Elementwise product with the same suffix broadcasting as add.
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::check_broadcast("mul", a.shape(), b.shape());
  auto out = detail::broadcast_apply<T>(a.data(), b.data(), [](T x, T y) { return x * y; });
  return make_result<T>("mul", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const std::size_t nb = pb.data.size();
    for (std::size_t o = 0; o < self.grad.size(); o += nb)
      for (std::size_t i = 0; i < nb; ++i) {
        if (pa.requires_grad) pa.grad[o + i] += self.grad[o + i] * pb.data[i];
        if (pb.requires_grad) pb.grad[i] += self.grad[o + i] * pa.data[o + i];
      }
  });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return make_result<T>("scale", a.shape(), std::move(out), {a.node()}, [s](Node<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += s * self.grad[i];
  });
}

// Batched matrix product. b may carry the same batch dims as a, or none at all
// (a weight shared across the batch); likewise a may be a plain matrix.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto fail = [&](const std::string& why) {
    return ShapeError("matmul: " + why + " for shapes " + to_string(sa) + " and " + to_string(sb));
  };
  if (sa.size() < 2 || sb.size() < 2) throw fail("operands must have rank >= 2");
  const std::size_t i = sa[sa.size() - 2], k = sa.back();
  const std::size_t kb = sb[sb.size() - 2], j = sb.back();
  if (k != kb) throw fail("inner extents differ");
  const Shape batch_a(sa.begin(), sa.end() - 2);
  const Shape batch_b(sb.begin(), sb.end() - 2);
  Shape out_shape;
  enum class Mode { kSharedB, kSharedA, kBatched } mode;
  if (batch_b.empty()) {
    mode = Mode::kSharedB;
    out_shape = batch_a;
  } else if (batch_a.empty()) {
    mode = Mode::kSharedA;
    out_shape = batch_b;
  } else if (batch_a == batch_b) {
    mode = Mode::kBatched;
    out_shape = batch_a;
  } else {
    throw fail("batch extents are not broadcastable");
  }
  const std::size_t batches = numel(out_shape);
  out_shape.push_back(i);
  out_shape.push_back(j);
  std::vector<T> out(numel(out_shape));

  using CM = detail::ConstMapMat<T>;
  using MM = detail::MapMat<T>;
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  if (mode == Mode::kSharedB) {
    MM(out.data(), batches * i, j).noalias() = CM(ad, batches * i, k) * CM(bd, k, j);
  } else {
    for (std::size_t n = 0; n < batches; ++n) {
      const T* an = mode == Mode::kSharedA ? ad : ad + n * i * k;
      MM(out.data() + n * i * j, i, j).noalias() = CM(an, i, k) * CM(bd + n * k * j, k, j);
    }
  }
  return make_result<T>(
      "matmul", std::move(out_shape), std::move(out), {a.node(), b.node()},
      [=](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T* g = self.grad.data();
        if (mode == Mode::kSharedB) {
          CM gm(g, batches * i, j);
          if (pa.requires_grad)
            MM(pa.grad.data(), batches * i, k).noalias() += gm * CM(pb.data.data(), k, j).transpose();
          if (pb.requires_grad)
            MM(pb.grad.data(), k, j).noalias() += CM(pa.data.data(), batches * i, k).transpose() * gm;
          return;
        }
        for (std::size_t n = 0; n < batches; ++n) {
          CM gm(g + n * i * j, i, j);
          const std::size_t aoff = mode == Mode::kSharedA ? 0 : n * i * k;
          if (pa.requires_grad)
            MM(pa.grad.data() + aoff, i, k).noalias() += gm * CM(pb.data.data() + n * k * j, k, j).transpose();
          if (pb.requires_grad)
            MM(pb.grad.data() + n * k * j, k, j).noalias() += CM(pa.data.data() + aoff, i, k).transpose() * gm;
        }
      });
}

// Same values, new shape (a copy; tensors are immutable).
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {a.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

namespace detail {

// Gathers `src` (with shape `shape`) into the axis order `perm`.
template <typename T>
void permute_into(const T* src, const Shape& shape, const std::vector<std::size_t>& perm, T* dst,
                  bool accumulate) {
  const std::size_t r = shape.size();
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t d = r; d-- > 1;) in_strides[d - 1] = in_strides[d] * shape[d];
  Shape out_shape(r);
  std::vector<std::size_t> strides(r);
  for (std::size_t d = 0; d < r; ++d) {
    out_shape[d] = shape[perm[d]];
    strides[d] = in_strides[perm[d]];
  }
  const std::size_t total = numel(shape);
  if (total == 0) return;
  // Runs along an unmoved last axis are contiguous in both layouts.
  const std::size_t run = (r > 0 && perm[r - 1] == r - 1) ? shape[r - 1] : 1;
  const std::size_t outer_r = run > 1 ? r - 1 : r;
  std::vector<std::size_t> idx(r, 0);
  std::size_t offset = 0;
  for (std::size_t o = 0; o < total; o += run) {
    if (accumulate)
      for (std::size_t c = 0; c < run; ++c) dst[o + c] += src[offset + c];
    else
      std::copy_n(src + offset, run, dst + o);
    for (std::size_t d = outer_r; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        offset += strides[d];
        break;
      }
      offset -= strides[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
}

}  // namespace detail

template <typename T>
BasicTensor<T> permute(const BasicTensor<T>& a, std::vector<std::size_t> perm) {
  const Shape& s = a.shape();
  std::vector<std::size_t> check = perm;
  std::sort(check.begin(), check.end());
  for (std::size_t d = 0; d < check.size(); ++d) {
    if (check.size() != s.size() || check[d] != d) {
      throw ShapeError("permute: invalid axis order for shape " + to_string(s));
    }
  }
  Shape out_shape(s.size());
  for (std::size_t d = 0; d < s.size(); ++d) out_shape[d] = s[perm[d]];
  std::vector<T> out(a.numel());
  detail::permute_into(a.data().data(), s, perm, out.data(), false);
  std::vector<std::size_t> inverse(perm.size());
  for (std::size_t d = 0; d < perm.size(); ++d) inverse[perm[d]] = d;
  return make_result<T>("permute", out_shape, std::move(out), {a.node()},
                        [out_shape, inverse](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          detail::permute_into(self.grad.data(), out_shape, inverse, pa.grad.data(), true);
                        });
}

template <typename T>
BasicTensor<T> transpose_last(const BasicTensor<T>& a) {
  if (a.rank() < 2) throw ShapeError("transpose_last: rank < 2 for " + to_string(a.shape()));
  std::vector<std::size_t> perm(a.rank());
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
  return permute(a, std::move(perm));
}

// Per-row normalization over the last axis followed by an affine map.
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, T eps) {
  const std::size_t d = x.rank() ? x.shape().back() : 0;
  if (d == 0 || gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: input " + to_string(x.shape()) + " with gamma " +
                     to_string(gamma.shape()) + " and beta " + to_string(beta.shape()));
  }
  const std::size_t rows = x.numel() / d;
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xd.data() + r * d;
    T mu = 0;
    for (std::size_t c = 0; c < d; ++c) mu += xr[c];
    mu /= T(d);
    T var = 0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= T(d);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      const T h = (xr[c] - mu) * rstd[r];
      xhat[r * d + c] = h;
      out[r * d + c] = h * gd[c] + bd[c];
    }
  }
  return make_result<T>(
      "layer_norm", x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
      [d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const T* g = self.grad.data();
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gr = g + r * d;
          const T* hr = xhat.data() + r * d;
          if (pg.requires_grad)
            for (std::size_t c = 0; c < d; ++c) pg.grad[c] += gr[c] * hr[c];
          if (pb.requires_grad)
            for (std::size_t c = 0; c < d; ++c) pb.grad[c] += gr[c];
          if (!px.requires_grad) continue;
          T mean_g = 0, mean_gh = 0;
          for (std::size_t c = 0; c < d; ++c) {
            const T gg = gr[c] * pg.data[c];
            mean_g += gg;
            mean_gh += gg * hr[c];
          }
          mean_g /= T(d);
          mean_gh /= T(d);
          for (std::size_t c = 0; c < d; ++c) {
            const T gg = gr[c] * pg.data[c];
            px.grad[r * d + c] += rstd[r] * (gg - mean_g - hr[c] * mean_gh);
          }
        }
      });
}

// Softmax over the last axis with max subtraction. Entries equal to -inf get
// probability exactly zero.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  const std::size_t k = x.rank() ? x.shape().back() : 0;
  if (k == 0) throw ShapeError("softmax: empty last axis in " + to_string(x.shape()));
  const std::size_t rows = x.numel() / k;
  auto xd = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xd.data() + r * k;
    T* yr = out.data() + r * k;
    const T mx = *std::max_element(xr, xr + k);
    T total = 0;
    for (std::size_t c = 0; c < k; ++c) total += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < k; ++c) yr[c] /= total;
  }
  return make_result<T>("softmax", x.shape(), std::move(out), {x.node()}, [k, rows](Node<T>& self) {
    auto& px = *self.parents[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.data.data() + r * k;
      const T* g = self.grad.data() + r * k;
      T dot = 0;
      for (std::size_t c = 0; c < k; ++c) dot += y[c] * g[c];
      for (std::size_t c = 0; c < k; ++c) px.grad[r * k + c] += y[c] * (g[c] - dot);
    }
  });
}

// Exact-erf GELU.
template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  auto xd = x.data();
  std::vector<T> out(xd.size());
  std::vector<T> slope(grad_enabled() && x.requires_grad() ? xd.size() : 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xd[i];
    const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
    out[i] = v * cdf;
    if (!slope.empty()) slope[i] = cdf + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v);
  }
  return make_result<T>("gelu", x.shape(), std::move(out), {x.node()}, [slope = std::move(slope)](Node<T>& self) {
    auto& px = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i] * slope[i];
  });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return make_result<T>("sum", Shape{}, std::vector<T>{total}, {x.node()}, [](Node<T>& self) {
    auto& px = *self.parents[0];
    for (auto& g : px.grad) g += self.grad[0];
  });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  if (x.numel() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), T(1) / T(x.numel()));
}

// Selects rows of `src` viewed as [rows, width] (width = last extent). The
// result has shape `out_shape`, whose element count must be idx.size() * width.
template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& src, std::vector<std::size_t> idx, Shape out_shape) {
  const std::size_t width = src.rank() ? src.shape().back() : 1;
  const std::size_t rows = width ? src.numel() / width : 0;
  if (numel(out_shape) != idx.size() * width || (!out_shape.empty() && out_shape.back() != width)) {
    throw ShapeError("gather_rows: output shape " + to_string(out_shape) + " does not hold " +
                     std::to_string(idx.size()) + " rows of width " + std::to_string(width));
  }
  auto sd = src.data();
  std::vector<T> out(idx.size() * width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows) {
      throw ShapeError("gather_rows: row " + std::to_string(idx[r]) + " out of range for " +
                       to_string(src.shape()));
    }
    std::copy_n(sd.data() + idx[r] * width, width, out.data() + r * width);
  }
  return make_result<T>("gather_rows", std::move(out_shape), std::move(out), {src.node()},
                        [width, idx = std::move(idx)](Node<T>& self) {
                          auto& ps = *self.parents[0];
                          for (std::size_t r = 0; r < idx.size(); ++r)
                            for (std::size_t c = 0; c < width; ++c)
                              ps.grad[idx[r] * width + c] += self.grad[r * width + c];
                        });
}

// Concatenation along `axis`; all other extents must agree.
template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + to_string(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == ref[d];
    if (!ok) throw ShapeError("concat: " + to_string(s) + " does not match " + to_string(ref));
    out_shape[axis] += s[axis];
  }
  const std::size_t outer = numel(Shape(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(axis)));
  std::vector<std::size_t> chunk;  // per-part contiguous block per outer index
  std::size_t out_chunk = 0;
  for (const auto& p : parts) {
    chunk.push_back(outer ? p.numel() / outer : 0);
    out_chunk += chunk.back();
  }
  std::vector<T> out(outer * out_chunk);
  std::vector<std::shared_ptr<Node<T>>> nodes;
  std::size_t col = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    auto pd = parts[pi].data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pd.data() + o * chunk[pi], chunk[pi], out.data() + o * out_chunk + col);
    col += chunk[pi];
    nodes.push_back(parts[pi].node());
  }
  return make_result<T>("concat", std::move(out_shape), std::move(out), std::move(nodes),
                        [outer, out_chunk, chunk](Node<T>& self) {
                          std::size_t col = 0;
                          for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                            auto& p = *self.parents[pi];
                            if (p.requires_grad)
                              for (std::size_t o = 0; o < outer; ++o)
                                for (std::size_t c = 0; c < chunk[pi]; ++c)
                                  p.grad[o * chunk[pi] + c] += self.grad[o * out_chunk + col + c];
                            col += chunk[pi];
                          }
                        });
}

// Adds -inf to attention scores [B, H, Sq, Sk] wherever key_valid[b * Sk + k] is 0.
template <typename T>
BasicTensor<T> mask_keys(const BasicTensor<T>& scores, const std::vector<std::uint8_t>& key_valid) {
  if (scores.rank() != 4) throw ShapeError("mask_keys: scores must be [B, H, Sq, Sk], got " + to_string(scores.shape()));
  const std::size_t b = scores.dim(0), h = scores.dim(1), sq = scores.dim(2), sk = scores.dim(3);
  if (key_valid.size() != b * sk) throw ShapeError("mask_keys: key mask size mismatch for " + to_string(scores.shape()));
  std::vector<T> out(scores.data().begin(), scores.data().end());
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t k = 0; k < sk; ++k) {
      if (key_valid[bi * sk + k]) continue;
      for (std::size_t hi = 0; hi < h; ++hi)
        for (std::size_t q = 0; q < sq; ++q) out[((bi * h + hi) * sq + q) * sk + k] = neg_inf;
    }
  return make_result<T>("mask_keys", scores.shape(), std::move(out), {scores.node()}, [](Node<T>& self) {
    auto& ps = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (std::isfinite(self.data[i])) ps.grad[i] += self.grad[i];
  });
}

// Mean softmax cross-entropy of logits [N, V] against class indices.
template <typename T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, const std::vector<std::size_t>& targets) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size() || targets.empty()) {
    throw ShapeError("cross_entropy: logits " + to_string(logits.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = logits.dim(0), v = logits.dim(1);
  auto ld = logits.data();
  std::vector<T> probs(n * v);
  T loss = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] >= v) throw ShapeError("cross_entropy: target " + std::to_string(targets[r]) + " >= " + std::to_string(v));
    const T* lr = ld.data() + r * v;
    const T mx = *std::max_element(lr, lr + v);
    T total = 0;
    for (std::size_t c = 0; c < v; ++c) total += (probs[r * v + c] = std::exp(lr[c] - mx));
    for (std::size_t c = 0; c < v; ++c) probs[r * v + c] /= total;
    loss += std::log(total) + mx - lr[targets[r]];
  }
  loss /= T(n);
  return make_result<T>("cross_entropy", Shape{}, std::vector<T>{loss}, {logits.node()},
                        [n, v, targets, probs = std::move(probs)](Node<T>& self) {
                          auto& pl = *self.parents[0];
                          const T g = self.grad[0] / T(n);
                          for (std::size_t r = 0; r < n; ++r)
                            for (std::size_t c = 0; c < v; ++c)
                              pl.grad[r * v + c] += g * (probs[r * v + c] - (c == targets[r] ? T(1) : T(0)));
                        });
}

// Mean per-element binary cross-entropy with soft targets in [0, 1].
template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& logits, const std::vector<T>& targets) {
  if (logits.numel() != targets.size() || targets.empty()) {
    throw ShapeError("bce_with_logits: logits " + to_string(logits.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  auto z = logits.data();
  T loss = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    // softplus(z) - y z, written to stay finite for large |z|
    const T sp = std::max(z[i], T(0)) + std::log1p(std::exp(-std::abs(z[i])));
    loss += sp - targets[i] * z[i];
  }
  const std::size_t n = targets.size();
  loss /= T(n);
  return make_result<T>("bce_with_logits", Shape{}, std::vector<T>{loss}, {logits.node()},
                        [n, targets](Node<T>& self) {
                          auto& pl = *self.parents[0];
                          const T g = self.grad[0] / T(n);
                          for (std::size_t i = 0; i < n; ++i) {
                            const T s = T(1) / (T(1) + std::exp(-pl.data[i]));
                            pl.grad[i] += g * (s - targets[i]);
                          }
                        });
}

// Mean squared error against a constant target.
template <typename T>
BasicTensor<T> mse(const BasicTensor<T>& pred, const std::vector<T>& target) {
  if (pred.numel() != target.size() || target.empty()) {
    throw ShapeError("mse: prediction " + to_string(pred.shape()) + " vs " + std::to_string(target.size()) +
                     " targets");
  }
  auto p = pred.data();
  T loss = 0;
  for (std::size_t i = 0; i < p.size(); ++i) loss += (p[i] - target[i]) * (p[i] - target[i]);
  const std::size_t n = target.size();
  loss /= T(n);
  return make_result<T>("mse", Shape{}, std::vector<T>{loss}, {pred.node()}, [n, target](Node<T>& self) {
    auto& pp = *self.parents[0];
    const T g = T(2) * self.grad[0] / T(n);
    for (std::size_t i = 0; i < n; ++i) pp.grad[i] += g * (pp.data[i] - target[i]);
  });
}

}  // namespace vlc
