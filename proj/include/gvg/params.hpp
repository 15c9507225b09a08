#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gvg/numerics.hpp"

namespace gvg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Named rank-1 or rank-2 tensor, row-major.
struct Tensor {
  std::string name;
  std::vector<int> shape;
  Vec data;

  int rows() const { return shape[0]; }
  int cols() const { return shape.size() > 1 ? shape[1] : 1; }
  std::size_t size() const { return data.size(); }
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Uniform double in [0,1) from the top 53 bits; identical on every platform.
inline double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace detail

/// Registry of named weight tensors with deterministic per-name seeding.
/// Re-creating a store with the same seed reproduces every tensor bit-for-bit.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  /// Registers a matrix (init uniform in +-1/sqrt(cols)) or returns the
  /// existing tensor after a shape check.
  Tensor& matrix(const std::string& name, int rows, int cols) {
    return get_or_create(name, {rows, cols}, cols);
  }

  /// Registers a vector (init uniform in +-1/sqrt(n)) or returns it.
  Tensor& vector(const std::string& name, int n) { return get_or_create(name, {n}, n); }

  Tensor& require(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return tensors_[it->second];
  }
  const Tensor& require(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return tensors_[it->second];
  }

  const std::vector<Tensor>& tensors() const { return tensors_; }

  /// Names matching any of the given prefixes, in declaration order.
  std::vector<std::string> names_with_prefix(const std::vector<std::string>& prefixes) const {
    std::vector<std::string> out;
    for (const Tensor& t : tensors_) {
      for (const std::string& p : prefixes) {
        if (t.name.rfind(p, 0) == 0) {
          out.push_back(t.name);
          break;
        }
      }
    }
    return out;
  }

  /// Text header (name, shape, seed) followed by little-endian f64 payloads
  /// in declaration order.
  void save(std::ostream& os) const {
    os << "paramstore 1\n";
    os << "seed " << seed_ << "\n";
    for (const Tensor& t : tensors_) {
      os << "tensor " << t.name << " " << t.shape.size();
      for (int d : t.shape) os << " " << d;
      os << "\n";
    }
    os << "payload\n";
    for (const Tensor& t : tensors_) {
      for (double x : t.data) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
        if constexpr (std::endian::native == std::endian::big) {
          bits = __builtin_bswap64(bits);
        }
        char buf[8];
        std::memcpy(buf, &bits, 8);
        os.write(buf, 8);
      }
    }
  }

  void save_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    save(f);
  }

  static ParamStore load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "paramstore 1") {
      throw std::runtime_error("paramstore: bad magic");
    }
    ParamStore store;
    std::vector<Tensor> pending;
    while (std::getline(is, line)) {
      if (line == "payload") break;
      std::istringstream ls(line);
      std::string kind;
      ls >> kind;
      if (kind == "seed") {
        ls >> store.seed_;
      } else if (kind == "tensor") {
        Tensor t;
        std::size_t rank = 0;
        ls >> t.name >> rank;
        t.shape.resize(rank);
        std::size_t n = 1;
        for (std::size_t i = 0; i < rank; ++i) {
          ls >> t.shape[i];
          n *= static_cast<std::size_t>(t.shape[i]);
        }
        if (!ls) throw std::runtime_error("paramstore: bad tensor line");
        t.data.resize(n);
        pending.push_back(std::move(t));
      } else {
        throw std::runtime_error("paramstore: unexpected line: " + line);
      }
    }
    for (Tensor& t : pending) {
      for (double& x : t.data) {
        char buf[8];
        is.read(buf, 8);
        if (!is) throw std::runtime_error("paramstore: truncated payload");
        std::uint64_t bits;
        std::memcpy(&bits, buf, 8);
        if constexpr (std::endian::native == std::endian::big) {
          bits = __builtin_bswap64(bits);
        }
        x = std::bit_cast<double>(bits);
      }
      store.index_[t.name] = store.tensors_.size();
      store.tensors_.push_back(std::move(t));
    }
    return store;
  }

  static ParamStore load_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    return load(f);
  }

 private:
  Tensor& get_or_create(const std::string& name, std::vector<int> shape, int fan_in) {
    auto it = index_.find(name);
    if (it != index_.end()) {
      Tensor& t = tensors_[it->second];
      if (t.shape != shape) throw ConfigError("shape mismatch for parameter: " + name);
      return t;
    }
    Tensor t;
    t.name = name;
    t.shape = std::move(shape);
    std::size_t n = 1;
    for (int d : t.shape) {
      if (d <= 0) throw ConfigError("non-positive dimension for parameter: " + name);
      n *= static_cast<std::size_t>(d);
    }
    t.data.resize(n);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::mt19937_64 rng(detail::splitmix64(seed_ ^ detail::fnv1a(name)));
    for (double& x : t.data) x = (2.0 * detail::u01(rng) - 1.0) * bound;
    index_[name] = tensors_.size();
    tensors_.push_back(std::move(t));
    return tensors_.back();
  }

  std::uint64_t seed_ = 0;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Registers <name>.w (out x in) and <name>.b (out).
inline void register_linear(ParamStore& params, const std::string& name, int in, int out) {
  params.matrix(name + ".w", out, in);
  params.vector(name + ".b", out);
}

inline Vec linear_forward(const ParamStore& params, const std::string& name, const Vec& x) {
  const Tensor& w = params.require(name + ".w");
  const Tensor& b = params.require(name + ".b");
  if (w.cols() != static_cast<int>(x.size())) {
    throw ConfigError("linear_forward: input size mismatch for " + name);
  }
  Vec y(static_cast<std::size_t>(w.rows()));
  for (int r = 0; r < w.rows(); ++r) {
    y[static_cast<std::size_t>(r)] =
        b.data[static_cast<std::size_t>(r)] +
        dot(w.data.data() + static_cast<std::size_t>(r) * w.cols(), x.data(), w.cols());
  }
  return y;
}

/// Registers an MLP as affine layers <name>.0, <name>.1, ... with ReLU
/// between them. dims = {in, (hidden...), out}; a 2-entry dims list is a
/// single affine layer.
inline void register_mlp(ParamStore& params, const std::string& name,
                         const std::vector<int>& dims) {
  if (dims.size() < 2) throw ConfigError("register_mlp: need at least {in, out}");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    register_linear(params, name + "." + std::to_string(i), dims[i], dims[i + 1]);
  }
}

inline Vec mlp_forward(const ParamStore& params, const std::string& name, const Vec& input) {
  if (!params.contains(name + ".0.w")) throw ConfigError("unknown MLP: " + name);
  Vec x = input;
  for (int layer = 0; params.contains(name + "." + std::to_string(layer) + ".w"); ++layer) {
    if (layer > 0) {
      for (double& v : x) v = std::max(v, 0.0);
    }
    x = linear_forward(params, name + "." + std::to_string(layer), x);
  }
  return x;
}

}  // namespace gvg
